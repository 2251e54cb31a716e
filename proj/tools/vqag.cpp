// vqag: command-line front end. Exit codes: 0 success, 2 usage or input
// error, 3 numerical failure.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vqag/commands.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

void add_seed(CLI::App* cmd, std::uint64_t& seed) {
  cmd->add_option("--seed", seed, "Random seed")->envname("VQAG_SEED");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace vqag;
  std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"Variational question-answer pair generation"};
  app.set_config("--config", "", "INI/TOML file; keys are flag names, one [section] per subcommand");
  app.require_subcommand(1);

  BuildVocabOptions bv;
  auto* c_bv = app.add_subcommand("build-vocab", "Build the vocabulary and encode SQuAD splits");
  c_bv->add_option("--train", bv.train, "Training split (SQuAD v1.1 JSON)")->required()->check(CLI::ExistingFile);
  c_bv->add_option("--dev", bv.dev, "Dev split")->check(CLI::ExistingFile);
  c_bv->add_option("--test", bv.test, "Test split")->check(CLI::ExistingFile);
  c_bv->add_option("--out", bv.out, "Output data directory")->required();
  c_bv->add_option("--cap", bv.cap, "Word vocabulary size cap")->capture_default_str();
  c_bv->add_option("--word-len", bv.word_len, "Characters kept per word")->capture_default_str();
  c_bv->add_option("--max-answer-len", bv.max_answer_len, "Skip answers longer than this")->capture_default_str();
  c_bv->add_option("--max-context-len", bv.max_context_len, "Truncate contexts (0 keeps all)")->capture_default_str();

  TrainCmdOptions tr;
  auto* c_tr = app.add_subcommand("train", "Train a model");
  c_tr->add_option("--data", tr.data, "Data directory from build-vocab")->required()->check(CLI::ExistingDirectory);
  c_tr->add_option("--out", tr.out, "Checkpoint directory")->required();
  c_tr->add_option("--split", tr.split)->capture_default_str();
  c_tr->add_option("--ca", tr.train.C_a, "Answer KL capacity")->capture_default_str();
  c_tr->add_option("--cq", tr.train.C_q, "Question KL capacity")->capture_default_str();
  c_tr->add_option("--epochs", tr.train.epochs)->capture_default_str();
  c_tr->add_option("--batch-size", tr.train.batch_size)->capture_default_str();
  c_tr->add_option("--lr", tr.train.lr)->capture_default_str();
  c_tr->add_option("--dropout", tr.train.dropout)->capture_default_str();
  c_tr->add_option("--clip-norm", tr.train.clip_norm, "Global gradient norm cap (<= 0 disables)")->capture_default_str();
  c_tr->add_option("--hidden", tr.train.hidden)->capture_default_str();
  c_tr->add_option("--latent", tr.train.latent_dim)->capture_default_str();
  c_tr->add_option("--word-dim", tr.word_dim)->capture_default_str();
  c_tr->add_option("--char-dim", tr.char_dim)->capture_default_str();
  c_tr->add_option("--char-filters", tr.char_filters)->capture_default_str();
  c_tr->add_option("--char-window", tr.char_window)->capture_default_str();
  c_tr->add_option("--embeddings", tr.embeddings, "Word vectors, one 'word v1 ... vd' per line")->check(CLI::ExistingFile);
  add_seed(c_tr, tr.train.seed);

  GenerateCmdOptions gen;
  std::string filter = "on";
  auto* c_gen = app.add_subcommand("generate", "Sample QA pairs and export them as SQuAD JSON");
  c_gen->add_option("--ckpt", gen.ckpt)->required()->check(CLI::ExistingFile);
  c_gen->add_option("--data", gen.data)->required()->check(CLI::ExistingDirectory);
  c_gen->add_option("--split", gen.split)->capture_default_str();
  c_gen->add_option("--n", gen.n, "Pairs per paragraph")->capture_default_str();
  c_gen->add_option("--filter", filter)->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  c_gen->add_option("--out", gen.out)->required();
  c_gen->add_option("--sidecar", gen.sidecar, "Provenance JSON lines (default <out>.provenance.jsonl)");
  c_gen->add_option("--max-paragraphs", gen.max_paragraphs)->capture_default_str();
  add_seed(c_gen, gen.seed);

  EvalCmdOptions ev;
  auto* c_ev = app.add_subcommand("eval", "Score a checkpoint");
  c_ev->add_option("--mode", ev.mode)->required()->check(CLI::IsMember({"ae", "qg", "nll", "types"}));
  c_ev->add_option("--ckpt", ev.ckpt)->check(CLI::ExistingFile);
  c_ev->add_option("--data", ev.data)->required()->check(CLI::ExistingDirectory);
  c_ev->add_option("--split", ev.split)->capture_default_str();
  c_ev->add_option("--report", ev.report, "Report JSON path");
  c_ev->add_option("--n", ev.n, "Draws per input for ae/qg/types")->capture_default_str();
  c_ev->add_option("--n-samples", ev.n_samples, "Importance samples for nll")->capture_default_str();
  c_ev->add_option("--limit", ev.limit, "Evaluate at most this many inputs (0 = all)")->capture_default_str();
  add_seed(c_ev, ev.seed);

  InterpolateCmdOptions ip;
  auto* c_ip = app.add_subcommand("interpolate", "Decode a grid between two examples' latent codes");
  c_ip->add_option("--ckpt", ip.ckpt)->required()->check(CLI::ExistingFile);
  c_ip->add_option("--data", ip.data)->required()->check(CLI::ExistingDirectory);
  c_ip->add_option("--split", ip.split)->capture_default_str();
  c_ip->add_option("--example-a", ip.example_a)->required();
  c_ip->add_option("--example-b", ip.example_b)->required();
  c_ip->add_option("--steps", ip.steps)->capture_default_str()->check(CLI::PositiveNumber);
  c_ip->add_option("--out", ip.out, "Also write the grid to this file");

  ToyCmdOptions toy;
  auto* c_toy = app.add_subcommand("make-toy", "Write the templated toy corpus as SQuAD JSON");
  c_toy->add_option("--out", toy.out)->required();
  c_toy->add_option("--examples", toy.examples)->capture_default_str()->check(CLI::PositiveNumber);
  c_toy->add_option("--seed", toy.seed)->capture_default_str();

  PlotCmdOptions pl;
  auto* c_pl = app.add_subcommand("plot", "Render a training log or report as SVG");
  c_pl->add_option("--log", pl.logs, "Training log(s) (train_log.jsonl)")->check(CLI::ExistingFile);
  c_pl->add_option("--metric", pl.metrics, "Log fields to draw")->capture_default_str();
  c_pl->add_option("--report", pl.report, "Report JSON to draw as bars")->check(CLI::ExistingFile);
  c_pl->add_option("--title", pl.title);
  c_pl->add_option("--out", pl.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*c_bv) {
      auto r = run_build_vocab(bv, args);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "vocabulary: " << r.vocab_size << " words\n";
      for (const auto& [split, n] : r.examples)
        std::cout << split << ": " << n << " examples, " << r.skipped[split] << " skipped\n";
    } else if (*c_tr) {
      auto r = run_train(tr, args, &std::cout);
      if (!r.checkpoints.empty()) std::cout << "wrote " << r.checkpoints.back().string() << '\n';
    } else if (*c_gen) {
      gen.filter = filter == "on";
      auto r = run_generate(gen, args);
      for (const auto& w : r.exported.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "generated " << r.generated << ", passed filters " << r.passed << ", written "
                << r.exported.written << " (" << r.exported.duplicates << " duplicates)\n";
      for (const auto& [reason, n] : r.rejections) std::cout << "  " << reason << ": " << n << '\n';
    } else if (*c_ev) {
      auto report = run_eval(ev, args);
      std::cout << render_report(ev.mode, report);
    } else if (*c_ip) {
      std::string grid;
      run_interpolate(ip, args, &grid);
      std::cout << grid;
    } else if (*c_toy) {
      std::cout << "wrote " << run_make_toy(toy, args) << " questions to " << toy.out.string() << '\n';
    } else if (*c_pl) {
      run_plot(pl, args);
      std::cout << "wrote " << pl.out.string() << '\n';
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return EXIT_SUCCESS;
}

#pragma once

// The command-line workflows as plain functions: vocabulary building,
// training, synthesis, evaluation, interpolation and plotting. Each writes a
// run manifest next to its outputs.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vqag/corpus/embeddings.hpp"
#include "vqag/corpus/example.hpp"
#include "vqag/corpus/squad.hpp"
#include "vqag/corpus/vocabulary.hpp"
#include "vqag/io.hpp"
#include "vqag/likelihood.hpp"
#include "vqag/metrics.hpp"
#include "vqag/objective.hpp"
#include "vqag/plot.hpp"
#include "vqag/synthesis.hpp"
#include "vqag/toy.hpp"

namespace vqag {

namespace fs = std::filesystem;

// ---- run manifests ---------------------------------------------------------

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream o;
  o << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return o.str();
}

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::uint64_t seed = 0;
  std::string checkpoint_hash;
  std::string started_at = utc_timestamp();
  std::string finished_at;
  std::string status = "ok";
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RunManifest, command, argv, config, inputs, outputs, seed,
                                   checkpoint_hash, started_at, finished_at, status)

inline RunManifest start_manifest(std::string command, std::vector<std::string> argv,
                                  nlohmann::json config) {
  RunManifest m;
  m.command = std::move(command);
  m.argv = std::move(argv);
  m.config = std::move(config);
  return m;
}

/// `<file>.manifest.json` for a file output, `<dir>/manifest.json` for a directory.
inline fs::path manifest_path(const fs::path& output) {
  if (fs::is_directory(output)) return output / "manifest.json";
  fs::path p = output;
  p += ".manifest.json";
  return p;
}

inline void write_manifest(RunManifest m, const fs::path& output) {
  m.finished_at = utc_timestamp();
  write_file_atomic(manifest_path(output), nlohmann::json(m).dump(2) + "\n");
}

// ---- data directories ----------------------------------------------------------
//
// build-vocab writes vocab.words, vocab.chars and one <split>.jsonl per input
// file (train, dev, test).

inline Vocabulary load_data_vocab(const fs::path& dir) {
  return Vocabulary::load(dir / "vocab.words", dir / "vocab.chars");
}

inline std::vector<TokenizedExample> load_split(const fs::path& dir, const std::string& split) {
  fs::path p = dir / (split + ".jsonl");
  if (!fs::exists(p)) throw InputError("no split '" + split + "' in " + dir.string() + " (expected " + p.string() + ")");
  return read_examples_jsonl(p);
}

/// First example of each paragraph, in order of appearance.
inline std::vector<const TokenizedExample*> paragraph_representatives(
    const std::vector<TokenizedExample>& examples) {
  std::vector<const TokenizedExample*> out;
  std::set<std::string> seen;
  for (const auto& ex : examples)
    if (seen.insert(ex.paragraph_id).second) out.push_back(&ex);
  return out;
}

inline Network load_checked_network(const fs::path& ckpt, const Vocabulary& vocab) {
  Network net = Network::load(ckpt);
  if (net.config().vocab_size != vocab.size() || net.config().char_vocab_size != vocab.char_size())
    throw InputError(ckpt.string() + ": checkpoint vocabulary (" +
                     std::to_string(net.config().vocab_size) + " words) does not match the data directory (" +
                     std::to_string(vocab.size()) + " words)");
  return net;
}

inline nlohmann::json squad_document(const std::vector<ParagraphRecord>& paragraphs,
                                     const std::string& title = "toy") {
  nlohmann::json article = {{"title", title}, {"paragraphs", nlohmann::json::array()}};
  for (const auto& p : paragraphs) {
    nlohmann::json para = {{"context", p.context_text}, {"qas", nlohmann::json::array()}};
    for (const auto& q : p.qas)
      para["qas"].push_back({{"id", q.id},
                             {"question", q.question_text},
                             {"answers", {{{"text", q.answer_text}, {"answer_start", q.answer_char_start}}}}});
    article["paragraphs"].push_back(para);
  }
  return {{"version", "1.1"}, {"data", nlohmann::json::array({article})}};
}

// ---- build-vocab -----------------------------------------------------------------

struct BuildVocabOptions {
  fs::path train, dev, test, out;
  int cap = 45000;
  int word_len = kDefaultWordLen;
  int max_answer_len = 30;
  int max_context_len = 0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BuildVocabOptions, train, dev, test, out, cap, word_len,
                                   max_answer_len, max_context_len)

struct BuildVocabResult {
  int vocab_size = 0;
  std::map<std::string, std::size_t> examples;  // per split
  std::map<std::string, std::size_t> skipped;
  std::vector<std::string> warnings;
};

inline BuildVocabResult run_build_vocab(const BuildVocabOptions& opt,
                                        const std::vector<std::string>& argv = {}) {
  require(opt.cap > 0, "build-vocab: --cap must be positive");
  RunManifest m = start_manifest("build-vocab", argv, opt);
  SquadLoadResult train = load_squad_json(opt.train);
  fs::create_directories(opt.out);
  Vocabulary vocab = build_vocabulary(std::span<const ParagraphRecord>(train.paragraphs), opt.cap);
  vocab.save(opt.out / "vocab.words", opt.out / "vocab.chars");
  BuildVocabResult res;
  res.vocab_size = vocab.size();
  res.warnings = train.warnings;
  EncodeOptions enc{opt.word_len, opt.max_context_len};
  auto encode = [&](const std::string& split, const SquadLoadResult& loaded) {
    EncodedDataset d = encode_dataset(loaded.paragraphs, vocab, enc, opt.max_answer_len);
    write_examples_jsonl(opt.out / (split + ".jsonl"), d.examples);
    res.examples[split] = d.examples.size();
    res.skipped[split] = d.skipped + loaded.skipped;
    res.warnings.insert(res.warnings.end(), d.warnings.begin(), d.warnings.end());
    m.outputs[split] = (opt.out / (split + ".jsonl")).string();
  };
  m.inputs["train"] = opt.train.string();
  encode("train", train);
  for (auto [split, path] : {std::pair<std::string, fs::path>{"dev", opt.dev}, {"test", opt.test}}) {
    if (path.empty()) continue;
    m.inputs[split] = path.string();
    SquadLoadResult loaded = load_squad_json(path);
    res.warnings.insert(res.warnings.end(), loaded.warnings.begin(), loaded.warnings.end());
    encode(split, loaded);
  }
  m.outputs["vocab"] = (opt.out / "vocab.words").string();
  write_manifest(m, opt.out);
  return res;
}

// ---- train -------------------------------------------------------------------------

struct TrainCmdOptions {
  fs::path data, out, embeddings;
  std::string split = "train";
  TrainConfig train;
  int word_dim = 300;
  int char_dim = 32;
  int char_filters = 100;
  int char_window = 5;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrainCmdOptions, data, out, embeddings, split, train, word_dim,
                                   char_dim, char_filters, char_window)

inline ModelConfig model_config_for(const TrainCmdOptions& opt, const Vocabulary& vocab, int word_len) {
  ModelConfig c;
  c.vocab_size = vocab.size();
  c.char_vocab_size = vocab.char_size();
  c.word_dim = opt.word_dim;
  c.char_dim = opt.char_dim;
  c.char_filters = opt.char_filters;
  c.char_window = opt.char_window;
  c.word_len = word_len;
  c.hidden = opt.train.hidden;
  c.latent = opt.train.latent_dim;
  return c;
}

/// Trains from a data directory; writes epoch_NN.ckpt files, train_log.jsonl
/// and the manifest under `out`. A numerical failure leaves the earlier
/// checkpoints and log lines in place and rethrows.
inline TrainResult run_train(const TrainCmdOptions& opt, const std::vector<std::string>& argv = {},
                             std::ostream* progress = nullptr) {
  validate(opt.train);
  RunManifest m = start_manifest("train", argv, opt);
  m.seed = opt.train.seed;
  m.inputs["data"] = opt.data.string();
  Vocabulary vocab = load_data_vocab(opt.data);
  std::vector<TokenizedExample> data = load_split(opt.data, opt.split);
  if (data.empty() && opt.train.epochs > 0) throw InputError("split '" + opt.split + "' is empty");
  int word_len = data.empty() ? kDefaultWordLen : data.front().context.word_len;
  Network net(model_config_for(opt, vocab, word_len), opt.train.seed);
  if (!opt.embeddings.empty()) {
    m.inputs["embeddings"] = opt.embeddings.string();
    Matrix table = net.params().at("word_emb").value;
    WordVectorLoad loaded = load_word_vectors(opt.embeddings, vocab, table);
    net.set_word_vectors(table);
    if (progress) *progress << "word vectors: " << loaded.matched << " of " << vocab.size() << " words found\n";
  }
  fs::create_directories(opt.out);
  fs::path log_path = opt.out / "train_log.jsonl";
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw InputError("cannot write " + log_path.string());
  TrainHooks hooks;
  hooks.checkpoint_dir = opt.out;
  hooks.on_epoch = [&](const EpochLog& e) {
    log << epoch_log_json(e).dump() << '\n' << std::flush;
    if (progress)
      *progress << "epoch " << e.epoch << "  loss " << e.loss.total << "  kl_z " << e.loss.kl_z
                << "  kl_y " << e.loss.kl_y << '\n';
  };
  m.outputs["log"] = log_path.string();
  try {
    TrainResult r = train(opt.train, data, net, hooks);
    if (!r.checkpoints.empty()) {
      m.outputs["checkpoint"] = r.checkpoints.back().string();
      m.checkpoint_hash = file_digest(r.checkpoints.back());
    }
    write_manifest(m, opt.out);
    return r;
  } catch (const NumericalError& e) {
    m.status = std::string("numerical failure: ") + e.what();
    write_manifest(m, opt.out);
    throw;
  }
}

// ---- generate ---------------------------------------------------------------------

struct GenerateCmdOptions {
  fs::path ckpt, data, out, sidecar;
  std::string split = "test";
  int n = 50;
  bool filter = true;
  std::uint64_t seed = 0;
  int max_paragraphs = 0;  // 0 = all
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GenerateCmdOptions, ckpt, data, out, sidecar, split, n, filter,
                                   seed, max_paragraphs)

struct GenerateCmdResult {
  std::size_t generated = 0;
  std::size_t passed = 0;
  std::map<std::string, std::size_t> rejections;
  ExportResult exported;
};

inline GenerateCmdResult run_generate(const GenerateCmdOptions& opt,
                                      const std::vector<std::string>& argv = {}) {
  require(opt.n >= 0, "generate: --n must be non-negative");
  RunManifest m = start_manifest("generate", argv, opt);
  m.seed = opt.seed;
  m.inputs = {{"ckpt", opt.ckpt.string()}, {"data", opt.data.string()}};
  m.checkpoint_hash = file_digest(opt.ckpt);
  Vocabulary vocab = load_data_vocab(opt.data);
  Network net = load_checked_network(opt.ckpt, vocab);
  std::vector<TokenizedExample> data = load_split(opt.data, opt.split);
  auto paragraphs = paragraph_representatives(data);
  if (opt.max_paragraphs > 0 && static_cast<int>(paragraphs.size()) > opt.max_paragraphs)
    paragraphs.resize(static_cast<std::size_t>(opt.max_paragraphs));
  std::vector<QAPairRecord> records;
  for (const TokenizedExample* p : paragraphs) {
    auto rng = example_stream(opt.seed, 0, p->paragraph_id);
    auto recs = generate_pairs(net, *p, vocab, opt.n, rng);
    records.insert(records.end(), recs.begin(), recs.end());
  }
  if (opt.filter) records = apply_filters(std::move(records));
  GenerateCmdResult res;
  res.generated = records.size();
  for (const auto& r : records) {
    if (r.passed_filters) ++res.passed;
    else ++res.rejections[to_string(*r.rejection_reason)];
  }
  fs::path sidecar = opt.sidecar;
  if (sidecar.empty()) {
    sidecar = opt.out;
    sidecar += ".provenance.jsonl";
  }
  if (opt.out.has_parent_path()) fs::create_directories(opt.out.parent_path());
  res.exported = export_squad(records, opt.out, sidecar);
  m.outputs = {{"squad", opt.out.string()}, {"provenance", sidecar.string()}};
  write_manifest(m, opt.out);
  return res;
}

// ---- eval ----------------------------------------------------------------------------

struct EvalCmdOptions {
  std::string mode;
  fs::path ckpt, data, report;
  std::string split = "test";
  int n = 50;
  int n_samples = 300;
  std::uint64_t seed = 0;
  int limit = 0;  // 0 = all inputs
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EvalCmdOptions, mode, ckpt, data, report, split, n, n_samples,
                                   seed, limit)

inline nlohmann::json eval_ae(Network& net, const std::vector<TokenizedExample>& data, int n,
                              std::uint64_t seed, int limit) {
  std::map<std::string, ContextSpans> by_paragraph;
  std::vector<std::string> order;
  for (const auto& ex : data) {
    auto [it, fresh] = by_paragraph.try_emplace(ex.paragraph_id);
    if (fresh) {
      order.push_back(ex.paragraph_id);
      it->second.context_id = ex.paragraph_id;
    }
    it->second.golds.push_back(ex.answer_span);
  }
  auto reps = paragraph_representatives(data);
  if (limit > 0 && static_cast<int>(reps.size()) > limit) reps.resize(static_cast<std::size_t>(limit));
  std::vector<ContextSpans> contexts;
  for (const TokenizedExample* p : reps) {
    auto rng = example_stream(seed, 0, p->paragraph_id);
    ContextSpans cs = by_paragraph[p->paragraph_id];
    cs.preds = sample_answers(net, *p, n, rng);
    contexts.push_back(std::move(cs));
  }
  return ae_scores(contexts);
}

inline nlohmann::json eval_qg(Network& net, const Vocabulary& vocab,
                              const std::vector<TokenizedExample>& data, int n, std::uint64_t seed,
                              int limit) {
  std::vector<Tokens> refs;
  std::vector<std::vector<Tokens>> groups;
  for (const auto& ex : data) {
    if (limit > 0 && static_cast<int>(refs.size()) >= limit) break;
    auto rng = example_stream(seed, 0, ex.id);
    refs.push_back(ex.question.words);
    groups.push_back(sample_questions(net, ex, vocab, n, rng));
  }
  return qg_scores(refs, groups);
}

/// Runs one evaluation mode and returns its report; `types` needs no checkpoint.
inline nlohmann::json run_eval(const EvalCmdOptions& opt, const std::vector<std::string>& argv = {}) {
  static const std::set<std::string> kModes = {"ae", "qg", "nll", "types"};
  if (!kModes.count(opt.mode)) throw InputError("eval: unknown --mode '" + opt.mode + "' (ae, qg, nll, types)");
  RunManifest m = start_manifest("eval", argv, opt);
  m.seed = opt.seed;
  m.inputs["data"] = opt.data.string();
  Vocabulary vocab = load_data_vocab(opt.data);
  std::vector<TokenizedExample> data = load_split(opt.data, opt.split);
  nlohmann::json report;
  if (opt.mode == "types") {
    std::vector<Tokens> gold;
    for (const auto& ex : data) gold.push_back(ex.question.words);
    report["reference"] = question_type_histogram(gold);
    report["n_questions"] = gold.size();
  }
  if (opt.mode != "types" || !opt.ckpt.empty()) {
    if (opt.ckpt.empty()) throw InputError("eval --mode " + opt.mode + " needs --ckpt");
    m.inputs["ckpt"] = opt.ckpt.string();
    m.checkpoint_hash = file_digest(opt.ckpt);
    Network net = load_checked_network(opt.ckpt, vocab);
    if (opt.mode == "ae") {
      report = eval_ae(net, data, opt.n, opt.seed, opt.limit);
    } else if (opt.mode == "qg") {
      report = eval_qg(net, vocab, data, opt.n, opt.seed, opt.limit);
    } else if (opt.mode == "nll") {
      std::vector<TokenizedExample> subset = data;
      if (opt.limit > 0 && static_cast<int>(subset.size()) > opt.limit) subset.resize(static_cast<std::size_t>(opt.limit));
      if (subset.empty()) throw InputError("split '" + opt.split + "' is empty");
      report = is_nll(net, subset, opt.n_samples, opt.seed);
      KLReport kl = mean_kl(net, subset);
      report["kl_z"] = kl.kl_z;
      report["kl_y"] = kl.kl_y;
    } else {
      std::vector<Tokens> generated;
      for (const TokenizedExample* p : paragraph_representatives(data)) {
        auto rng = example_stream(opt.seed, 0, p->paragraph_id);
        for (auto& r : generate_pairs(net, *p, vocab, opt.n, rng)) generated.push_back(r.question_tokens);
      }
      report["generated"] = question_type_histogram(generated);
    }
  }
  if (!opt.report.empty()) {
    if (opt.report.has_parent_path()) fs::create_directories(opt.report.parent_path());
    write_file_atomic(opt.report, report.dump(2) + "\n");
    m.outputs["report"] = opt.report.string();
    write_manifest(m, opt.report);
  }
  return report;
}

/// Plain-text table of a report, one metric per row.
inline std::string render_report(const std::string& mode, const nlohmann::json& report) {
  std::ostringstream o;
  auto row = [&](const std::string& k, const nlohmann::json& v) {
    o << std::left << std::setw(18) << k;
    if (v.is_number_float()) o << std::fixed << std::setprecision(3) << v.get<double>();
    else o << v.dump();
    o << '\n';
  };
  if (mode == "types") {
    o << std::left << std::setw(10) << "type";
    for (const auto& [col, _] : report.items())
      if (report[col].is_object()) o << std::setw(12) << col;
    o << '\n';
    std::vector<std::string> types(question_types().begin(), question_types().end());
    types.push_back("other");
    for (const auto& t : types) {
      o << std::setw(10) << t;
      for (const auto& [col, h] : report.items())
        if (h.is_object()) o << std::setw(12) << std::fixed << std::setprecision(1) << h.value(t, 0.0);
      o << '\n';
    }
    return o.str();
  }
  for (const auto& [k, v] : report.items())
    if (!v.is_object()) row(k, v);
  if (report.contains("type_histogram"))
    for (const auto& [k, v] : report["type_histogram"].items()) row("type:" + k, v);
  return o.str();
}

// ---- interpolate ---------------------------------------------------------------------

struct InterpolateCmdOptions {
  fs::path ckpt, data, out;
  std::string split = "test";
  std::string example_a, example_b;
  int steps = 5;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(InterpolateCmdOptions, ckpt, data, out, split, example_a,
                                   example_b, steps)

inline std::string render_grid(const std::vector<std::vector<QAPairRecord>>& grid) {
  std::size_t width = 8;
  for (const auto& row : grid)
    for (const auto& c : row) width = std::max({width, c.answer_text.size() + 3, join(c.question_tokens).size() + 3});
  std::ostringstream o;
  o << std::left << std::setw(6) << "";
  for (std::size_t j = 0; j < grid.front().size(); ++j) o << " | " << std::setw(static_cast<int>(width)) << ("z" + std::to_string(j));
  o << '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    o << std::setw(6) << ("y" + std::to_string(i));
    for (const auto& c : grid[i]) o << " | " << std::setw(static_cast<int>(width)) << ("A: " + c.answer_text);
    o << '\n' << std::setw(6) << "";
    for (const auto& c : grid[i]) o << " | " << std::setw(static_cast<int>(width)) << ("Q: " + join(c.question_tokens));
    o << '\n';
  }
  return o.str();
}

inline std::vector<std::vector<QAPairRecord>> run_interpolate(const InterpolateCmdOptions& opt,
                                                              const std::vector<std::string>& argv = {},
                                                              std::string* rendered = nullptr) {
  RunManifest m = start_manifest("interpolate", argv, opt);
  m.inputs = {{"ckpt", opt.ckpt.string()}, {"data", opt.data.string()}};
  m.checkpoint_hash = file_digest(opt.ckpt);
  Vocabulary vocab = load_data_vocab(opt.data);
  Network net = load_checked_network(opt.ckpt, vocab);
  std::vector<TokenizedExample> data = load_split(opt.data, opt.split);
  auto find = [&](const std::string& id) -> const TokenizedExample& {
    for (const auto& ex : data)
      if (ex.id == id) return ex;
    throw InputError("no example '" + id + "' in split '" + opt.split + "'");
  };
  const TokenizedExample& a = find(opt.example_a);
  const TokenizedExample& b = find(opt.example_b);
  if (a.context_text != b.context_text)
    throw InputError("examples " + a.id + " and " + b.id + " do not share a context");
  auto grid = interpolate(net, a, b, opt.steps, vocab);
  std::string text = "context: " + a.context_text + "\n" + render_grid(grid);
  if (rendered) *rendered = text;
  if (!opt.out.empty()) {
    write_file_atomic(opt.out, text);
    m.outputs["grid"] = opt.out.string();
    write_manifest(m, opt.out);
  }
  return grid;
}

// ---- make-toy / plot ------------------------------------------------------------------

struct ToyCmdOptions {
  fs::path out;
  int examples = 200;
  std::uint64_t seed = 7;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ToyCmdOptions, out, examples, seed)

inline std::size_t run_make_toy(const ToyCmdOptions& opt, const std::vector<std::string>& argv = {}) {
  RunManifest m = start_manifest("make-toy", argv, opt);
  m.seed = opt.seed;
  ToyOptions t;
  t.examples = opt.examples;
  t.seed = opt.seed;
  auto paragraphs = make_toy_corpus(t);
  if (opt.out.has_parent_path()) fs::create_directories(opt.out.parent_path());
  write_file_atomic(opt.out, squad_document(paragraphs).dump(1) + "\n");
  m.outputs["squad"] = opt.out.string();
  write_manifest(m, opt.out);
  std::size_t n = 0;
  for (const auto& p : paragraphs) n += p.qas.size();
  return n;
}

struct PlotCmdOptions {
  std::vector<fs::path> logs;
  std::vector<std::string> metrics = {"kl_z", "kl_y"};
  fs::path report, out;
  std::string title;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PlotCmdOptions, logs, metrics, report, out, title)

/// Line chart of training-log metrics, or a bar chart of a report's numbers.
inline void run_plot(const PlotCmdOptions& opt, const std::vector<std::string>& argv = {}) {
  RunManifest m = start_manifest("plot", argv, opt);
  std::string svg;
  if (!opt.report.empty()) {
    std::ifstream in(opt.report);
    if (!in) throw InputError("cannot open " + opt.report.string());
    nlohmann::json r;
    try {
      in >> r;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(opt.report.string() + ": " + e.what());
    }
    std::vector<std::pair<std::string, double>> bars;
    std::function<void(const std::string&, const nlohmann::json&)> walk = [&](const std::string& prefix,
                                                                              const nlohmann::json& j) {
      for (const auto& [k, v] : j.items()) {
        std::string name = prefix.empty() ? k : prefix + "." + k;
        if (v.is_number()) bars.emplace_back(name, v.get<double>());
        else if (v.is_object()) walk(name, v);
      }
    };
    walk("", r);
    svg = svg_bar_chart(bars, opt.title.empty() ? opt.report.filename().string() : opt.title);
    m.inputs["report"] = opt.report.string();
  } else {
    if (opt.logs.empty()) throw InputError("plot: give --log or --report");
    std::map<std::string, Series> series;
    for (const auto& path : opt.logs) {
      std::ifstream in(path);
      if (!in) throw InputError("cannot open " + path.string());
      m.inputs["log:" + path.string()] = path.string();
      std::string line, tag = opt.logs.size() > 1 ? path.parent_path().filename().string() + ":" : "";
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw InputError(path.string() + ": not a JSON-lines training log");
        for (const auto& k : opt.metrics)
          if (j.contains(k)) series[tag + k].emplace_back(j.value("epoch", 0.0), j[k].get<double>());
      }
    }
    svg = svg_line_chart(series, opt.title.empty() ? "training log" : opt.title);
  }
  if (opt.out.has_parent_path()) fs::create_directories(opt.out.parent_path());
  write_file_atomic(opt.out, svg);
  m.outputs["svg"] = opt.out.string();
  write_manifest(m, opt.out);
}

}  // namespace vqag

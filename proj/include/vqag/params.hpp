#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vqag/autodiff.hpp"
#include "vqag/errors.hpp"

namespace vqag {

/// Architecture sizes. Defaults are the full-scale values; tests and toy runs
/// shrink them.
struct ModelConfig {
  int vocab_size = 0;
  int char_vocab_size = 0;
  int word_dim = 300;
  int char_dim = 32;
  int char_filters = 100;
  int char_window = 5;
  int word_len = 16;
  int hidden = 300;
  int latent = 200;
  int max_answer_len = 30;
  int max_question_len = 20;
  double logvar_clamp = 8.0;

  int embed_dim() const { return word_dim + char_filters; }
  int context_dim() const { return 2 * hidden; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, vocab_size, char_vocab_size, word_dim,
                                                char_dim, char_filters, char_window, word_len,
                                                hidden, latent, max_answer_len, max_question_len,
                                                logvar_clamp)

/// FNV-1a over the canonical JSON form of the config.
inline std::uint64_t config_hash(const ModelConfig& cfg) {
  std::string s = nlohmann::json(cfg).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Which half of the model a tensor belongs to: the generative network
/// (theta) or the inference network (phi).
enum class Role : std::uint8_t { generative = 0, inference = 1 };

struct NamedTensor {
  std::string name;
  Role role = Role::generative;
  Tensor tensor;
};

class ParameterStore {
 public:
  Tensor& add(const std::string& name, Eigen::Index rows, Eigen::Index cols, Role role,
              bool trainable = true) {
    if (index_.count(name)) throw ContractViolation("duplicate parameter " + name);
    NamedTensor nt;
    nt.name = name;
    nt.role = role;
    nt.tensor.value = Matrix::Zero(rows, cols);
    nt.tensor.grad = Matrix::Zero(rows, cols);
    nt.tensor.trainable = trainable;
    index_.emplace(name, entries_.size());
    entries_.push_back(std::move(nt));
    return entries_.back().tensor;
  }

  Tensor& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractViolation("unknown parameter " + name);
    return entries_[it->second].tensor;
  }
  const Tensor& at(const std::string& name) const {
    return const_cast<ParameterStore*>(this)->at(name);
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<NamedTensor>& entries() { return entries_; }
  const std::vector<NamedTensor>& entries() const { return entries_; }

  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }
  void set_version(std::uint64_t v) { version_ = v; }

  void zero_grad() {
    for (auto& e : entries_)
      if (e.tensor.trainable) e.tensor.grad.setZero(e.tensor.value.rows(), e.tensor.value.cols());
  }

  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
      if (e.tensor.trainable) n += static_cast<std::size_t>(e.tensor.value.size());
    return n;
  }

  double grad_norm() const {
    double s = 0.0;
    for (const auto& e : entries_)
      if (e.tensor.trainable) s += e.tensor.grad.squaredNorm();
    return std::sqrt(s);
  }

  /// Name of the first tensor holding a non-finite value or gradient.
  std::string first_non_finite() const {
    for (const auto& e : entries_) {
      if (!e.tensor.value.allFinite()) return e.name + " (value)";
      if (e.tensor.trainable && e.tensor.grad.size() && !e.tensor.grad.allFinite())
        return e.name + " (gradient)";
    }
    return {};
  }

 private:
  std::vector<NamedTensor> entries_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t version_ = 0;
};

/// Xavier/Glorot uniform initialisation.
inline void xavier_init(Tensor& t, std::mt19937_64& rng, int fan_in, int fan_out) {
  double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = u(rng);
}

// ---- checkpoint container --------------------------------------------------
//
// "VQAGCKPT" | u32 format version | u64 config hash | u64 parameter version |
// u32 json length | config json | u32 tensor count |
// per tensor: u32 name length | name | u8 role | u8 trainable | i64 rows |
// i64 cols | rows*cols f64 (column-major)

inline constexpr std::uint32_t kCheckpointFormat = 1;

namespace detail {
template <typename T>
void put(std::ostream& o, const T& v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InputError("truncated checkpoint while reading " + what);
  return v;
}
}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                            const ParameterStore& store) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream o(tmp, std::ios::binary);
    if (!o) throw InputError("cannot write " + tmp.string());
    o.write("VQAGCKPT", 8);
    detail::put(o, kCheckpointFormat);
    detail::put(o, config_hash(cfg));
    detail::put(o, store.version());
    std::string js = nlohmann::json(cfg).dump();
    detail::put(o, static_cast<std::uint32_t>(js.size()));
    o.write(js.data(), static_cast<std::streamsize>(js.size()));
    detail::put(o, static_cast<std::uint32_t>(store.entries().size()));
    for (const auto& e : store.entries()) {
      detail::put(o, static_cast<std::uint32_t>(e.name.size()));
      o.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      detail::put(o, static_cast<std::uint8_t>(e.role));
      detail::put(o, static_cast<std::uint8_t>(e.tensor.trainable ? 1 : 0));
      detail::put(o, static_cast<std::int64_t>(e.tensor.value.rows()));
      detail::put(o, static_cast<std::int64_t>(e.tensor.value.cols()));
      o.write(reinterpret_cast<const char*>(e.tensor.value.data()),
              static_cast<std::streamsize>(sizeof(double) * e.tensor.value.size()));
    }
    if (!o) throw InputError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct CheckpointHeader {
  ModelConfig config;
  std::uint64_t hash = 0;
  std::uint64_t version = 0;
};

inline CheckpointHeader read_checkpoint_header(std::istream& in, const std::string& origin) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "VQAGCKPT") throw InputError(origin + ": not a checkpoint");
  auto fmt = detail::get<std::uint32_t>(in, "format");
  if (fmt != kCheckpointFormat)
    throw InputError(origin + ": unsupported checkpoint format " + std::to_string(fmt));
  CheckpointHeader h;
  h.hash = detail::get<std::uint64_t>(in, "hash");
  h.version = detail::get<std::uint64_t>(in, "version");
  auto len = detail::get<std::uint32_t>(in, "config length");
  std::string js(len, '\0');
  in.read(js.data(), len);
  if (!in) throw InputError(origin + ": truncated config");
  h.config = nlohmann::json::parse(js).get<ModelConfig>();
  if (config_hash(h.config) != h.hash) throw InputError(origin + ": config hash mismatch");
  return h;
}

/// Fills `store`, which must already have the layout the stored config
/// implies; every name and shape is validated.
inline void read_checkpoint_tensors(std::istream& in, const std::string& origin,
                                    ParameterStore& store) {
  auto count = detail::get<std::uint32_t>(in, "tensor count");
  if (count != store.entries().size())
    throw InputError(origin + ": expected " + std::to_string(store.entries().size()) +
                     " tensors, found " + std::to_string(count));
  for (std::uint32_t i = 0; i < count; ++i) {
    auto nlen = detail::get<std::uint32_t>(in, "name length");
    std::string name(nlen, '\0');
    in.read(name.data(), nlen);
    detail::get<std::uint8_t>(in, "role");
    detail::get<std::uint8_t>(in, "trainable");
    auto rows = detail::get<std::int64_t>(in, "rows");
    auto cols = detail::get<std::int64_t>(in, "cols");
    if (!store.contains(name)) throw InputError(origin + ": unexpected tensor " + name);
    Tensor& t = store.at(name);
    if (t.value.rows() != rows || t.value.cols() != cols)
      throw InputError(origin + ": shape mismatch for " + name);
    in.read(reinterpret_cast<char*>(t.value.data()),
            static_cast<std::streamsize>(sizeof(double) * t.value.size()));
    if (!in) throw InputError(origin + ": truncated data for " + name);
  }
}

/// Hash of the full checkpoint bytes, recorded in run manifests.
inline std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace vqag

#include "pcred/nn.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>

#include "pcred/errors.h"

namespace pcred::nn {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'R', 'W'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "weights files are little-endian");

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw LoadError("truncated weights file");
  return value;
}

}  // namespace

Var ParameterStore::create(const std::string& name, Eigen::Index rows,
                           Eigen::Index cols, Init init, Rng& rng) {
  if (index_.count(name)) throw InternalError("duplicate parameter " + name);
  Matrix value(rows, cols);
  switch (init) {
    case Init::kNormal:
      for (Eigen::Index i = 0; i < value.size(); ++i) {
        value.data()[i] = init_std_ * rng.normal();
      }
      break;
    case Init::kZeros: value.setZero(); break;
    case Init::kOnes: value.setOnes(); break;
  }
  Var var = ag::leaf(std::move(value));
  index_[name] = params_.size();
  params_.push_back(Parameter{name, var, true});
  return var;
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InternalError("unknown parameter " + name);
  return params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InternalError("unknown parameter " + name);
  return params_[it->second];
}

void ParameterStore::set_trainable(const std::string& name, bool trainable) {
  get(name).trainable = trainable;
}

void ParameterStore::zero_grad() {
  for (Parameter& p : params_) p.var.zero_grad();
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.var.value().size();
  return n;
}

void ParameterStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write weights to " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(params_.size()));
  for (const Parameter& p : params_) {
    write_pod(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod(out, static_cast<std::uint64_t>(p.var.rows()));
    write_pod(out, static_cast<std::uint64_t>(p.var.cols()));
    out.write(reinterpret_cast<const char*>(p.var.value().data()),
              static_cast<std::streamsize>(p.var.value().size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing weights to " + path.string());
}

std::size_t ParameterStore::load(const std::filesystem::path& path,
                                 bool require_all) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open weights " + path.string());
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, 4) != std::string(kMagic, 4)) {
    throw LoadError(path.string() + " is not a weights file");
  }
  if (read_pod<std::uint32_t>(in) != kVersion) {
    throw LoadError("unsupported weights version in " + path.string());
  }
  const auto count = read_pod<std::uint64_t>(in);
  std::map<std::string, bool> loaded;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rows = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));
    const auto cols = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw LoadError("weights file has unknown tensor " + name);
    }
    Var& var = params_[it->second].var;
    if (var.rows() != rows || var.cols() != cols) {
      throw LoadError("shape mismatch for " + name + ": file " +
                      std::to_string(rows) + "x" + std::to_string(cols) +
                      ", model " + std::to_string(var.rows()) + "x" +
                      std::to_string(var.cols()));
    }
    in.read(reinterpret_cast<char*>(var.mutable_value().data()),
            static_cast<std::streamsize>(rows * cols * sizeof(double)));
    if (!in) throw LoadError("truncated weights file at " + name);
    loaded[name] = true;
  }
  if (require_all) {
    for (const Parameter& p : params_) {
      if (!loaded.count(p.name)) throw LoadError("weights file lacks " + p.name);
    }
  }
  return loaded.size();
}

RowVector key_bias(const std::vector<int>& attention_mask) {
  RowVector bias(attention_mask.size());
  for (std::size_t i = 0; i < attention_mask.size(); ++i) {
    bias(i) = attention_mask[i] ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  return bias;
}

Linear Linear::make(ParameterStore& store, const std::string& name,
                    Eigen::Index in, Eigen::Index out, Rng& rng,
                    bool with_bias) {
  Linear layer;
  layer.weight = store.create(name + ".weight", in, out, Init::kNormal, rng);
  if (with_bias) {
    layer.bias = store.create(name + ".bias", 1, out, Init::kZeros, rng);
  }
  return layer;
}

Var Linear::operator()(const Var& x) const {
  Var y = ag::matmul(x, weight);
  return bias.defined() ? ag::add_row(y, bias) : y;
}

LayerNorm LayerNorm::make(ParameterStore& store, const std::string& name,
                          Eigen::Index dim, double eps, Rng& rng) {
  LayerNorm ln;
  ln.gamma = store.create(name + ".weight", 1, dim, Init::kOnes, rng);
  ln.beta = store.create(name + ".bias", 1, dim, Init::kZeros, rng);
  ln.eps = eps;
  return ln;
}

Var LayerNorm::operator()(const Var& x) const {
  return ag::layer_norm_rows(x, gamma, beta, eps);
}

MultiHeadAttention MultiHeadAttention::make(ParameterStore& store,
                                            const std::string& prefix,
                                            const std::string& output_name,
                                            Eigen::Index dim, int heads,
                                            Rng& rng) {
  if (heads < 1 || dim % heads != 0) {
    throw ConfigError("hidden size " + std::to_string(dim) +
                      " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  MultiHeadAttention mha;
  mha.query = Linear::make(store, prefix + ".query", dim, dim, rng);
  mha.key = Linear::make(store, prefix + ".key", dim, dim, rng);
  mha.value = Linear::make(store, prefix + ".value", dim, dim, rng);
  mha.output = Linear::make(store, output_name, dim, dim, rng);
  mha.heads = heads;
  return mha;
}

Var MultiHeadAttention::operator()(const Var& queries, const Var& memory,
                                   const RowVector& bias,
                                   std::vector<AttentionRecord>* trace,
                                   const std::string& tag) const {
  const Eigen::Index dim = queries.cols();
  const Eigen::Index head_dim = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Var q = query(queries);
  Var k = key(memory);
  Var v = value(memory);
  std::vector<Var> outputs;
  AttentionRecord record{tag, {}};
  for (int h = 0; h < heads; ++h) {
    Var qh = ag::slice_cols(q, h * head_dim, head_dim);
    Var kh = ag::slice_cols(k, h * head_dim, head_dim);
    Var vh = ag::slice_cols(v, h * head_dim, head_dim);
    Var probs = ag::softmax_rows(ag::scale(ag::matmul_nt(qh, kh), inv_sqrt), bias);
    if (trace) record.heads.push_back(probs.value());
    outputs.push_back(ag::matmul(probs, vh));
  }
  if (trace) trace->push_back(std::move(record));
  Var merged = heads == 1 ? outputs[0] : ag::concat_cols(outputs);
  return output(merged);
}

}  // namespace pcred::nn

#ifndef PCRED_NN_H_
#define PCRED_NN_H_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pcred/autograd.h"
#include "pcred/rng.h"

namespace pcred::nn {

using ag::Matrix;
using ag::RowVector;
using ag::Var;

struct Parameter {
  std::string name;
  Var var;
  bool trainable = true;
};

enum class Init { kNormal, kZeros, kOnes };

// Owns every named parameter of a model in registration order.
class ParameterStore {
 public:
  explicit ParameterStore(double init_std = 0.02) : init_std_(init_std) {}

  Var create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
             Init init, Rng& rng);

  const std::vector<Parameter>& parameters() const { return params_; }
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  void set_trainable(const std::string& name, bool trainable);

  void zero_grad();
  std::size_t scalar_count() const;

  // Binary weights file: "PCRW" magic, u32 version, u64 count, then per
  // tensor u32 name length, name bytes, u64 rows, u64 cols, row-major f64.
  void save(const std::filesystem::path& path) const;
  // Loads values in place; every stored tensor must exist with the same
  // shape. With require_all, every parameter must also be present in the
  // file (LoadError otherwise). Returns the number of tensors read.
  std::size_t load(const std::filesystem::path& path, bool require_all = true);

 private:
  double init_std_;
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

// Additive key bias: 0 where attention_mask is 1, -inf elsewhere.
RowVector key_bias(const std::vector<int>& attention_mask);

// y = x W + b with W stored in x out.
struct Linear {
  Var weight;
  Var bias;  // undefined when built without bias

  static Linear make(ParameterStore& store, const std::string& name,
                     Eigen::Index in, Eigen::Index out, Rng& rng,
                     bool with_bias = true);
  Var operator()(const Var& x) const;
};

struct LayerNorm {
  Var gamma;
  Var beta;
  double eps = 1e-12;

  static LayerNorm make(ParameterStore& store, const std::string& name,
                        Eigen::Index dim, double eps, Rng& rng);
  Var operator()(const Var& x) const;
};

// Attention probabilities captured for diagnostics, one matrix per head.
struct AttentionRecord {
  std::string tag;
  std::vector<Matrix> heads;
};

struct MultiHeadAttention {
  Linear query, key, value, output;
  int heads = 1;

  static MultiHeadAttention make(ParameterStore& store,
                                 const std::string& prefix,
                                 const std::string& output_name,
                                 Eigen::Index dim, int heads, Rng& rng);

  // queries: n x d, memory: m x d, bias: 1 x m.
  Var operator()(const Var& queries, const Var& memory, const RowVector& bias,
                 std::vector<AttentionRecord>* trace = nullptr,
                 const std::string& tag = {}) const;
};

}  // namespace pcred::nn

#endif  // PCRED_NN_H_

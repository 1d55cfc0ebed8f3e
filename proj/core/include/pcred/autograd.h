#ifndef PCRED_AUTOGRAD_H_
#define PCRED_AUTOGRAD_H_

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pcred::ag {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

// One value in the computation graph. Parents are held by shared_ptr so the
// graph lives as long as its root; backward closures capture raw pointers.
struct Node {
  Matrix value;
  Matrix grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }
  bool defined() const { return static_cast<bool>(node_); }
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Var constant(Matrix value);
// Trainable leaf.
Var leaf(Matrix value);

// Reverse pass from a 1x1 root; gradients accumulate into leaves.
void backward(const Var& root);

// --- linear algebra ---
Var matmul(const Var& a, const Var& b);     // a * b
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var add_row(const Var& a, const Var& row);  // broadcast 1 x n over rows
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

// --- elementwise ---
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var gelu(const Var& a);  // exact erf form
Var log(const Var& a);
// Clamps into [lo, hi]; gradient is zero where clamping is active.
Var clamp(const Var& a, double lo, double hi);

// --- row-wise ---
// Softmax of each row after adding `bias` (1 x cols, entries 0 or -inf);
// masked entries come out exactly 0.
Var softmax_rows(const Var& a, const RowVector& bias);
Var log_softmax_rows(const Var& a, const RowVector& bias);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta,
                    double eps);

// --- shape ---
Var gather_rows(const Var& table, std::span<const int> ids);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);

// --- reductions ---
Var sum(const Var& a);
Var mean(const Var& a);
Var element(const Var& a, Eigen::Index row, Eigen::Index col);  // 1x1
Var add_all(std::span<const Var> scalars);                      // 1x1 sum

// score(j, p) = sum_k v(k) * gelu(a(j, k) + b(p, k)) + c
// a: n x d, b: m x d, v: 1 x d, c: 1 x 1 -> n x m.
Var pairwise_gelu_score(const Var& a, const Var& b, const Var& v,
                        const Var& c);

double gelu_value(double x);

}  // namespace pcred::ag

#endif  // PCRED_AUTOGRAD_H_

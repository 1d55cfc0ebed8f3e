#include "pcred/autograd.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_set>

#include "pcred/errors.h"

namespace pcred::ag {

namespace {

thread_local bool g_grad_enabled = true;

constexpr double kInvSqrt2 = 0.70710678118654752440;
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// Creates a node; the backward closure is kept only when some parent needs
// a gradient and recording is enabled.
Var make(Matrix value, std::vector<Var> parents,
         std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    for (const Var& p : parents) {
      if (p.requires_grad()) {
        node->requires_grad = true;
        break;
      }
    }
  }
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (const Var& p : parents) node->parents.push_back(p.shared());
    node->backward = std::move(backward_fn);
  }
  return Var(std::move(node));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InternalError(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var leaf(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) {
    throw InternalError("backward root must be a scalar");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() != 0) node->backward(*node);
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw InternalError("matmul: shape mismatch");
  Node* pa = a.node();
  Node* pb = b.node();
  return make(a.value() * b.value(), {a, b}, [pa, pb](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad * pb->value.transpose());
    if (pb->requires_grad) pb->accumulate(pa->value.transpose() * self.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw InternalError("matmul_nt: shape mismatch");
  Node* pa = a.node();
  Node* pb = b.node();
  return make(a.value() * b.value().transpose(), {a, b}, [pa, pb](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad * pb->value);
    if (pb->requires_grad) pb->accumulate(self.grad.transpose() * pa->value);
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Node* pa = a.node();
  Node* pb = b.node();
  return make(a.value() + b.value(), {a, b}, [pa, pb](Node& self) {
    pa->accumulate(self.grad);
    pb->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Node* pa = a.node();
  Node* pb = b.node();
  return make(a.value() - b.value(), {a, b}, [pa, pb](Node& self) {
    pa->accumulate(self.grad);
    pb->accumulate(-self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Node* pa = a.node();
  Node* pb = b.node();
  return make(a.value().cwiseProduct(b.value()), {a, b}, [pa, pb](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad.cwiseProduct(pb->value));
    if (pb->requires_grad) pb->accumulate(self.grad.cwiseProduct(pa->value));
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw InternalError("add_row: shape mismatch");
  }
  Node* pa = a.node();
  Node* pr = row.node();
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make(std::move(out), {a, row}, [pa, pr](Node& self) {
    pa->accumulate(self.grad);
    if (pr->requires_grad) pr->accumulate(self.grad.colwise().sum());
  });
}

Var scale(const Var& a, double s) {
  Node* pa = a.node();
  return make(a.value() * s, {a},
              [pa, s](Node& self) { pa->accumulate(self.grad * s); });
}

Var add_scalar(const Var& a, double s) {
  Node* pa = a.node();
  return make(a.value().array() + s, {a},
              [pa](Node& self) { pa->accumulate(self.grad); });
}

Var tanh(const Var& a) {
  Node* pa = a.node();
  Matrix out = a.value().array().tanh();
  return make(std::move(out), {a}, [pa](Node& self) {
    pa->accumulate(self.grad.cwiseProduct(
        (1.0 - self.value.array().square()).matrix()));
  });
}

Var sigmoid(const Var& a) {
  Node* pa = a.node();
  Matrix out = (1.0 + (-a.value().array()).exp()).inverse();
  return make(std::move(out), {a}, [pa](Node& self) {
    const auto& y = self.value.array();
    pa->accumulate((self.grad.array() * y * (1.0 - y)).matrix());
  });
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

Var gelu(const Var& a) {
  Node* pa = a.node();
  Matrix out = a.value().unaryExpr([](double x) { return gelu_value(x); });
  return make(std::move(out), {a}, [pa](Node& self) {
    pa->accumulate(self.grad.cwiseProduct(
        pa->value.unaryExpr([](double x) { return gelu_grad(x); })));
  });
}

Var log(const Var& a) {
  Node* pa = a.node();
  Matrix out = a.value().array().log();
  return make(std::move(out), {a}, [pa](Node& self) {
    pa->accumulate(self.grad.cwiseQuotient(pa->value));
  });
}

Var clamp(const Var& a, double lo, double hi) {
  Node* pa = a.node();
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return make(std::move(out), {a}, [pa, lo, hi](Node& self) {
    Matrix g = self.grad;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double x = pa->value.data()[i];
      if (x < lo || x > hi) g.data()[i] = 0.0;
    }
    pa->accumulate(g);
  });
}

namespace {

Matrix shifted(const Matrix& x, const RowVector& bias) {
  if (bias.size() != x.cols()) throw InternalError("softmax: bias mismatch");
  Matrix z = x;
  z.rowwise() += bias;
  return z;
}

// exp(z - max) per row. Eigen's vectorised exp clamps its argument, so masked
// (-inf) entries are zeroed explicitly.
Matrix shifted_exp(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    out.row(r) = (z.row(r).array() == -std::numeric_limits<double>::infinity())
                     .select(0.0, (z.row(r).array() - mx).exp())
                     .matrix();
  }
  return out;
}

Matrix softmax_of(const Matrix& z) {
  Matrix out = shifted_exp(z);
  for (Eigen::Index r = 0; r < z.rows(); ++r) out.row(r) /= out.row(r).sum();
  return out;
}

}  // namespace

Var softmax_rows(const Var& a, const RowVector& bias) {
  Node* pa = a.node();
  Matrix out = softmax_of(shifted(a.value(), bias));
  return make(std::move(out), {a}, [pa](Node& self) {
    const Matrix& y = self.value;
    Matrix gy = self.grad.cwiseProduct(y);
    Eigen::VectorXd dots = gy.rowwise().sum();
    Matrix g = gy - (y.array().colwise() * dots.array()).matrix();
    pa->accumulate(g);
  });
}

Var log_softmax_rows(const Var& a, const RowVector& bias) {
  Node* pa = a.node();
  Matrix z = shifted(a.value(), bias);
  const Matrix e = shifted_exp(z);
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double lse = z.row(r).maxCoeff() + std::log(e.row(r).sum());
    out.row(r) = z.row(r).array() - lse;
  }
  return make(std::move(out), {a}, [pa](Node& self) {
    const Matrix p =
        (self.value.array() == -std::numeric_limits<double>::infinity())
            .select(0.0, self.value.array().exp());
    Eigen::VectorXd sums = self.grad.rowwise().sum();
    Matrix g = self.grad - (p.array().colwise() * sums.array()).matrix();
    pa->accumulate(g);
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta,
                    double eps) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (gamma.cols() != d || beta.cols() != d) {
    throw InternalError("layer_norm: parameter shape mismatch");
  }
  auto normalized = std::make_shared<Matrix>(n, d);
  auto inv_std = std::make_shared<Eigen::VectorXd>(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = x.value().row(r).mean();
    const double var = (x.value().row(r).array() - mu).square().mean();
    (*inv_std)(r) = 1.0 / std::sqrt(var + eps);
    normalized->row(r) = (x.value().row(r).array() - mu) * (*inv_std)(r);
  }
  Matrix out = normalized->array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);

  Node* px = x.node();
  Node* pg = gamma.node();
  Node* pb = beta.node();
  return make(std::move(out), {x, gamma, beta},
              [px, pg, pb, normalized, inv_std](Node& self) {
                const Matrix& xh = *normalized;
                if (pg->requires_grad) {
                  pg->accumulate(
                      self.grad.cwiseProduct(xh).colwise().sum());
                }
                if (pb->requires_grad) {
                  pb->accumulate(self.grad.colwise().sum());
                }
                if (px->requires_grad) {
                  Matrix dxh =
                      self.grad.array().rowwise() * pg->value.row(0).array();
                  Matrix dx(xh.rows(), xh.cols());
                  for (Eigen::Index r = 0; r < xh.rows(); ++r) {
                    const double m1 = dxh.row(r).mean();
                    const double m2 = dxh.row(r).cwiseProduct(xh.row(r)).mean();
                    dx.row(r) = (dxh.row(r).array() - m1 -
                                 xh.row(r).array() * m2) *
                                (*inv_std)(r);
                  }
                  px->accumulate(dx);
                }
              });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
  std::vector<int> rows(ids.begin(), ids.end());
  Matrix out(static_cast<Eigen::Index>(rows.size()), table.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= table.rows()) {
      throw InputError("index " + std::to_string(rows[i]) +
                       " outside embedding table of " +
                       std::to_string(table.rows()) + " rows");
    }
    out.row(i) = table.value().row(rows[i]);
  }
  Node* pt = table.node();
  return make(std::move(out), {table}, [pt, rows](Node& self) {
    Matrix g = Matrix::Zero(pt->value.rows(), pt->value.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) g.row(rows[i]) += self.grad.row(i);
    pt->accumulate(g);
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || start + count > a.rows()) {
    throw InternalError("slice_rows out of range");
  }
  Node* pa = a.node();
  return make(a.value().middleRows(start, count), {a},
              [pa, start, count](Node& self) {
                Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
                g.middleRows(start, count) = self.grad;
                pa->accumulate(g);
              });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || start + count > a.cols()) {
    throw InternalError("slice_cols out of range");
  }
  Node* pa = a.node();
  return make(a.value().middleCols(start, count), {a},
              [pa, start, count](Node& self) {
                Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
                g.middleCols(start, count) = self.grad;
                pa->accumulate(g);
              });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw InternalError("concat_rows of nothing");
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != parts[0].cols()) throw InternalError("concat_rows: cols");
    rows += p.rows();
  }
  Matrix out(rows, parts[0].cols());
  std::vector<Node*> nodes;
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
    nodes.push_back(p.node());
  }
  return make(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
              [nodes](Node& self) {
                Eigen::Index off = 0;
                for (Node* n : nodes) {
                  if (n->requires_grad) {
                    n->accumulate(self.grad.middleRows(off, n->value.rows()));
                  }
                  off += n->value.rows();
                }
              });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw InternalError("concat_cols of nothing");
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != parts[0].rows()) throw InternalError("concat_cols: rows");
    cols += p.cols();
  }
  Matrix out(parts[0].rows(), cols);
  std::vector<Node*> nodes;
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
    nodes.push_back(p.node());
  }
  return make(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
              [nodes](Node& self) {
                Eigen::Index off = 0;
                for (Node* n : nodes) {
                  if (n->requires_grad) {
                    n->accumulate(self.grad.middleCols(off, n->value.cols()));
                  }
                  off += n->value.cols();
                }
              });
}

Var sum(const Var& a) {
  Node* pa = a.node();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make(std::move(out), {a}, [pa](Node& self) {
    pa->accumulate(Matrix::Constant(pa->value.rows(), pa->value.cols(),
                                    self.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var element(const Var& a, Eigen::Index row, Eigen::Index col) {
  if (row < 0 || row >= a.rows() || col < 0 || col >= a.cols()) {
    throw InternalError("element index out of range");
  }
  Node* pa = a.node();
  Matrix out(1, 1);
  out(0, 0) = a.value()(row, col);
  return make(std::move(out), {a}, [pa, row, col](Node& self) {
    Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
    g(row, col) = self.grad(0, 0);
    pa->accumulate(g);
  });
}

Var add_all(std::span<const Var> scalars) {
  Matrix out = Matrix::Zero(1, 1);
  std::vector<Node*> nodes;
  for (const Var& s : scalars) {
    if (s.rows() != 1 || s.cols() != 1) throw InternalError("add_all: scalar");
    out(0, 0) += s.scalar();
    nodes.push_back(s.node());
  }
  return make(std::move(out), std::vector<Var>(scalars.begin(), scalars.end()),
              [nodes](Node& self) {
                for (Node* n : nodes) n->accumulate(self.grad);
              });
}

Var pairwise_gelu_score(const Var& a, const Var& b, const Var& v,
                        const Var& c) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.rows();
  const Eigen::Index d = a.cols();
  if (b.cols() != d || v.rows() != 1 || v.cols() != d || c.value().size() != 1) {
    throw InternalError("pairwise_gelu_score: shape mismatch");
  }
  Matrix out(n, m);
  for (Eigen::Index j = 0; j < n; ++j) {
    Matrix z = b.value();
    z.rowwise() += a.value().row(j);
    Matrix act = z.unaryExpr([](double x) { return gelu_value(x); });
    out.row(j) = (act * v.value().row(0).transpose()).transpose();
  }
  out.array() += c.scalar();

  Node* pa = a.node();
  Node* pb = b.node();
  Node* pv = v.node();
  Node* pc = c.node();
  return make(std::move(out), {a, b, v, c}, [pa, pb, pv, pc](Node& self) {
    const Eigen::Index n = pa->value.rows();
    const Eigen::Index m = pb->value.rows();
    const Eigen::Index d = pa->value.cols();
    Matrix ga = Matrix::Zero(n, d);
    Matrix gb = Matrix::Zero(m, d);
    Matrix gv = Matrix::Zero(1, d);
    const auto vrow = pv->value.row(0).array();
    for (Eigen::Index j = 0; j < n; ++j) {
      Matrix z = pb->value;
      z.rowwise() += pa->value.row(j);
      const auto g = self.grad.row(j).transpose();  // m x 1
      if (pv->requires_grad) {
        Matrix act = z.unaryExpr([](double x) { return gelu_value(x); });
        gv += g.transpose() * act;
      }
      Matrix dz = z.unaryExpr([](double x) { return gelu_grad(x); });
      dz.array().rowwise() *= vrow;
      dz.array().colwise() *= g.array();
      ga.row(j) += dz.colwise().sum();
      gb += dz;
    }
    pa->accumulate(ga);
    pb->accumulate(gb);
    pv->accumulate(gv);
    pc->accumulate(Matrix::Constant(1, 1, self.grad.sum()));
  });
}

}  // namespace pcred::ag

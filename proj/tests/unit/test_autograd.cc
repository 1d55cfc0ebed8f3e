#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>

#include "pcred/autograd.h"
#include "pcred/errors.h"
#include "pcred/rng.h"

using namespace pcred;
using ag::Matrix;
using ag::Var;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0,
                     double hi = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = lo + (hi - lo) * rng.uniform();
  }
  return m;
}

// Reduces f's output with fixed random weights and compares analytic and
// central-difference gradients for every input.
double max_relative_error(const std::vector<Matrix>& inputs,
                          const std::function<Var(const std::vector<Var>&)>& f,
                          std::uint64_t seed = 1) {
  std::vector<Var> leaves;
  for (const auto& m : inputs) leaves.push_back(ag::leaf(m));
  const Var out = f(leaves);
  Rng rng(seed);
  const Matrix weights = random_matrix(rng, out.rows(), out.cols());
  auto scalar = [&](const std::vector<Var>& xs) {
    return ag::sum(ag::mul(f(xs), ag::constant(weights)));
  };
  ag::backward(scalar(leaves));

  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      auto eval = [&](double delta) {
        ag::NoGradGuard guard;
        std::vector<Var> xs;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          Matrix m = inputs[j];
          if (j == k) m.data()[i] += delta;
          xs.push_back(ag::constant(m));
        }
        return scalar(xs).scalar();
      };
      const double numeric = (eval(h) - eval(-h)) / (2 * h);
      const double analytic = leaves[k].grad().size() ? leaves[k].grad().data()[i] : 0.0;
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("elementwise and matrix op gradients") {
  Rng rng(7);
  const Matrix a = random_matrix(rng, 3, 4), b = random_matrix(rng, 4, 2);
  const Matrix c = random_matrix(rng, 3, 4), row = random_matrix(rng, 1, 4);
  CHECK(max_relative_error({a, b}, [](auto& x) { return ag::matmul(x[0], x[1]); }) < 1e-6);
  CHECK(max_relative_error({a, c}, [](auto& x) { return ag::matmul_nt(x[0], x[1]); }) < 1e-6);
  CHECK(max_relative_error({a, c}, [](auto& x) { return ag::add(x[0], x[1]); }) < 1e-6);
  CHECK(max_relative_error({a, c}, [](auto& x) { return ag::sub(x[0], x[1]); }) < 1e-6);
  CHECK(max_relative_error({a, c}, [](auto& x) { return ag::mul(x[0], x[1]); }) < 1e-6);
  CHECK(max_relative_error({a, row}, [](auto& x) { return ag::add_row(x[0], x[1]); }) < 1e-6);
  CHECK(max_relative_error({a}, [](auto& x) { return ag::scale(x[0], -2.5); }) < 1e-6);
  CHECK(max_relative_error({a}, [](auto& x) { return ag::add_scalar(x[0], 3.0); }) < 1e-6);
}

TEST_CASE("nonlinearity gradients") {
  Rng rng(8);
  const Matrix a = random_matrix(rng, 3, 5, -2.0, 2.0);
  const Matrix pos = random_matrix(rng, 3, 5, 0.1, 2.0);
  CHECK(max_relative_error({a}, [](auto& x) { return ag::tanh(x[0]); }) < 1e-6);
  CHECK(max_relative_error({a}, [](auto& x) { return ag::sigmoid(x[0]); }) < 1e-6);
  CHECK(max_relative_error({a}, [](auto& x) { return ag::gelu(x[0]); }) < 1e-6);
  CHECK(max_relative_error({pos}, [](auto& x) { return ag::log(x[0]); }) < 1e-6);
  CHECK(max_relative_error({pos}, [](auto& x) { return ag::clamp(x[0], 0.0, 5.0); }) < 1e-6);
}

TEST_CASE("softmax and normalisation gradients") {
  Rng rng(9);
  const Matrix a = random_matrix(rng, 3, 6, -2.0, 2.0);
  ag::RowVector bias = ag::RowVector::Zero(6);
  bias(4) = -std::numeric_limits<double>::infinity();
  CHECK(max_relative_error({a}, [&](auto& x) { return ag::softmax_rows(x[0], bias); }) < 1e-6);
  CHECK(max_relative_error({a}, [&](auto& x) { return ag::log_softmax_rows(x[0], bias); }) < 1e-6);
  const Matrix gamma = random_matrix(rng, 1, 6), beta = random_matrix(rng, 1, 6);
  CHECK(max_relative_error({a, gamma, beta}, [](auto& x) {
          return ag::layer_norm_rows(x[0], x[1], x[2], 1e-12);
        }) < 1e-5);
}

TEST_CASE("masked softmax puts no mass on masked positions") {
  Matrix a(1, 3);
  a << 1.0, 2.0, 3.0;
  ag::RowVector bias(3);
  bias << 0.0, -std::numeric_limits<double>::infinity(), 0.0;
  const Var p = ag::softmax_rows(ag::constant(a), bias);
  CHECK(p.value()(0, 1) == 0.0);
  CHECK(p.value().sum() == doctest::Approx(1.0));
  const Var lp = ag::log_softmax_rows(ag::constant(a), bias);
  CHECK(std::isinf(lp.value()(0, 1)));
}

TEST_CASE("structural op gradients") {
  Rng rng(10);
  const Matrix table = random_matrix(rng, 5, 3), a = random_matrix(rng, 4, 4);
  const std::vector<int> ids = {4, 0, 4, 2};
  CHECK(max_relative_error({table}, [&](auto& x) { return ag::gather_rows(x[0], ids); }) < 1e-6);
  CHECK(max_relative_error({a}, [](auto& x) { return ag::slice_rows(x[0], 1, 2); }) < 1e-6);
  CHECK(max_relative_error({a}, [](auto& x) { return ag::slice_cols(x[0], 2, 2); }) < 1e-6);
  CHECK(max_relative_error({a, table.leftCols(3).topRows(4).eval()}, [](auto& x) {
          std::vector<Var> parts = {x[0], x[1]};
          return ag::concat_cols(parts);
        }) < 1e-6);
  CHECK(max_relative_error({a, a}, [](auto& x) {
          std::vector<Var> parts = {x[0], x[1]};
          return ag::concat_rows(parts);
        }) < 1e-6);
  CHECK(max_relative_error({a}, [](auto& x) { return ag::mean(x[0]); }) < 1e-6);
  CHECK(max_relative_error({a}, [](auto& x) { return ag::element(x[0], 2, 1); }) < 1e-6);
  CHECK_THROWS_AS(ag::gather_rows(ag::constant(table), std::vector<int>{5}), InputError);
}

TEST_CASE("pairwise GELU score gradient and value") {
  Rng rng(11);
  const Matrix a = random_matrix(rng, 2, 3), b = random_matrix(rng, 4, 3);
  const Matrix v = random_matrix(rng, 1, 3), c = random_matrix(rng, 1, 1);
  CHECK(max_relative_error({a, b, v, c}, [](auto& x) {
          return ag::pairwise_gelu_score(x[0], x[1], x[2], x[3]);
        }) < 1e-6);
  const Var s = ag::pairwise_gelu_score(ag::constant(a), ag::constant(b),
                                        ag::constant(v), ag::constant(c));
  double expect = c(0, 0);
  for (int k = 0; k < 3; ++k) expect += v(0, k) * ag::gelu_value(a(1, k) + b(2, k));
  CHECK(s.value()(1, 2) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("no-grad guard records nothing") {
  const Var x = ag::leaf(Matrix::Ones(2, 2));
  {
    ag::NoGradGuard guard;
    CHECK_FALSE(ag::grad_enabled());
    const Var y = ag::sum(ag::mul(x, x));
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(ag::grad_enabled());
}

TEST_CASE("gradients accumulate across uses of a leaf") {
  const Var x = ag::leaf(Matrix::Constant(1, 1, 3.0));
  ag::backward(ag::add(ag::mul(x, x), x));  // d/dx (x^2 + x) = 7
  CHECK(x.grad()(0, 0) == doctest::Approx(7.0));
}

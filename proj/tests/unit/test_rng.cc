#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "pcred/rng.h"

using pcred::Rng;

TEST_CASE("same seed gives the same stream") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("below stays in range and hits every value") {
  Rng rng(5);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.below(7);
    REQUIRE(v < 7);
    ++hits[v];
  }
  for (int h : hits) CHECK(h > 800);
}

TEST_CASE("uniform lies in [0, 1) with mean near one half") {
  Rng rng(9);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("normal has roughly unit variance") {
  Rng rng(11);
  double s = 0.0, s2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.05);
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("shuffle is a deterministic permutation") {
  std::vector<int> a(20);
  std::iota(a.begin(), a.end(), 0);
  std::vector<int> b(a);
  Rng r1(3), r2(3);
  r1.shuffle(std::span(a));
  r2.shuffle(std::span(b));
  CHECK(a == b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(20);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(sorted == expect);
}

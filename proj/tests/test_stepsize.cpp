#include "test_util.hpp"

#include "vmpg/stepsize.hpp"

#include <doctest.h>

using namespace vmpg;
using testutil::vec;

namespace {

/// Brute force of  min ||diag(u) s - y||^2 + mu ||u - u_prev||^2  over a grid
/// of the box [lo, hi]^n (n = 2).
DenseVector gridSearchDbb(const DenseVector& s, const DenseVector& y,
                          const DenseVector& prev, double mu, double lo,
                          double hi, double h) {
  DenseVector best(2);
  double bestValue = std::numeric_limits<double>::infinity();
  const int steps = static_cast<int>(std::round((hi - lo) / h));
  for (int a = 0; a <= steps; ++a) {
    for (int b = 0; b <= steps; ++b) {
      const DenseVector u = vec({lo + a * h, lo + b * h});
      const double value =
          (u.cwiseProduct(s) - y).squaredNorm() + mu * (u - prev).squaredNorm();
      if (value < bestValue) {
        bestValue = value;
        best = u;
      }
    }
  }
  return best;
}

}  // namespace

TEST_SUITE("stepsize") {

TEST_CASE("bb1 examples") {
  CHECK(*bb1(StepPair(vec({1, 0}), vec({2, 0}))) == 0.5);
  CHECK(*bb1(StepPair(vec({1, 1}), vec({1, 3}))) == 2.0 / 4.0);
  CHECK_FALSE(bb1(StepPair(vec({1, 0}), vec({0, 1}))).has_value());
  CHECK_FALSE(bb1(StepPair(vec({0, 0}), vec({1, 1}))).has_value());
  CHECK_FALSE(bb1(StepPair(vec({1, 0}), vec({-1, 0}))).has_value());
}

TEST_CASE("bb2 examples") {
  CHECK(*bb2(StepPair(vec({1, 0}), vec({2, 0}))) == 0.5);
  CHECK(*bb2(StepPair(vec({1, 1}), vec({1, 3}))) == 4.0 / 10.0);
  CHECK_FALSE(bb2(StepPair(vec({1, 0}), vec({0, 1}))).has_value());
  CHECK_FALSE(bb2(StepPair(vec({1, 0}), vec({0, 0}))).has_value());
}

TEST_CASE("step pair dimensions must agree") {
  CHECK_THROWS_AS(StepPair(vec({1, 0}), vec({1})), ContractViolation);
}

TEST_CASE("hybrid rule case evaluation") {
  const BBConfig cfg;
  // 0.5 < 2 * 0.4: first branch
  CHECK(hybridBB(0.5, 0.4, cfg, 1.0) == 0.4);
  // 1.0 >= 0.8: second branch, 1.0 - 0.4 / 2
  CHECK(hybridBB(1.0, 0.4, cfg, 1.0) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(hybridBB(std::nullopt, std::nullopt, cfg, 0.7) == 0.7);
  CHECK(hybridBB(StepPair(vec({1, 0}), vec({0, 1})), cfg,
                 StepsizeState(0.7, DiagonalMetric::identity(2))) == 0.7);
}

TEST_CASE("hybrid result is clamped to the safeguard interval") {
  BBConfig cfg;
  cfg.alphaMin = 1e-3;
  cfg.alphaMax = 10.0;
  CHECK(hybridBB(100.0, 50.0, cfg, 1.0) == 10.0);
  CHECK(hybridBB(1e-6, 1e-6, cfg, 1.0) == 1e-3);
  CHECK(hybridBB(std::nullopt, std::nullopt, cfg, 50.0) == 10.0);
}

TEST_CASE("config validation") {
  BBConfig cfg;
  cfg.delta = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = BBConfig{};
  cfg.mu = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = BBConfig{};
  cfg.alphaMin = 2.0;
  cfg.alphaMax = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
}

TEST_CASE("diagonal BB hand example and grid oracle") {
  BBConfig cfg;
  cfg.mu = 1e-14;
  const DenseVector s = vec({1, 1}), y = vec({1, 3});
  const StepsizeState st(1.0, DiagonalMetric(vec({5, 0.3})));
  const MetricBounds bounds = diagonalBounds(StepPair(s, y), cfg);
  CHECK_FALSE(bounds.degenerate);
  CHECK(bounds.lower == doctest::Approx(1.0 / 0.5));
  CHECK(bounds.upper == doctest::Approx(1.0 / 0.4));
  const DiagonalMetric U = diagonalBB(StepPair(s, y), cfg, st);
  CHECK(U[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(U[1] == doctest::Approx(2.5).epsilon(1e-12));
  const DenseVector grid =
      gridSearchDbb(s, y, st.prevMetric.diag(), cfg.mu, 2.0, 2.5, 1e-3);
  CHECK(testutil::maxAbsDiff(grid, U.diag()) <= 1e-3);
}

TEST_CASE("diagonal BB reproduces identity when s = y") {
  BBConfig cfg;
  cfg.mu = 1e-14;
  const DenseVector s = vec({0.3, -2, 1.5});
  const DiagonalMetric U =
      diagonalBB(StepPair(s, s), cfg, StepsizeState(3));
  CHECK(testutil::maxAbsDiff(U.diag(), DenseVector::Ones(3)) <= 1e-12);
}

TEST_CASE("very large mu copies the previous metric into the bounds") {
  BBConfig cfg;
  cfg.mu = 1e12;
  const StepsizeState st(1.0, DiagonalMetric(vec({7, 7})));
  // bounds [2, 2.5]: 7 is clamped to the upper end
  const DiagonalMetric a =
      diagonalBB(StepPair(vec({1, 1}), vec({1, 3})), cfg, st);
  CHECK(a[0] == doctest::Approx(2.5));
  CHECK(a[1] == doctest::Approx(2.5));
  // bounds [7, 106/14]: 7 is inside
  const DiagonalMetric b =
      diagonalBB(StepPair(vec({1, 1}), vec({5, 9})), cfg, st);
  CHECK(b[0] == doctest::Approx(7.0).epsilon(1e-9));
  CHECK(b[1] == doctest::Approx(7.0).epsilon(1e-9));
}

TEST_CASE("degenerate curvature falls back to the global safeguard") {
  const BBConfig cfg;
  const MetricBounds bounds =
      diagonalBounds(StepPair(vec({1, 0}), vec({0, 1})), cfg);
  CHECK(bounds.degenerate);
  CHECK(bounds.lower == doctest::Approx(1.0 / cfg.alphaMax));
  CHECK(bounds.upper == doctest::Approx(1.0 / cfg.alphaMin));
}

TEST_CASE("prev metric dimension must match") {
  CHECK_THROWS_AS(diagonalBB(StepPair(vec({1, 0}), vec({1, 0})), BBConfig{},
                             StepsizeState(3)),
                  ContractViolation);
}

TEST_CASE("property: diagonal BB stays within the BB bounds") {
  Rng rng(21);
  const BBConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = rng.uniformIndex(1, 20);
    const DenseVector s = rng.normalVector(n);
    const DenseVector y = rng.normalVector(n);
    const StepsizeState st(1.0, testutil::randomMetric(rng, n, 1e-3, 1e3));
    const StepPair sp(s, y);
    const DiagonalMetric U = diagonalBB(sp, cfg, st);
    CHECK(U.diag().allFinite());
    CHECK(U.minEntry() > 0.0);
    const auto a1 = bb1(sp), a2 = bb2(sp);
    if (a1 && a2) {
      CHECK(U.minEntry() >= 1.0 / *a1 - 1e-12);
      CHECK(U.maxEntry() <= 1.0 / *a2 + 1e-12);
    }
  }
}

TEST_CASE("property: finite output for extreme inputs") {
  Rng rng(22);
  const BBConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = rng.uniformIndex(1, 8);
    DenseVector s = rng.normalVector(n), y = rng.normalVector(n);
    for (Index i = 0; i < n; ++i) {
      s[i] *= std::pow(10.0, rng.uniformIndex(-150, 150));
      y[i] *= std::pow(10.0, rng.uniformIndex(-150, 150));
      if (rng.uniform() < 0.2) s[i] = 0.0;
    }
    const DiagonalMetric U = diagonalBB(StepPair(s, y), cfg, StepsizeState(n));
    CHECK(U.diag().allFinite());
    CHECK(U.minEntry() > 0.0);
    const double alpha =
        hybridBB(StepPair(s, y), cfg, StepsizeState(n));
    CHECK(std::isfinite(alpha));
    CHECK(alpha >= cfg.alphaMin);
    CHECK(alpha <= cfg.alphaMax);
  }
}

TEST_CASE("property: BB values lie in [1/L, 1/m] on strongly convex quadratics") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = testutil::randomQuadratic(rng, rng.uniformIndex(2, 12));
    const DenseVector a = rng.normalVector(f->dim());
    const DenseVector b = rng.normalVector(f->dim());
    const StepPair sp(a - b, f->gradient(a) - f->gradient(b));
    const double a1 = *bb1(sp), a2 = *bb2(sp);
    CHECK(1.0 / *f->smoothness() - 1e-9 <= a2);
    CHECK(a2 <= a1 * (1 + 1e-12));
    CHECK(a1 <= 1.0 / *f->strongConvexity() + 1e-9);
  }
}

TEST_CASE("property: DBB secant residual beats hybrid when s and y are orthogonal") {
  Rng rng(24);
  BBConfig cfg;
  cfg.mu = 1e-10;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = rng.uniformIndex(2, 10);
    const DenseVector s = rng.normalVector(n);
    DenseVector y = rng.normalVector(n);
    y -= (y.dot(s) / s.squaredNorm()) * s;
    const StepsizeState st(0.1 + 10 * rng.uniform(), DiagonalMetric::identity(n));
    const StepPair sp(s, y);
    const DiagonalMetric U = diagonalBB(sp, cfg, st);
    const double alpha = hybridBB(sp, cfg, st);
    CHECK((U.apply(s) - y).norm() <= (s / alpha - y).norm());
  }
}

}

#pragma once

#include "vmpg/core.hpp"

#include <optional>

namespace vmpg {

/// Step s = x^k - x^{k-1} and gradient change y = grad f(x^k) - grad f(x^{k-1}).
struct StepPair {
  StepPair(DenseVector step, DenseVector gradChange);

  DenseVector s;
  DenseVector y;
};

struct BBConfig {
  double delta = 2.0;     ///< hybrid threshold, > 1
  double mu = 1e-6;       ///< pull towards the previous metric, > 0
  double alphaMin = 1e-10;
  double alphaMax = 1e10;

  void validate() const;
};

/// Carried between iterations by whoever sequences the stepsize calls.
struct StepsizeState {
  explicit StepsizeState(Index n) : prevMetric(DiagonalMetric::identity(n)) {}
  StepsizeState(double alpha, DiagonalMetric metric)
      : prevAlpha(alpha), prevMetric(std::move(metric)) {}

  double prevAlpha = 1.0;
  DiagonalMetric prevMetric;
};

/// ||s||^2 / <s, y>; nullopt when <s, y> <= 0.
std::optional<double> bb1(const StepPair& sp);
/// <s, y> / ||y||^2; nullopt when <s, y> <= 0.
std::optional<double> bb2(const StepPair& sp);

/// Hybrid choice between BB1 and BB2 with previous-step fallback. The result
/// always lies in [alphaMin, alphaMax].
double hybridBB(const StepPair& sp, const BBConfig& cfg,
                const StepsizeState& state);
/// Case evaluation of the hybrid rule on given BB values.
double hybridBB(std::optional<double> alphaBB1, std::optional<double> alphaBB2,
                const BBConfig& cfg, double prevAlpha);

/// Interval [lower, upper] that bounds every diagonal BB entry.
struct MetricBounds {
  double lower;
  double upper;
  bool degenerate;  ///< true when the global safeguard interval was used
};

MetricBounds diagonalBounds(const StepPair& sp, const BBConfig& cfg);

/// Diagonal Barzilai-Borwein metric.
///
/// Solves  min_u ||diag(u) s - y||^2 + mu ||diag(u) - U_prev||_F^2  subject to
/// lower <= u_i <= upper, which decouples per coordinate into
///   u_i = clamp((s_i y_i + mu u_prev_i) / (s_i^2 + mu), lower, upper).
DiagonalMetric diagonalBB(const StepPair& sp, const BBConfig& cfg,
                          const StepsizeState& state);

}  // namespace vmpg

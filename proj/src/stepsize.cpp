#include "vmpg/stepsize.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace vmpg {

StepPair::StepPair(DenseVector step, DenseVector gradChange)
    : s(std::move(step)), y(std::move(gradChange)) {
  requireSameSize(s.size(), y.size(), "StepPair");
  requireFinite(s, "StepPair step");
  requireFinite(y, "StepPair gradient change");
}

void BBConfig::validate() const {
  if (!(delta > 1.0)) throw ContractViolation("BBConfig: delta must be > 1");
  if (!(mu > 0.0)) throw ContractViolation("BBConfig: mu must be > 0");
  if (!(alphaMin > 0.0) || !(alphaMax > alphaMin) || !std::isfinite(alphaMax))
    throw ContractViolation("BBConfig: need 0 < alphaMin < alphaMax < inf");
}

std::optional<double> bb1(const StepPair& sp) {
  const double sy = sp.s.dot(sp.y);
  if (!(sy > 0.0)) return std::nullopt;
  const double a = sp.s.squaredNorm() / sy;
  if (!std::isfinite(a) || !(a > 0.0)) return std::nullopt;
  return a;
}

std::optional<double> bb2(const StepPair& sp) {
  const double sy = sp.s.dot(sp.y);
  if (!(sy > 0.0)) return std::nullopt;
  const double a = sy / sp.y.squaredNorm();
  if (!std::isfinite(a) || !(a > 0.0)) return std::nullopt;
  return a;
}

double hybridBB(std::optional<double> alphaBB1, std::optional<double> alphaBB2,
                const BBConfig& cfg, double prevAlpha) {
  double alpha = prevAlpha;
  if (alphaBB1 && alphaBB2) {
    const double candidate = (*alphaBB1 < cfg.delta * *alphaBB2)
                                 ? *alphaBB2
                                 : *alphaBB1 - *alphaBB2 / cfg.delta;
    if (candidate > 0.0 && std::isfinite(candidate)) alpha = candidate;
  }
  return std::clamp(alpha, cfg.alphaMin, cfg.alphaMax);
}

double hybridBB(const StepPair& sp, const BBConfig& cfg,
                const StepsizeState& state) {
  return hybridBB(bb1(sp), bb2(sp), cfg, state.prevAlpha);
}

MetricBounds diagonalBounds(const StepPair& sp, const BBConfig& cfg) {
  auto a1 = bb1(sp);
  auto a2 = bb2(sp);
  if (!a1 || !a2) {
    return {1.0 / cfg.alphaMax, 1.0 / cfg.alphaMin, true};
  }
  double longStep = std::clamp(*a1, cfg.alphaMin, cfg.alphaMax);
  double shortStep = std::clamp(*a2, cfg.alphaMin, cfg.alphaMax);
  // BB2 <= BB1 holds analytically; rounding can flip them by an ulp.
  if (longStep < shortStep) std::swap(longStep, shortStep);
  return {1.0 / longStep, 1.0 / shortStep, false};
}

DiagonalMetric diagonalBB(const StepPair& sp, const BBConfig& cfg,
                          const StepsizeState& state) {
  requireSameSize(sp.s.size(), state.prevMetric.size(), "diagonalBB");
  const MetricBounds bounds = diagonalBounds(sp, cfg);
  const DenseVector& prev = state.prevMetric.diag();
  DenseVector u(sp.s.size());
  for (Index i = 0; i < u.size(); ++i) {
    const double si = sp.s[i];
    double candidate = (si * sp.y[i] + cfg.mu * prev[i]) / (si * si + cfg.mu);
    if (std::isnan(candidate)) candidate = prev[i];
    u[i] = std::max(std::clamp(candidate, bounds.lower, bounds.upper),
                    DiagonalMetric::kMinEntry);
  }
  return DiagonalMetric(std::move(u));
}

}  // namespace vmpg

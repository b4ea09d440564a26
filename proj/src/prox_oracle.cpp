#include "vmpg/prox_oracle.hpp"

#include "vmpg/prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace vmpg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxExpansions = 200;
constexpr int kEdgeBisections = 200;
constexpr int kGoldenIterations = 400;

struct Probe {
  const std::function<double(double)>& h;
  double bestT;
  double bestValue;

  double operator()(double t) {
    const double value = h(t);
    if (value < bestValue) {
      bestValue = value;
      bestT = t;
    }
    return value;
  }
};

// Last finite point when walking from `inside` (finite) towards `outside`.
double domainEdge(Probe& probe, double inside, double outside) {
  for (int i = 0; i < kEdgeBisections; ++i) {
    const double mid = 0.5 * (inside + outside);
    if (mid == inside || mid == outside) break;
    if (std::isfinite(probe(mid))) {
      inside = mid;
    } else {
      outside = mid;
    }
  }
  return inside;
}

DenseVector oracleSimplex(const DenseVector& v, const DiagonalMetric& metric) {
  const Index n = v.size();
  if (n > 16) throw ContractViolation("simplex oracle: dimension above 16");
  const DenseVector& u = metric.diag();
  DenseVector best;
  double bestObjective = kInf;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    double sumV = 0.0;
    double sumInvU = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        sumV += v[i];
        sumInvU += 1.0 / u[i];
      }
    }
    const double nu = (sumV - 1.0) / sumInvU;
    DenseVector x = DenseVector::Zero(n);
    bool feasible = true;
    for (Index i = 0; i < n && feasible; ++i) {
      if (mask & (1u << i)) {
        x[i] = v[i] - nu / u[i];
        feasible = x[i] >= 0.0;
      }
    }
    if (!feasible) continue;
    const double objective = 0.5 * unormSquared(v - x, metric);
    if (objective < bestObjective) {
      bestObjective = objective;
      best = std::move(x);
    }
  }
  return best;
}

DenseVector oracleConsensus(const ConsensusIndicator& g, const DenseVector& v,
                            const DiagonalMetric& metric, double tol) {
  const Index n = g.sharedDim();
  DenseVector x = DenseVector::Zero(v.size());
  for (Index i = 0; i < n; ++i) {
    auto h = [&](double t) {
      DenseVector trial = x;
      for (int j = 0; j < g.nodes(); ++j) trial[j * n + i] = t;
      return proxObjective(g, v, metric, trial);
    };
    const double scale = 1.0 + v.cwiseAbs().maxCoeff();
    const double t = minimizeConvex1d(h, v[i], scale, tol);
    for (int j = 0; j < g.nodes(); ++j) x[j * n + i] = t;
  }
  return x;
}

DenseVector oracleSeparable(const ProxRegularizer& g, const DenseVector& v,
                            const DiagonalMetric& metric, double tol) {
  DenseVector base = DenseVector::Zero(v.size());
  if (!std::isfinite(g.value(base))) base = v;
  if (!std::isfinite(g.value(base))) {
    throw ContractViolation("prox oracle: no finite starting point for " +
                            g.name());
  }
  DenseVector x = base;
  for (Index i = 0; i < v.size(); ++i) {
    DenseVector trial = base;
    auto h = [&](double t) {
      trial[i] = t;
      const double gi = g.value(trial);
      const double r = v[i] - t;
      return gi + 0.5 * metric[i] * r * r;
    };
    const double scale = 1.0 + std::abs(v[i]) + std::abs(base[i]);
    x[i] = minimizeConvex1d(h, base[i], scale, tol);
  }
  return x;
}

DenseVector oracleGeneric(const ProxRegularizer& g, const DenseVector& v,
                          const DiagonalMetric& metric, double tol) {
  const Index n = v.size();
  DenseVector x = v;
  if (!std::isfinite(g.value(x))) {
    throw ContractViolation("prox oracle: unsupported extended-valued " +
                            g.name());
  }
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal;
  auto objective = [&](const DenseVector& z) {
    return proxObjective(g, v, metric, z);
  };
  auto lineSearch = [&](const DenseVector& direction) {
    auto h = [&](double t) { return objective(x + t * direction); };
    const double t = minimizeConvex1d(h, 0.0, 1.0 + x.norm(), tol);
    if (t != 0.0) x += t * direction;
  };

  double current = objective(x);
  int stalls = 0;
  constexpr int kMaxSweeps = 20000;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    for (Index i = 0; i < n; ++i) lineSearch(DenseVector::Unit(n, i));
    for (Index r = 0; r < n; ++r) {
      DenseVector d(n);
      for (Index i = 0; i < n; ++i) d[i] = normal(rng);
      lineSearch(d / d.norm());
    }
    const double next = objective(x);
    stalls = (current - next <= 1e-15 * (1.0 + std::abs(current))) ? stalls + 1
                                                                     : 0;
    current = next;
    if (stalls >= 3) return x;
  }
  std::ostringstream msg;
  msg << "prox oracle: no convergence for " << g.name() << " after "
      << kMaxSweeps << " sweeps";
  throw NumericalError(msg.str());
}

}  // namespace

double proxObjective(const ProxRegularizer& g, const DenseVector& v,
                     const DiagonalMetric& metric, const DenseVector& x) {
  const double gx = g.value(x);
  if (!std::isfinite(gx)) return kInf;
  return gx + 0.5 * unormSquared(v - x, metric);
}

double minimizeConvex1d(const std::function<double(double)>& h, double start,
                        double scale, double tol) {
  Probe probe{h, start, kInf};
  const double h0 = probe(start);
  if (!std::isfinite(h0)) {
    throw ContractViolation("minimizeConvex1d: start is outside the domain");
  }
  probe(0.0);

  // Expand outwards until the function stops decreasing on each side; the
  // minimizer of a convex function then lies in [left, right].
  auto expand = [&](double direction) {
    double prev = start;
    double prevValue = h0;
    double step = std::max(scale, 1e-300);
    for (int i = 0; i < kMaxExpansions; ++i) {
      const double t = prev + direction * step;
      const double value = probe(t);
      if (!(value < prevValue)) return t;
      prev = t;
      prevValue = value;
      step *= 2.0;
    }
    throw NumericalError("minimizeConvex1d: function unbounded below");
  };
  double left = expand(-1.0);
  double right = expand(1.0);

  // Shrink to the finite part of the bracket (the domain is an interval
  // containing the best point found so far).
  if (!std::isfinite(probe(left))) left = domainEdge(probe, probe.bestT, left);
  if (!std::isfinite(probe(right)))
    right = domainEdge(probe, probe.bestT, right);

  const double invPhi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = left;
  double b = right;
  double c = b - invPhi * (b - a);
  double d = a + invPhi * (b - a);
  double hc = probe(c);
  double hd = probe(d);
  for (int i = 0; i < kGoldenIterations; ++i) {
    if (b - a <= tol * (1.0 + std::abs(a) + std::abs(b))) break;
    if (hc <= hd) {
      b = d;
      d = c;
      hd = hc;
      c = b - invPhi * (b - a);
      hc = probe(c);
    } else {
      a = c;
      c = d;
      hc = hd;
      d = a + invPhi * (b - a);
      hd = probe(d);
    }
  }
  probe(0.5 * (a + b));
  return probe.bestT;
}

DenseVector numericProxOracle(const ProxRegularizer& g, const DenseVector& v,
                              const DiagonalMetric& metric, double tol) {
  requireSameSize(metric.size(), v.size(), "numericProxOracle");
  if (!(tol > 0.0)) throw ContractViolation("numericProxOracle: tol <= 0");
  if (dynamic_cast<const SimplexIndicator*>(&g)) {
    return oracleSimplex(v, metric);
  }
  if (auto* consensus = dynamic_cast<const ConsensusIndicator*>(&g)) {
    requireSameSize(consensus->nodes() * consensus->sharedDim(), v.size(),
                    "numericProxOracle consensus");
    return oracleConsensus(*consensus, v, metric, tol);
  }
  if (g.coordinateSeparable()) return oracleSeparable(g, v, metric, tol);
  return oracleGeneric(g, v, metric, tol);
}

}  // namespace vmpg

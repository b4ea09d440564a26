#pragma once

#include "vmpg/core.hpp"
#include "vmpg/problems.hpp"
#include "vmpg/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <memory>

namespace testutil {

using namespace vmpg;

inline DenseVector vec(std::initializer_list<double> values) {
  DenseVector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline DenseVector randomVector(Rng& rng, Index n, double scale = 1.0) {
  return scale * rng.normalVector(n);
}

/// Entries log-uniform in [lo, hi].
inline DiagonalMetric randomMetric(Rng& rng, Index n, double lo = 0.1,
                                   double hi = 10.0) {
  DenseVector u(n);
  for (Index i = 0; i < n; ++i)
    u[i] = lo * std::pow(hi / lo, rng.uniform());
  return DiagonalMetric(u);
}

inline double relErr(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

inline double maxAbsDiff(const DenseVector& a, const DenseVector& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

/// Random SPD quadratic whose m, L, minimizer and optimum come from Eigen's
/// dense eigen- and Cholesky solvers rather than from library code.
inline std::unique_ptr<QuadraticObjective> randomQuadratic(Rng& rng, Index n) {
  const DenseMatrix G = rng.normalMatrix(n, n);
  const double shift = 0.05 + rng.uniform();
  DenseMatrix Q = G * G.transpose() / static_cast<double>(n) +
                  shift * DenseMatrix::Identity(n, n);
  Q = 0.5 * (Q + Q.transpose()).eval();
  const DenseVector q = rng.normalVector(n);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(Q);
  QuadraticObjective::Known known;
  known.m = eig.eigenvalues().minCoeff();
  known.L = eig.eigenvalues().maxCoeff();
  const DenseVector xs = -Q.llt().solve(q);
  known.minimizer = xs;
  known.optimalValue = 0.5 * xs.dot(Q * xs) + q.dot(xs);
  return std::make_unique<QuadraticObjective>(Q, q, 0.0, known);
}

/// ||g_fd - g|| / max(||g||, 1e-8) with central differences.
inline double finiteDifferenceError(const SmoothObjective& f,
                                    const DenseVector& x) {
  const DenseVector g = f.gradient(x);
  DenseVector fd(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    DenseVector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    fd[i] = (f.value(xp) - f.value(xm)) / (2.0 * h);
  }
  return (fd - g).norm() / std::max(g.norm(), 1e-8);
}

}  // namespace testutil

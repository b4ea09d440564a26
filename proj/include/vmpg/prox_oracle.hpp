#pragma once

#include "vmpg/core.hpp"

#include <functional>

namespace vmpg {

/// g(x) + 1/2 ||v - x||_U^2.
double proxObjective(const ProxRegularizer& g, const DenseVector& v,
                     const DiagonalMetric& metric, const DenseVector& x);

/// Minimizes a convex, possibly extended-valued function of one variable.
/// `start` must be a point where the function is finite. The returned point
/// is the best one evaluated; it is exact whenever the minimizer is `start`
/// or zero.
double minimizeConvex1d(const std::function<double(double)>& h, double start,
                        double scale, double tol = 1e-13);

/// Reference solution of min_x g(x) + 1/2 ||v - x||_U^2 that never calls the
/// closed-form prox of g. Meant for verification on small problems (n <= 50).
///
///  - simplex indicator: exact enumeration of supports (n <= 16);
///  - consensus indicator: coordinatewise line search over the shared value;
///  - coordinate-separable g: one exact 1-D minimization per coordinate;
///  - any other finite-valued g: cyclic coordinate and random-direction line
///    searches until the objective stalls.
///
/// Throws ContractViolation for combinations it cannot handle and
/// NumericalError if the search does not settle within its sweep budget.
DenseVector numericProxOracle(const ProxRegularizer& g, const DenseVector& v,
                              const DiagonalMetric& metric, double tol = 1e-13);

}  // namespace vmpg

#include "vmpg/rng.hpp"

#include <cmath>
#include <numbers>

namespace vmpg {

double Rng::normal() {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return z;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

DenseVector Rng::normalVector(Index n) {
  DenseVector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

DenseMatrix Rng::normalMatrix(Index rows, Index cols) {
  // Row-major fill so the stream order does not depend on storage order.
  DenseMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal();
  return m;
}

DenseVector Rng::uniformVector(Index n, double lo, double hi) {
  DenseVector v(n);
  for (Index i = 0; i < n; ++i) v[i] = lo + (hi - lo) * uniform();
  return v;
}

Index Rng::uniformIndex(Index lo, Index hi) {
  if (hi < lo) throw ContractViolation("Rng::uniformIndex: empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t r = engine_();
  while (r >= limit) r = engine_();
  return lo + static_cast<Index>(r % span);
}

}  // namespace vmpg

#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vmpg {

using Index = Eigen::Index;
using DenseVector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

/// Raised when a caller breaks a documented precondition (dimension
/// mismatch, nonpositive metric entry, invalid parameter).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine cannot deliver its postcondition.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool allFinite(const DenseVector& v);
void requireFinite(const DenseVector& v, std::string_view what);
void requireSameSize(Index expected, Index actual, std::string_view what);

/// Positive definite diagonal metric U = diag(u).
///
/// Entries must be finite and at least kMinEntry. A nonpositive entry is a
/// contract violation, never clamped.
class DiagonalMetric {
 public:
  static constexpr double kMinEntry = 1e-300;

  explicit DiagonalMetric(DenseVector diag);

  static DiagonalMetric identity(Index n);
  static DiagonalMetric scalar(Index n, double u);

  Index size() const { return diag_.size(); }
  const DenseVector& diag() const { return diag_; }
  double operator[](Index i) const { return diag_[i]; }

  double minEntry() const { return diag_.minCoeff(); }
  double maxEntry() const { return diag_.maxCoeff(); }

  /// True when every entry equals the first one.
  bool isScalar() const;

  DenseVector apply(const DenseVector& z) const;
  DenseVector applyInverse(const DenseVector& z) const;
  DiagonalMetric inverse() const;
  DiagonalMetric scaled(double factor) const;

 private:
  DenseVector diag_;
};

/// sqrt(z' U z).
double unorm(const DenseVector& z, const DiagonalMetric& metric);
double unormSquared(const DenseVector& z, const DiagonalMetric& metric);

/// Entrywise z_i / u_i.
DenseVector applyInverse(const DiagonalMetric& metric, const DenseVector& z);

/// blkdiag(U_1, ..., U_N) with each block a DiagonalMetric.
class BlockDiagonalMetric {
 public:
  explicit BlockDiagonalMetric(std::vector<DiagonalMetric> blocks);

  /// Splits a diagonal metric into consecutive blocks of the given sizes.
  static BlockDiagonalMetric split(const DiagonalMetric& metric,
                                   std::span<const Index> blockSizes);

  std::size_t blockCount() const { return blocks_.size(); }
  Index size() const { return size_; }
  Index offset(std::size_t block) const { return offsets_.at(block); }
  const DiagonalMetric& block(std::size_t j) const { return blocks_.at(j); }
  const std::vector<DiagonalMetric>& blocks() const { return blocks_; }

  DiagonalMetric flatten() const;
  DenseVector apply(const DenseVector& z) const;
  DenseVector applyInverse(const DenseVector& z) const;
  BlockDiagonalMetric scaled(double factor) const;

 private:
  std::vector<DiagonalMetric> blocks_;
  std::vector<Index> offsets_;
  Index size_ = 0;
};

/// The smooth part f of F = f + g.
class SmoothObjective {
 public:
  virtual ~SmoothObjective() = default;

  virtual Index dim() const = 0;
  virtual double value(const DenseVector& x) const = 0;
  virtual DenseVector gradient(const DenseVector& x) const = 0;

  /// Strong convexity modulus m, when known.
  virtual std::optional<double> strongConvexity() const { return std::nullopt; }
  /// Lipschitz constant L of the gradient, when known.
  virtual std::optional<double> smoothness() const { return std::nullopt; }
  /// Unconstrained minimizer of f, when known.
  virtual std::optional<DenseVector> knownMinimizer() const {
    return std::nullopt;
  }
  virtual std::optional<double> knownOptimalValue() const {
    return std::nullopt;
  }
};

/// The (possibly nonsmooth, possibly extended-valued) part g of F = f + g.
///
/// prox(v, U) returns argmin_x g(x) + 1/2 ||v - x||_U^2. The public entry
/// points check dimensions and finiteness; implementations override doProx.
class ProxRegularizer {
 public:
  virtual ~ProxRegularizer() = default;

  /// g(x); +infinity outside the domain.
  virtual double value(const DenseVector& x) const = 0;
  virtual std::string name() const = 0;

  /// True when g(x) = sum_i g_i(x_i).
  virtual bool coordinateSeparable() const { return false; }
  /// Fixed dimension, or nullopt when any dimension is accepted.
  virtual std::optional<Index> fixedDim() const { return std::nullopt; }

  DenseVector prox(const DenseVector& v, const DiagonalMetric& metric) const;
  DenseVector prox(const DenseVector& v,
                   const BlockDiagonalMetric& metric) const;

 protected:
  virtual DenseVector doProx(const DenseVector& v,
                             const DiagonalMetric& metric) const = 0;
  virtual DenseVector doProxBlocks(const DenseVector& v,
                                   const BlockDiagonalMetric& metric) const {
    return doProx(v, metric.flatten());
  }
};

}  // namespace vmpg

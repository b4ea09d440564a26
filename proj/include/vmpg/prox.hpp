#pragma once

#include "vmpg/core.hpp"

#include <memory>
#include <vector>

namespace vmpg {

// Closed-form scaled proximal operators, prox_{g,U}(x) with U = diag(u).

/// g = lambda ||x||_1:  sign(x_i) (|x_i| - lambda/u_i)_+.
DenseVector proxLasso(const DenseVector& x, const DiagonalMetric& metric,
                      double lambda);

/// g = lambda sum_j ||x_j||_2 over consecutive groups. The metric must be
/// constant inside every group.
DenseVector proxGroupLasso(const DenseVector& x, const DiagonalMetric& metric,
                           double lambda, std::span<const Index> groupSizes);

/// g = lambda1 ||x||_1 + (lambda2/2) ||x||_2^2.
DenseVector proxElasticNet(const DenseVector& x, const DiagonalMetric& metric,
                           double lambda1, double lambda2);

/// Indicator of x >= 0.
DenseVector proxNonnegative(const DenseVector& x, const DiagonalMetric& metric);

struct SimplexProjection {
  DenseVector point;
  double multiplier = 0.0;  ///< nu with sum_i (x_i - nu/u_i)_+ = 1
  int iterations = 0;
};

inline constexpr double kSimplexTolerance = 1e-12;
inline constexpr int kSimplexMaxIterations = 200;

/// Indicator of {x >= 0, sum x = 1}. Bisection on nu over
/// [max_i u_i (x_i - 1), max_i u_i x_i], then an exact solve on the
/// identified support.
SimplexProjection projectSimplex(const DenseVector& x,
                                 const DiagonalMetric& metric,
                                 double tol = kSimplexTolerance,
                                 int maxIterations = kSimplexMaxIterations);
DenseVector proxSimplex(const DenseVector& x, const DiagonalMetric& metric,
                        double tol = kSimplexTolerance);

/// Indicator of x_1 = ... = x_N for the blocks of the metric. Every output
/// block equals (sum_j U_j)^{-1} (sum_j U_j x_j).
DenseVector proxConsensus(const DenseVector& x,
                          const BlockDiagonalMetric& metric);

/// Weighted consensus average z of equally sized blocks, summed in block order.
DenseVector consensusAverage(const DenseVector& x,
                             const BlockDiagonalMetric& metric);

// Regularizers.

class ZeroRegularizer final : public ProxRegularizer {
 public:
  double value(const DenseVector&) const override { return 0.0; }
  std::string name() const override { return "zero"; }
  bool coordinateSeparable() const override { return true; }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric&) const override {
    return v;
  }
};

class Lasso final : public ProxRegularizer {
 public:
  explicit Lasso(double lambda);
  double lambda() const { return lambda_; }
  double value(const DenseVector& x) const override;
  std::string name() const override { return "lasso"; }
  bool coordinateSeparable() const override { return true; }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric& metric) const override;

 private:
  double lambda_;
};

class GroupLasso final : public ProxRegularizer {
 public:
  GroupLasso(double lambda, std::vector<Index> groupSizes);
  double lambda() const { return lambda_; }
  const std::vector<Index>& groupSizes() const { return groups_; }
  double value(const DenseVector& x) const override;
  std::string name() const override { return "group_lasso"; }
  std::optional<Index> fixedDim() const override { return dim_; }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric& metric) const override;

 private:
  double lambda_;
  std::vector<Index> groups_;
  Index dim_ = 0;
};

class ElasticNet final : public ProxRegularizer {
 public:
  ElasticNet(double lambda1, double lambda2);
  double value(const DenseVector& x) const override;
  std::string name() const override { return "elastic_net"; }
  bool coordinateSeparable() const override { return true; }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric& metric) const override;

 private:
  double lambda1_;
  double lambda2_;
};

class NonnegativeIndicator final : public ProxRegularizer {
 public:
  double value(const DenseVector& x) const override;
  std::string name() const override { return "nonnegative"; }
  bool coordinateSeparable() const override { return true; }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric& metric) const override;
};

class SimplexIndicator final : public ProxRegularizer {
 public:
  explicit SimplexIndicator(double tol = kSimplexTolerance);
  double value(const DenseVector& x) const override;
  std::string name() const override { return "simplex"; }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric& metric) const override;

 private:
  double tol_;
};

/// Indicator of the consensus set over nNodes consecutive copies of R^n.
class ConsensusIndicator final : public ProxRegularizer {
 public:
  ConsensusIndicator(int nodes, Index sharedDim);
  int nodes() const { return nodes_; }
  Index sharedDim() const { return sharedDim_; }
  double value(const DenseVector& x) const override;
  std::string name() const override { return "consensus"; }
  std::optional<Index> fixedDim() const override {
    return nodes_ * sharedDim_;
  }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric& metric) const override;
  DenseVector doProxBlocks(const DenseVector& v,
                           const BlockDiagonalMetric& metric) const override;

 private:
  int nodes_;
  Index sharedDim_;
};

// Conjugates used by the Moreau decomposition check.

/// Indicator of |x_i| <= bound (conjugate of bound * ||x||_1).
class BoxIndicator final : public ProxRegularizer {
 public:
  explicit BoxIndicator(double bound);
  double value(const DenseVector& x) const override;
  std::string name() const override { return "box"; }
  bool coordinateSeparable() const override { return true; }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric& metric) const override;

 private:
  double bound_;
};

/// Indicator of x <= 0 (conjugate of the nonnegative indicator).
class NonpositiveIndicator final : public ProxRegularizer {
 public:
  double value(const DenseVector& x) const override;
  std::string name() const override { return "nonpositive"; }
  bool coordinateSeparable() const override { return true; }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric& metric) const override;
};

/// Indicator of {0} (conjugate of the zero function).
class ZeroPointIndicator final : public ProxRegularizer {
 public:
  double value(const DenseVector& x) const override;
  std::string name() const override { return "zero_point"; }
  bool coordinateSeparable() const override { return true; }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric& metric) const override;
};

/// Convex conjugate g* with a closed-form scaled prox. Supported for Lasso,
/// NonnegativeIndicator and ZeroRegularizer; throws ContractViolation
/// otherwise.
std::unique_ptr<ProxRegularizer> conjugateOf(const ProxRegularizer& g);

/// ||x - prox_{g,U}(x) - U^{-1} prox_{g*,U^{-1}}(U x)||_2.
double moreauResidual(const ProxRegularizer& g, const DiagonalMetric& metric,
                      const DenseVector& x);

// Proximal calculus.

/// f(x) = scale * phi(x) + offset, scale > 0:
/// prox_{f,U}(x) = prox_{phi,U/scale}(x).
class ScaledRegularizer final : public ProxRegularizer {
 public:
  ScaledRegularizer(std::shared_ptr<const ProxRegularizer> inner, double scale,
                    double offset = 0.0);
  double value(const DenseVector& x) const override;
  std::string name() const override { return "scaled(" + inner_->name() + ")"; }
  bool coordinateSeparable() const override {
    return inner_->coordinateSeparable();
  }
  std::optional<Index> fixedDim() const override { return inner_->fixedDim(); }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric& metric) const override;

 private:
  std::shared_ptr<const ProxRegularizer> inner_;
  double scale_;
  double offset_;
};

/// f(x) = phi(A x + b) with A = diag(a) nonsingular:
/// prox_{f,U}(x) = A^{-1}(prox_{phi, A^{-1} U A^{-1}}(A x + b) - b).
class DiagonalAffineComposition final : public ProxRegularizer {
 public:
  DiagonalAffineComposition(std::shared_ptr<const ProxRegularizer> inner,
                            DenseVector a, DenseVector b);
  double value(const DenseVector& x) const override;
  std::string name() const override {
    return "affine(" + inner_->name() + ")";
  }
  bool coordinateSeparable() const override {
    return inner_->coordinateSeparable();
  }
  std::optional<Index> fixedDim() const override { return a_.size(); }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric& metric) const override;

 private:
  std::shared_ptr<const ProxRegularizer> inner_;
  DenseVector a_;
  DenseVector b_;
};

/// f(x) = phi(x) + a'x + b:  prox_{f,U}(x) = prox_{phi,U}(x - U^{-1} a).
class AffineAddition final : public ProxRegularizer {
 public:
  AffineAddition(std::shared_ptr<const ProxRegularizer> inner, DenseVector a,
                 double b = 0.0);
  double value(const DenseVector& x) const override;
  std::string name() const override {
    return "linear(" + inner_->name() + ")";
  }
  bool coordinateSeparable() const override {
    return inner_->coordinateSeparable();
  }
  std::optional<Index> fixedDim() const override { return a_.size(); }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric& metric) const override;

 private:
  std::shared_ptr<const ProxRegularizer> inner_;
  DenseVector a_;
  double b_;
};

/// f(x) = phi(x) + 1/2 ||x - a||_V^2 with V diagonal:
/// prox_{f,U}(x) = prox_{phi,U+V}((U+V)^{-1}(U x + V a)).
class QuadraticRegularization final : public ProxRegularizer {
 public:
  QuadraticRegularization(std::shared_ptr<const ProxRegularizer> inner,
                          DiagonalMetric weight, DenseVector center);
  double value(const DenseVector& x) const override;
  std::string name() const override {
    return "quadratic(" + inner_->name() + ")";
  }
  bool coordinateSeparable() const override {
    return inner_->coordinateSeparable();
  }
  std::optional<Index> fixedDim() const override { return center_.size(); }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric& metric) const override;

 private:
  std::shared_ptr<const ProxRegularizer> inner_;
  DiagonalMetric weight_;
  DenseVector center_;
};

/// g(x) = sum_j g_j(x_j) over consecutive blocks; the prox is evaluated
/// block by block.
class SeparableSum final : public ProxRegularizer {
 public:
  struct Term {
    std::shared_ptr<const ProxRegularizer> g;
    Index size;
  };

  explicit SeparableSum(std::vector<Term> terms);
  double value(const DenseVector& x) const override;
  std::string name() const override { return "separable_sum"; }
  std::optional<Index> fixedDim() const override { return dim_; }
  const std::vector<Term>& terms() const { return terms_; }

 protected:
  DenseVector doProx(const DenseVector& v,
                     const DiagonalMetric& metric) const override;
  DenseVector doProxBlocks(const DenseVector& v,
                           const BlockDiagonalMetric& metric) const override;

 private:
  std::vector<Term> terms_;
  Index dim_ = 0;
};

}  // namespace vmpg

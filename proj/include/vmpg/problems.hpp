#pragma once

#include "vmpg/core.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace vmpg {

struct QPProblem {
  DenseMatrix Q;
  DenseVector q;
  double p = 0.0;
  double kappa = 1.0;
  std::uint64_t seed = 0;
  DenseVector eigenvalues;  ///< spectrum of Q, ascending
};

/// Q = H D H^T with H orthogonal (QR of a Gaussian matrix) and
/// d_i = kappa^{i/(n-1)}, so the spectrum spans [1, kappa] log-uniformly.
QPProblem generateQP(Index n, double kappa, std::uint64_t seed);

/// 1/2 x^T Q x + q^T x + p.
class QuadraticObjective final : public SmoothObjective {
 public:
  struct Known {
    std::optional<double> m;
    std::optional<double> L;
    std::optional<DenseVector> minimizer;
    std::optional<double> optimalValue;
  };

  QuadraticObjective(DenseMatrix Q, DenseVector q, double p = 0.0,
                     Known known = {});

  Index dim() const override { return q_.size(); }
  double value(const DenseVector& x) const override;
  DenseVector gradient(const DenseVector& x) const override;
  std::optional<double> strongConvexity() const override { return known_.m; }
  std::optional<double> smoothness() const override { return known_.L; }
  std::optional<DenseVector> knownMinimizer() const override {
    return known_.minimizer;
  }
  std::optional<double> knownOptimalValue() const override {
    return known_.optimalValue;
  }

  const DenseMatrix& Q() const { return Q_; }
  const DenseVector& q() const { return q_; }

 private:
  DenseMatrix Q_;
  DenseVector q_;
  double p_;
  Known known_;
};

enum class Loss { LeastSquares, Logistic };

std::string_view toString(Loss loss);
std::optional<Loss> parseLoss(std::string_view text);

/// Regularization weight used in the experiments: 1e-2 for least squares,
/// 1e-4 for logistic regression.
double defaultLambda(Loss loss);

struct RegressionProblem {
  DenseMatrix A;  ///< N x n
  DenseVector b;
  Loss loss = Loss::LeastSquares;
  double lambda = 0.0;
  std::optional<DenseVector> xStar;
  std::uint64_t seed = 0;
  std::vector<bool> zeroVarianceColumns;  ///< left unnormalized

  Index samples() const { return A.rows(); }
  Index features() const { return A.cols(); }
};

struct RegressionOptions {
  double noiseScale = 0.2;
  bool precondition = true;
  std::optional<double> lambda;  ///< defaultLambda(loss) when unset
};

/// Features a ~ N(0, Sigma) with Sigma = G G^T + 0.1 I normalized to unit
/// largest eigenvalue; x* ~ N(0, I).
///  least squares: b = a^T x* + noise * N(0, 1)
///  logistic:      y = 1/(1 + exp(-a^T x*)) + noise * U(0, 1), b = sign(y - 0.5)
/// The design matrix is centered and column-normalized afterwards unless
/// options.precondition is false.
RegressionProblem generateRegression(Index N, Index n, Loss loss,
                                     std::uint64_t seed,
                                     const RegressionOptions& options = {});

/// Centers each column and scales it to unit l2 norm. Columns that are
/// constant (up to rounding) become exactly zero and are flagged.
std::vector<bool> preconditionColumns(DenseMatrix& A);

/// scale * sum_i l(x; a_i, b_i) + l2 * ||x||^2 with
///  l = (a^T x - b)^2 or log(1 + exp(-b a^T x)).
class RegressionObjective final : public SmoothObjective {
 public:
  RegressionObjective(DenseMatrix A, DenseVector b, Loss loss, double scale,
                      double l2 = 0.0);

  Index dim() const override { return A_.cols(); }
  double value(const DenseVector& x) const override;
  DenseVector gradient(const DenseVector& x) const override;
  std::optional<double> smoothness() const override { return smoothness_; }

  const DenseMatrix& A() const { return A_; }
  const DenseVector& b() const { return b_; }
  Loss loss() const { return loss_; }
  double scale() const { return scale_; }
  double l2() const { return l2_; }

 private:
  DenseMatrix A_;
  DenseVector b_;
  Loss loss_;
  double scale_;
  double l2_;
  std::optional<double> smoothness_;
};

/// Largest singular value squared, by power iteration on A^T A.
double spectralNormSquared(const DenseMatrix& A, double tol = 1e-12,
                           int maxIter = 10000);

/// The smooth part of the benchmark objective. QPs expose m and L from the
/// generated spectrum; least squares exposes L = (2/N) ||A||_2^2.
std::unique_ptr<QuadraticObjective> smoothPart(const QPProblem& problem);
std::unique_ptr<RegressionObjective> smoothPart(
    const RegressionProblem& problem);

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a numeric CSV (optional header row) into a regression problem and
/// preconditions it. labelColumn is 0-based. Lines starting with '#' are
/// comments. A header is recognised only as
/// the first non-blank line, and only if some cell in it is not a number.
RegressionProblem loadCsv(const std::filesystem::path& path,
                          Index labelColumn, Loss loss,
                          std::optional<double> lambda = std::nullopt,
                          bool precondition = true);

}  // namespace vmpg

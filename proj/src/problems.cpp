#include "vmpg/problems.hpp"

#include "vmpg/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace vmpg {
namespace {

// log(1 + exp(t)) without overflow.
double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

// 1 / (1 + exp(-t)) without overflow.
double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> splitCells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::optional<double> parseNumber(std::string_view cell) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [end, ec] =
      std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || end != cell.data() + cell.size() || cell.empty())
    return std::nullopt;
  return value;
}

}  // namespace

QPProblem generateQP(Index n, double kappa, std::uint64_t seed) {
  if (n < 2) throw ContractViolation("generateQP: n must be >= 2");
  if (!(kappa >= 1.0) || !std::isfinite(kappa))
    throw ContractViolation("generateQP: kappa must be finite and >= 1");
  Rng rng(seed);
  const DenseMatrix G = rng.normalMatrix(n, n);
  Eigen::HouseholderQR<DenseMatrix> qr(G);
  DenseMatrix H = qr.householderQ();
  // Fix column signs so H is a deterministic function of G.
  const DenseMatrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    if (R(j, j) < 0.0) H.col(j) = -H.col(j);
  }

  DenseVector d(n);
  for (Index i = 0; i < n; ++i) {
    d[i] = std::pow(kappa, static_cast<double>(i) / static_cast<double>(n - 1));
  }
  d[0] = 1.0;
  d[n - 1] = kappa;

  QPProblem problem;
  problem.Q = H * d.asDiagonal() * H.transpose();
  problem.Q = 0.5 * (problem.Q + problem.Q.transpose()).eval();
  problem.q = rng.normalVector(n);
  problem.p = 0.0;
  problem.kappa = kappa;
  problem.seed = seed;
  problem.eigenvalues = std::move(d);
  return problem;
}

QuadraticObjective::QuadraticObjective(DenseMatrix Q, DenseVector q, double p,
                                       Known known)
    : Q_(std::move(Q)), q_(std::move(q)), p_(p), known_(std::move(known)) {
  if (Q_.rows() != Q_.cols() || Q_.rows() != q_.size())
    throw ContractViolation("QuadraticObjective: Q must be n x n, q length n");
  requireFinite(q_, "QuadraticObjective q");
  if (!Q_.allFinite())
    throw NumericalError("QuadraticObjective: Q has non-finite entries");
}

double QuadraticObjective::value(const DenseVector& x) const {
  requireSameSize(dim(), x.size(), "QuadraticObjective::value");
  return 0.5 * x.dot(Q_ * x) + q_.dot(x) + p_;
}

DenseVector QuadraticObjective::gradient(const DenseVector& x) const {
  requireSameSize(dim(), x.size(), "QuadraticObjective::gradient");
  return Q_ * x + q_;
}

std::string_view toString(Loss loss) {
  return loss == Loss::LeastSquares ? "ls" : "lr";
}

std::optional<Loss> parseLoss(std::string_view text) {
  if (text == "ls") return Loss::LeastSquares;
  if (text == "lr") return Loss::Logistic;
  return std::nullopt;
}

double defaultLambda(Loss loss) {
  return loss == Loss::LeastSquares ? 1e-2 : 1e-4;
}

std::vector<bool> preconditionColumns(DenseMatrix& A) {
  std::vector<bool> zeroVariance(static_cast<std::size_t>(A.cols()), false);
  if (A.rows() == 0) return zeroVariance;
  for (Index j = 0; j < A.cols(); ++j) {
    auto col = A.col(j);
    const double scaleBefore = col.norm();
    col.array() -= col.mean();
    const double norm = col.norm();
    if (norm <= 1e-12 * scaleBefore || norm == 0.0) {
      col.setZero();
      zeroVariance[static_cast<std::size_t>(j)] = true;
    } else {
      col /= norm;
    }
  }
  return zeroVariance;
}

RegressionProblem generateRegression(Index N, Index n, Loss loss,
                                     std::uint64_t seed,
                                     const RegressionOptions& options) {
  if (N < 1 || n < 1)
    throw ContractViolation("generateRegression: N and n must be >= 1");
  if (!(options.noiseScale >= 0.0))
    throw ContractViolation("generateRegression: noiseScale must be >= 0");
  Rng rng(seed);

  const DenseMatrix G = rng.normalMatrix(n, n);
  DenseMatrix sigma = G * G.transpose();
  sigma.diagonal().array() += 0.1;
  sigma /= spectralNormSquared(G.transpose()) + 0.1;
  const Eigen::LLT<DenseMatrix> chol(sigma);
  if (chol.info() != Eigen::Success)
    throw NumericalError("generateRegression: covariance not positive definite");

  RegressionProblem problem;
  problem.loss = loss;
  problem.seed = seed;
  problem.lambda = options.lambda.value_or(defaultLambda(loss));
  problem.xStar = rng.normalVector(n);
  // Rows a_i = L z_i with z_i ~ N(0, I), i.e. A = Z L^T.
  problem.A = rng.normalMatrix(N, n) * chol.matrixL().transpose();

  const DenseVector margins = problem.A * *problem.xStar;
  problem.b.resize(N);
  for (Index i = 0; i < N; ++i) {
    if (loss == Loss::LeastSquares) {
      problem.b[i] = margins[i] + options.noiseScale * rng.normal();
    } else {
      const double y = sigmoid(margins[i]) + options.noiseScale * rng.uniform();
      problem.b[i] = y >= 0.5 ? 1.0 : -1.0;
    }
  }

  if (options.precondition) {
    problem.zeroVarianceColumns = preconditionColumns(problem.A);
  } else {
    problem.zeroVarianceColumns.assign(static_cast<std::size_t>(n), false);
  }
  return problem;
}

double spectralNormSquared(const DenseMatrix& A, double tol, int maxIter) {
  if (A.cols() == 0 || A.rows() == 0) return 0.0;
  Rng rng(0x2545f4914f6cdd1dULL);
  DenseVector v = rng.normalVector(A.cols());
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < maxIter; ++it) {
    DenseVector w = A.transpose() * (A * v);
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (std::abs(next - estimate) <= tol * std::abs(next)) return next;
    estimate = next;
  }
  return estimate;
}

RegressionObjective::RegressionObjective(DenseMatrix A, DenseVector b,
                                         Loss loss, double scale, double l2)
    : A_(std::move(A)), b_(std::move(b)), loss_(loss), scale_(scale), l2_(l2) {
  if (A_.rows() != b_.size())
    throw ContractViolation("RegressionObjective: A rows must match b");
  if (!(scale_ >= 0.0) || !(l2_ >= 0.0))
    throw ContractViolation("RegressionObjective: scale and l2 must be >= 0");
  requireFinite(b_, "RegressionObjective labels");
  if (!A_.allFinite())
    throw NumericalError("RegressionObjective: A has non-finite entries");
  if (loss_ == Loss::LeastSquares) {
    smoothness_ = 2.0 * scale_ * spectralNormSquared(A_) + 2.0 * l2_;
  }
}

double RegressionObjective::value(const DenseVector& x) const {
  requireSameSize(dim(), x.size(), "RegressionObjective::value");
  const DenseVector z = A_ * x;
  double sum = 0.0;
  if (loss_ == Loss::LeastSquares) {
    sum = (z - b_).squaredNorm();
  } else {
    for (Index i = 0; i < z.size(); ++i) sum += softplus(-b_[i] * z[i]);
  }
  return scale_ * sum + l2_ * x.squaredNorm();
}

DenseVector RegressionObjective::gradient(const DenseVector& x) const {
  requireSameSize(dim(), x.size(), "RegressionObjective::gradient");
  const DenseVector z = A_ * x;
  DenseVector weights(z.size());
  if (loss_ == Loss::LeastSquares) {
    weights = 2.0 * (z - b_);
  } else {
    for (Index i = 0; i < z.size(); ++i)
      weights[i] = -b_[i] * sigmoid(-b_[i] * z[i]);
  }
  return scale_ * (A_.transpose() * weights) + 2.0 * l2_ * x;
}

std::unique_ptr<QuadraticObjective> smoothPart(const QPProblem& problem) {
  QuadraticObjective::Known known;
  if (problem.eigenvalues.size() == problem.q.size()) {
    known.m = problem.eigenvalues.minCoeff();
    known.L = problem.eigenvalues.maxCoeff();
  }
  return std::make_unique<QuadraticObjective>(problem.Q, problem.q, problem.p,
                                              known);
}

std::unique_ptr<RegressionObjective> smoothPart(
    const RegressionProblem& problem) {
  const double N = static_cast<double>(problem.samples());
  return std::make_unique<RegressionObjective>(problem.A, problem.b,
                                               problem.loss, 1.0 / N);
}

RegressionProblem loadCsv(const std::filesystem::path& path,
                          Index labelColumn, Loss loss,
                          std::optional<double> lambda, bool precondition) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open " + path.string());

  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::string line;
  int lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    const auto cells = splitCells(line);
    std::vector<std::optional<double>> parsed;
    parsed.reserve(cells.size());
    for (auto cell : cells) parsed.push_back(parseNumber(cell));
    const auto bad = std::find(parsed.begin(), parsed.end(), std::nullopt);
    if (bad != parsed.end()) {
      if (rows.empty() && width == 0) {
        width = cells.size();  // header row
        continue;
      }
      const auto c = static_cast<std::size_t>(bad - parsed.begin());
      std::ostringstream msg;
      msg << path.string() << ": row " << lineNo << ", column " << c + 1
          << ": '" << cells[c] << "' is not a number";
      throw CsvError(msg.str());
    }
    std::vector<double> values;
    values.reserve(parsed.size());
    for (std::size_t c = 0; c < parsed.size(); ++c) {
      if (!std::isfinite(*parsed[c])) {
        std::ostringstream msg;
        msg << path.string() << ": row " << lineNo << ", column " << c + 1
            << ": non-finite value '" << cells[c] << "'";
        throw CsvError(msg.str());
      }
      values.push_back(*parsed[c]);
    }
    if (width == 0) width = values.size();
    if (values.size() != width) {
      std::ostringstream msg;
      msg << path.string() << ": row " << lineNo << " has " << values.size()
          << " columns, expected " << width;
      throw CsvError(msg.str());
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw CsvError(path.string() + ": no data rows");
  if (labelColumn < 0 || static_cast<std::size_t>(labelColumn) >= width) {
    throw ContractViolation("loadCsv: label column out of range");
  }
  if (width < 2) throw CsvError(path.string() + ": need at least 2 columns");

  const auto N = static_cast<Index>(rows.size());
  const auto n = static_cast<Index>(width) - 1;
  RegressionProblem problem;
  problem.loss = loss;
  problem.lambda = lambda.value_or(defaultLambda(loss));
  problem.A.resize(N, n);
  problem.b.resize(N);
  for (Index i = 0; i < N; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    Index col = 0;
    for (Index c = 0; c < static_cast<Index>(width); ++c) {
      const double value = row[static_cast<std::size_t>(c)];
      if (c == labelColumn) {
        problem.b[i] = value;
      } else {
        problem.A(i, col++) = value;
      }
    }
  }
  if (precondition) {
    problem.zeroVarianceColumns = preconditionColumns(problem.A);
  } else {
    problem.zeroVarianceColumns.assign(static_cast<std::size_t>(n), false);
  }
  return problem;
}

}  // namespace vmpg

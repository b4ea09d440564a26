#include "vmpg/prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace vmpg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void requirePositive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << what << " must be a finite positive number, got " << value;
    throw ContractViolation(msg.str());
  }
}

double softThreshold(double x, double threshold) {
  const double shrunk = std::abs(x) - threshold;
  return shrunk > 0.0 ? std::copysign(shrunk, x) : 0.0;
}

Index checkedPartition(std::span<const Index> sizes, const char* what) {
  if (sizes.empty()) throw ContractViolation(std::string(what) + ": no blocks");
  Index total = 0;
  for (Index s : sizes) {
    if (s <= 0) throw ContractViolation(std::string(what) + ": empty block");
    total += s;
  }
  return total;
}

}  // namespace

DenseVector proxLasso(const DenseVector& x, const DiagonalMetric& metric,
                      double lambda) {
  requirePositive(lambda, "lasso lambda");
  requireSameSize(metric.size(), x.size(), "proxLasso");
  DenseVector out(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    out[i] = softThreshold(x[i], lambda / metric[i]);
  }
  return out;
}

DenseVector proxGroupLasso(const DenseVector& x, const DiagonalMetric& metric,
                           double lambda, std::span<const Index> groupSizes) {
  requirePositive(lambda, "group lasso lambda");
  requireSameSize(checkedPartition(groupSizes, "proxGroupLasso"), x.size(),
                  "proxGroupLasso");
  requireSameSize(metric.size(), x.size(), "proxGroupLasso");
  DenseVector out(x.size());
  Index offset = 0;
  for (std::size_t j = 0; j < groupSizes.size(); ++j) {
    const Index n = groupSizes[j];
    const double u = metric[offset];
    for (Index i = offset + 1; i < offset + n; ++i) {
      if (std::abs(metric[i] - u) > 1e-12 * u) {
        std::ostringstream msg;
        msg << "proxGroupLasso: metric is not constant inside group " << j
            << " (u[" << offset << "] = " << u << ", u[" << i
            << "] = " << metric[i] << ")";
        throw ContractViolation(msg.str());
      }
    }
    const auto block = x.segment(offset, n);
    const double norm = block.norm();
    // A zero group stays at zero: the shrink factor is taken as 0.
    const double factor = norm > 0.0 ? std::max(0.0, 1.0 - lambda / (u * norm))
                                     : 0.0;
    out.segment(offset, n) = factor * block;
    offset += n;
  }
  return out;
}

DenseVector proxElasticNet(const DenseVector& x, const DiagonalMetric& metric,
                           double lambda1, double lambda2) {
  requirePositive(lambda1, "elastic net lambda1");
  requirePositive(lambda2, "elastic net lambda2");
  requireSameSize(metric.size(), x.size(), "proxElasticNet");
  DenseVector out(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double u = metric[i];
    const double magnitude =
        (u / (lambda2 + u)) * std::abs(x[i]) - lambda1 / (lambda2 + u);
    out[i] = magnitude > 0.0 ? std::copysign(magnitude, x[i]) : 0.0;
  }
  return out;
}

DenseVector proxNonnegative(const DenseVector& x,
                            const DiagonalMetric& metric) {
  requireSameSize(metric.size(), x.size(), "proxNonnegative");
  return x.cwiseMax(0.0);
}

SimplexProjection projectSimplex(const DenseVector& x,
                                 const DiagonalMetric& metric, double tol,
                                 int maxIterations) {
  requirePositive(tol, "simplex tolerance");
  requireSameSize(metric.size(), x.size(), "proxSimplex");
  const DenseVector& u = metric.diag();
  const Index n = x.size();

  auto mass = [&](double nu) {
    double sum = 0.0;
    for (Index i = 0; i < n; ++i) sum += std::max(x[i] - nu / u[i], 0.0);
    return sum;
  };

  double lo = -kInf;
  double hi = -kInf;
  for (Index i = 0; i < n; ++i) {
    lo = std::max(lo, u[i] * (x[i] - 1.0));
    hi = std::max(hi, u[i] * x[i]);
  }

  SimplexProjection result;
  double nu = lo;
  double pivot = mass(lo) - 1.0;
  while (std::abs(pivot) > tol && result.iterations < maxIterations) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // bracket exhausted at double precision
    ++result.iterations;
    nu = mid;
    pivot = mass(mid) - 1.0;
    if (pivot > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  // Exact multiplier on the support found by bisection.
  for (int pass = 0; pass < 4; ++pass) {
    double num = -1.0;
    double den = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (x[i] - nu / u[i] > 0.0) {
        num += x[i];
        den += 1.0 / u[i];
      }
    }
    if (!(den > 0.0)) break;
    const double refined = num / den;
    if (!std::isfinite(refined) || refined == nu) break;
    if (std::abs(mass(refined) - 1.0) > std::abs(mass(nu) - 1.0)) break;
    nu = refined;
  }

  result.multiplier = nu;
  result.point.resize(n);
  for (Index i = 0; i < n; ++i) {
    result.point[i] = std::max(x[i] - nu / u[i], 0.0);
  }
  const double residual = result.point.sum() - 1.0;
  if (!(std::abs(residual) <= 10.0 * tol)) {
    std::ostringstream msg;
    msg << "proxSimplex: bisection did not converge after "
        << result.iterations << " iterations (nu = " << nu
        << ", sum - 1 = " << residual << ", bracket [" << lo << ", " << hi
        << "])";
    throw NumericalError(msg.str());
  }
  return result;
}

DenseVector proxSimplex(const DenseVector& x, const DiagonalMetric& metric,
                        double tol) {
  return projectSimplex(x, metric, tol).point;
}

DenseVector consensusAverage(const DenseVector& x,
                             const BlockDiagonalMetric& metric) {
  requireSameSize(metric.size(), x.size(), "consensusAverage");
  const Index n = metric.block(0).size();
  DenseVector weighted = DenseVector::Zero(n);
  DenseVector weights = DenseVector::Zero(n);
  for (std::size_t j = 0; j < metric.blockCount(); ++j) {
    const DiagonalMetric& block = metric.block(j);
    requireSameSize(n, block.size(), "consensusAverage block");
    weighted += block.diag().cwiseProduct(x.segment(metric.offset(j), n));
    weights += block.diag();
  }
  return weighted.cwiseQuotient(weights);
}

DenseVector proxConsensus(const DenseVector& x,
                          const BlockDiagonalMetric& metric) {
  const DenseVector z = consensusAverage(x, metric);
  DenseVector out(x.size());
  for (std::size_t j = 0; j < metric.blockCount(); ++j) {
    out.segment(metric.offset(j), z.size()) = z;
  }
  return out;
}

Lasso::Lasso(double lambda) : lambda_(lambda) {
  requirePositive(lambda, "lasso lambda");
}

double Lasso::value(const DenseVector& x) const {
  return lambda_ * x.lpNorm<1>();
}

DenseVector Lasso::doProx(const DenseVector& v,
                          const DiagonalMetric& metric) const {
  return proxLasso(v, metric, lambda_);
}

GroupLasso::GroupLasso(double lambda, std::vector<Index> groupSizes)
    : lambda_(lambda), groups_(std::move(groupSizes)) {
  requirePositive(lambda, "group lasso lambda");
  dim_ = checkedPartition(groups_, "GroupLasso");
}

double GroupLasso::value(const DenseVector& x) const {
  requireSameSize(dim_, x.size(), "GroupLasso::value");
  double total = 0.0;
  Index offset = 0;
  for (Index n : groups_) {
    total += x.segment(offset, n).norm();
    offset += n;
  }
  return lambda_ * total;
}

DenseVector GroupLasso::doProx(const DenseVector& v,
                               const DiagonalMetric& metric) const {
  return proxGroupLasso(v, metric, lambda_, groups_);
}

ElasticNet::ElasticNet(double lambda1, double lambda2)
    : lambda1_(lambda1), lambda2_(lambda2) {
  requirePositive(lambda1, "elastic net lambda1");
  requirePositive(lambda2, "elastic net lambda2");
}

double ElasticNet::value(const DenseVector& x) const {
  return lambda1_ * x.lpNorm<1>() + 0.5 * lambda2_ * x.squaredNorm();
}

DenseVector ElasticNet::doProx(const DenseVector& v,
                               const DiagonalMetric& metric) const {
  return proxElasticNet(v, metric, lambda1_, lambda2_);
}

double NonnegativeIndicator::value(const DenseVector& x) const {
  return (x.array() >= 0.0).all() ? 0.0 : kInf;
}

DenseVector NonnegativeIndicator::doProx(const DenseVector& v,
                                         const DiagonalMetric& metric) const {
  return proxNonnegative(v, metric);
}

SimplexIndicator::SimplexIndicator(double tol) : tol_(tol) {
  requirePositive(tol, "simplex tolerance");
}

double SimplexIndicator::value(const DenseVector& x) const {
  if ((x.array() < 0.0).any()) return kInf;
  return std::abs(x.sum() - 1.0) <= 1e-9 ? 0.0 : kInf;
}

DenseVector SimplexIndicator::doProx(const DenseVector& v,
                                     const DiagonalMetric& metric) const {
  return proxSimplex(v, metric, tol_);
}

ConsensusIndicator::ConsensusIndicator(int nodes, Index sharedDim)
    : nodes_(nodes), sharedDim_(sharedDim) {
  if (nodes < 1 || sharedDim < 1)
    throw ContractViolation("ConsensusIndicator: need nodes >= 1, dim >= 1");
}

double ConsensusIndicator::value(const DenseVector& x) const {
  requireSameSize(nodes_ * sharedDim_, x.size(), "ConsensusIndicator::value");
  const auto first = x.head(sharedDim_);
  for (int j = 1; j < nodes_; ++j) {
    if (x.segment(j * sharedDim_, sharedDim_) != first) return kInf;
  }
  return 0.0;
}

DenseVector ConsensusIndicator::doProx(const DenseVector& v,
                                       const DiagonalMetric& metric) const {
  const std::vector<Index> sizes(static_cast<std::size_t>(nodes_), sharedDim_);
  return proxConsensus(v, BlockDiagonalMetric::split(metric, sizes));
}

DenseVector ConsensusIndicator::doProxBlocks(
    const DenseVector& v, const BlockDiagonalMetric& metric) const {
  bool aligned = metric.blockCount() == static_cast<std::size_t>(nodes_);
  for (std::size_t j = 0; aligned && j < metric.blockCount(); ++j) {
    aligned = metric.block(j).size() == sharedDim_;
  }
  return aligned ? proxConsensus(v, metric) : doProx(v, metric.flatten());
}

BoxIndicator::BoxIndicator(double bound) : bound_(bound) {
  requirePositive(bound, "box bound");
}

double BoxIndicator::value(const DenseVector& x) const {
  return x.lpNorm<Eigen::Infinity>() <= bound_ ? 0.0 : kInf;
}

DenseVector BoxIndicator::doProx(const DenseVector& v,
                                 const DiagonalMetric&) const {
  return v.cwiseMax(-bound_).cwiseMin(bound_);
}

double NonpositiveIndicator::value(const DenseVector& x) const {
  return (x.array() <= 0.0).all() ? 0.0 : kInf;
}

DenseVector NonpositiveIndicator::doProx(const DenseVector& v,
                                         const DiagonalMetric&) const {
  return v.cwiseMin(0.0);
}

double ZeroPointIndicator::value(const DenseVector& x) const {
  return x.isZero(0.0) ? 0.0 : kInf;
}

DenseVector ZeroPointIndicator::doProx(const DenseVector& v,
                                       const DiagonalMetric&) const {
  return DenseVector::Zero(v.size());
}

std::unique_ptr<ProxRegularizer> conjugateOf(const ProxRegularizer& g) {
  if (auto* lasso = dynamic_cast<const Lasso*>(&g)) {
    return std::make_unique<BoxIndicator>(lasso->lambda());
  }
  if (dynamic_cast<const NonnegativeIndicator*>(&g)) {
    return std::make_unique<NonpositiveIndicator>();
  }
  if (dynamic_cast<const ZeroRegularizer*>(&g)) {
    return std::make_unique<ZeroPointIndicator>();
  }
  throw ContractViolation("conjugateOf: no closed-form conjugate for " +
                          g.name());
}

double moreauResidual(const ProxRegularizer& g, const DiagonalMetric& metric,
                      const DenseVector& x) {
  const auto conjugate = conjugateOf(g);
  const DenseVector primal = g.prox(x, metric);
  const DenseVector dual = conjugate->prox(metric.apply(x), metric.inverse());
  return (x - primal - metric.applyInverse(dual)).norm();
}

ScaledRegularizer::ScaledRegularizer(
    std::shared_ptr<const ProxRegularizer> inner, double scale, double offset)
    : inner_(std::move(inner)), scale_(scale), offset_(offset) {
  if (!inner_) throw ContractViolation("ScaledRegularizer: null inner");
  requirePositive(scale, "ScaledRegularizer scale");
}

double ScaledRegularizer::value(const DenseVector& x) const {
  return scale_ * inner_->value(x) + offset_;
}

DenseVector ScaledRegularizer::doProx(const DenseVector& v,
                                      const DiagonalMetric& metric) const {
  return inner_->prox(v, metric.scaled(1.0 / scale_));
}

DiagonalAffineComposition::DiagonalAffineComposition(
    std::shared_ptr<const ProxRegularizer> inner, DenseVector a, DenseVector b)
    : inner_(std::move(inner)), a_(std::move(a)), b_(std::move(b)) {
  if (!inner_) throw ContractViolation("DiagonalAffineComposition: null inner");
  requireSameSize(a_.size(), b_.size(), "DiagonalAffineComposition");
  requireFinite(a_, "DiagonalAffineComposition scale");
  requireFinite(b_, "DiagonalAffineComposition shift");
  if ((a_.array() == 0.0).any())
    throw ContractViolation("DiagonalAffineComposition: singular scale");
}

double DiagonalAffineComposition::value(const DenseVector& x) const {
  return inner_->value(a_.cwiseProduct(x) + b_);
}

DenseVector DiagonalAffineComposition::doProx(
    const DenseVector& v, const DiagonalMetric& metric) const {
  const DiagonalMetric transformed(metric.diag().cwiseQuotient(a_.cwiseAbs2()));
  const DenseVector inner = inner_->prox(a_.cwiseProduct(v) + b_, transformed);
  return (inner - b_).cwiseQuotient(a_);
}

AffineAddition::AffineAddition(std::shared_ptr<const ProxRegularizer> inner,
                               DenseVector a, double b)
    : inner_(std::move(inner)), a_(std::move(a)), b_(b) {
  if (!inner_) throw ContractViolation("AffineAddition: null inner");
  requireFinite(a_, "AffineAddition slope");
}

double AffineAddition::value(const DenseVector& x) const {
  return inner_->value(x) + a_.dot(x) + b_;
}

DenseVector AffineAddition::doProx(const DenseVector& v,
                                   const DiagonalMetric& metric) const {
  return inner_->prox(v - metric.applyInverse(a_), metric);
}

QuadraticRegularization::QuadraticRegularization(
    std::shared_ptr<const ProxRegularizer> inner, DiagonalMetric weight,
    DenseVector center)
    : inner_(std::move(inner)),
      weight_(std::move(weight)),
      center_(std::move(center)) {
  if (!inner_) throw ContractViolation("QuadraticRegularization: null inner");
  requireSameSize(weight_.size(), center_.size(), "QuadraticRegularization");
  requireFinite(center_, "QuadraticRegularization center");
}

double QuadraticRegularization::value(const DenseVector& x) const {
  return inner_->value(x) + 0.5 * unormSquared(x - center_, weight_);
}

DenseVector QuadraticRegularization::doProx(
    const DenseVector& v, const DiagonalMetric& metric) const {
  const DiagonalMetric combined(metric.diag() + weight_.diag());
  const DenseVector target =
      combined.applyInverse(metric.apply(v) + weight_.apply(center_));
  return inner_->prox(target, combined);
}

SeparableSum::SeparableSum(std::vector<Term> terms) : terms_(std::move(terms)) {
  if (terms_.empty()) throw ContractViolation("SeparableSum: no terms");
  for (const auto& t : terms_) {
    if (!t.g) throw ContractViolation("SeparableSum: null term");
    if (t.size <= 0) throw ContractViolation("SeparableSum: empty block");
    if (auto n = t.g->fixedDim()) requireSameSize(*n, t.size, "SeparableSum");
    dim_ += t.size;
  }
}

double SeparableSum::value(const DenseVector& x) const {
  requireSameSize(dim_, x.size(), "SeparableSum::value");
  double total = 0.0;
  Index offset = 0;
  for (const auto& t : terms_) {
    total += t.g->value(x.segment(offset, t.size));
    offset += t.size;
  }
  return total;
}

DenseVector SeparableSum::doProx(const DenseVector& v,
                                 const DiagonalMetric& metric) const {
  std::vector<Index> sizes;
  sizes.reserve(terms_.size());
  for (const auto& t : terms_) sizes.push_back(t.size);
  return doProxBlocks(v, BlockDiagonalMetric::split(metric, sizes));
}

DenseVector SeparableSum::doProxBlocks(const DenseVector& v,
                                       const BlockDiagonalMetric& metric) const {
  bool aligned = metric.blockCount() == terms_.size();
  for (std::size_t j = 0; aligned && j < terms_.size(); ++j) {
    aligned = metric.block(j).size() == terms_[j].size;
  }
  if (!aligned) return doProx(v, metric.flatten());
  DenseVector out(v.size());
  for (std::size_t j = 0; j < terms_.size(); ++j) {
    const Index n = terms_[j].size;
    out.segment(metric.offset(j), n) =
        terms_[j].g->prox(DenseVector(v.segment(metric.offset(j), n)),
                          metric.block(j));
  }
  return out;
}

}  // namespace vmpg

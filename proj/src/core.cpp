#include "vmpg/core.hpp"

#include <cmath>
#include <sstream>

namespace vmpg {

bool allFinite(const DenseVector& v) { return v.allFinite(); }

void requireFinite(const DenseVector& v, std::string_view what) {
  if (v.allFinite()) return;
  for (Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream msg;
      msg << what << ": entry " << i << " is not finite (" << v[i] << ")";
      throw NumericalError(msg.str());
    }
  }
}

void requireSameSize(Index expected, Index actual, std::string_view what) {
  if (expected != actual) {
    std::ostringstream msg;
    msg << what << ": dimension mismatch (expected " << expected << ", got "
        << actual << ")";
    throw ContractViolation(msg.str());
  }
}

DiagonalMetric::DiagonalMetric(DenseVector diag) : diag_(std::move(diag)) {
  if (diag_.size() == 0) throw ContractViolation("DiagonalMetric: empty");
  for (Index i = 0; i < diag_.size(); ++i) {
    const double u = diag_[i];
    if (!std::isfinite(u) || !(u >= kMinEntry)) {
      std::ostringstream msg;
      msg << "DiagonalMetric: entry " << i << " = " << u
          << " is not a finite value >= " << kMinEntry;
      throw ContractViolation(msg.str());
    }
  }
}

DiagonalMetric DiagonalMetric::identity(Index n) {
  return DiagonalMetric(DenseVector::Ones(n));
}

DiagonalMetric DiagonalMetric::scalar(Index n, double u) {
  return DiagonalMetric(DenseVector::Constant(n, u));
}

bool DiagonalMetric::isScalar() const {
  return (diag_.array() == diag_[0]).all();
}

DenseVector DiagonalMetric::apply(const DenseVector& z) const {
  requireSameSize(size(), z.size(), "DiagonalMetric::apply");
  return diag_.cwiseProduct(z);
}

DenseVector DiagonalMetric::applyInverse(const DenseVector& z) const {
  requireSameSize(size(), z.size(), "DiagonalMetric::applyInverse");
  return z.cwiseQuotient(diag_);
}

DiagonalMetric DiagonalMetric::inverse() const {
  return DiagonalMetric(diag_.cwiseInverse());
}

DiagonalMetric DiagonalMetric::scaled(double factor) const {
  return DiagonalMetric(factor * diag_);
}

double unormSquared(const DenseVector& z, const DiagonalMetric& metric) {
  requireSameSize(metric.size(), z.size(), "unorm");
  return z.cwiseAbs2().dot(metric.diag());
}

double unorm(const DenseVector& z, const DiagonalMetric& metric) {
  return std::sqrt(unormSquared(z, metric));
}

DenseVector applyInverse(const DiagonalMetric& metric, const DenseVector& z) {
  return metric.applyInverse(z);
}

BlockDiagonalMetric::BlockDiagonalMetric(std::vector<DiagonalMetric> blocks)
    : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw ContractViolation("BlockDiagonalMetric: no blocks");
  offsets_.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    offsets_.push_back(size_);
    size_ += b.size();
  }
}

BlockDiagonalMetric BlockDiagonalMetric::split(
    const DiagonalMetric& metric, std::span<const Index> blockSizes) {
  Index total = 0;
  for (Index s : blockSizes) {
    if (s <= 0) throw ContractViolation("BlockDiagonalMetric: empty block");
    total += s;
  }
  requireSameSize(metric.size(), total, "BlockDiagonalMetric::split");
  std::vector<DiagonalMetric> blocks;
  blocks.reserve(blockSizes.size());
  Index offset = 0;
  for (Index s : blockSizes) {
    blocks.emplace_back(metric.diag().segment(offset, s));
    offset += s;
  }
  return BlockDiagonalMetric(std::move(blocks));
}

DiagonalMetric BlockDiagonalMetric::flatten() const {
  DenseVector d(size_);
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    d.segment(offsets_[j], blocks_[j].size()) = blocks_[j].diag();
  }
  return DiagonalMetric(std::move(d));
}

DenseVector BlockDiagonalMetric::apply(const DenseVector& z) const {
  requireSameSize(size_, z.size(), "BlockDiagonalMetric::apply");
  DenseVector out(size_);
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    const Index n = blocks_[j].size();
    out.segment(offsets_[j], n) =
        blocks_[j].apply(z.segment(offsets_[j], n));
  }
  return out;
}

DenseVector BlockDiagonalMetric::applyInverse(const DenseVector& z) const {
  requireSameSize(size_, z.size(), "BlockDiagonalMetric::applyInverse");
  DenseVector out(size_);
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    const Index n = blocks_[j].size();
    out.segment(offsets_[j], n) =
        blocks_[j].applyInverse(z.segment(offsets_[j], n));
  }
  return out;
}

BlockDiagonalMetric BlockDiagonalMetric::scaled(double factor) const {
  std::vector<DiagonalMetric> blocks;
  blocks.reserve(blocks_.size());
  for (const auto& b : blocks_) blocks.push_back(b.scaled(factor));
  return BlockDiagonalMetric(std::move(blocks));
}

DenseVector ProxRegularizer::prox(const DenseVector& v,
                                  const DiagonalMetric& metric) const {
  requireSameSize(metric.size(), v.size(), name() + "::prox");
  if (auto n = fixedDim()) requireSameSize(*n, v.size(), name() + "::prox");
  requireFinite(v, name() + "::prox input");
  DenseVector out = doProx(v, metric);
  requireFinite(out, name() + "::prox output");
  return out;
}

DenseVector ProxRegularizer::prox(const DenseVector& v,
                                  const BlockDiagonalMetric& metric) const {
  requireSameSize(metric.size(), v.size(), name() + "::prox");
  if (auto n = fixedDim()) requireSameSize(*n, v.size(), name() + "::prox");
  requireFinite(v, name() + "::prox input");
  DenseVector out = doProxBlocks(v, metric);
  requireFinite(out, name() + "::prox output");
  return out;
}

}  // namespace vmpg

#include "vmpg/consensus.hpp"

#include "vmpg/prox.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <thread>

namespace vmpg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double elapsedMs(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - since)
      .count();
}

// Calls work(j) for every node, on worker threads when requested. Each call
// writes only its own slot, so the order of execution does not matter.
template <class Work>
void forEachNode(int nodes, bool parallel, Work&& work) {
  const int workers =
      parallel ? std::min<int>(nodes, std::max(1u, std::thread::hardware_concurrency()))
               : 1;
  if (workers <= 1) {
    for (int j = 0; j < nodes; ++j) work(j);
    return;
  }
  std::vector<std::future<void>> tasks;
  tasks.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    tasks.push_back(std::async(std::launch::async, [&, w] {
      for (int j = w; j < nodes; j += workers) work(j);
    }));
  }
  for (auto& t : tasks) t.get();
}

DenseVector stack(const std::vector<DenseVector>& parts) {
  Index total = 0;
  for (const auto& p : parts) total += p.size();
  DenseVector out(total);
  Index offset = 0;
  for (const auto& p : parts) {
    out.segment(offset, p.size()) = p;
    offset += p.size();
  }
  return out;
}

double sumObjective(const ConsensusProblem& problem, const DenseVector& z,
                    bool parallel) {
  std::vector<double> values(static_cast<std::size_t>(problem.nodes()));
  forEachNode(problem.nodes(), parallel, [&](int j) {
    values[static_cast<std::size_t>(j)] =
        problem.localObjectives[static_cast<std::size_t>(j)]->value(z);
  });
  double total = 0.0;
  for (double v : values) total += v;  // fixed order
  return total;
}

}  // namespace

void ConsensusProblem::validate() const {
  if (localObjectives.empty())
    throw ContractViolation("ConsensusProblem: need at least one node");
  if (sharedDim < 1) throw ContractViolation("ConsensusProblem: sharedDim < 1");
  for (const auto& f : localObjectives) {
    if (!f) throw ContractViolation("ConsensusProblem: null local objective");
    requireSameSize(sharedDim, f->dim(), "ConsensusProblem local objective");
  }
  if (!shardSizes.empty() && shardSizes.size() != localObjectives.size())
    throw ContractViolation("ConsensusProblem: one shard size per node");
}

std::vector<Index> proportionalShards(Index N, int nodes) {
  if (nodes < 1) throw ContractViolation("proportionalShards: nodes < 1");
  if (N < nodes)
    throw ContractViolation("proportionalShards: fewer samples than nodes");
  // One sample each, then the rest split in proportion to 1..nodes. Floors
  // leave fewer than `nodes` samples over; adding them to a suffix keeps the
  // sizes nondecreasing.
  const auto weightTotal =
      static_cast<Index>(nodes) * static_cast<Index>(nodes + 1) / 2;
  const Index rest = N - nodes;
  std::vector<Index> sizes(static_cast<std::size_t>(nodes));
  Index assigned = 0;
  for (int j = 0; j < nodes; ++j) {
    sizes[static_cast<std::size_t>(j)] = 1 + rest * (j + 1) / weightTotal;
    assigned += sizes[static_cast<std::size_t>(j)];
  }
  for (int j = nodes - 1; assigned < N; --j) {
    ++sizes[static_cast<std::size_t>(j)];
    ++assigned;
  }
  return sizes;
}

ConsensusProblem makeConsensusRegression(const RegressionProblem& pooled,
                                         const std::vector<Index>& shardSizes,
                                         double l2) {
  Index total = 0;
  for (Index s : shardSizes) {
    if (s < 1) throw ContractViolation("makeConsensusRegression: empty shard");
    total += s;
  }
  if (total != pooled.samples())
    throw ContractViolation("makeConsensusRegression: shards must cover N");
  const double N = static_cast<double>(pooled.samples());
  ConsensusProblem problem;
  problem.sharedDim = pooled.features();
  problem.shardSizes = shardSizes;
  Index row = 0;
  for (Index s : shardSizes) {
    problem.localObjectives.push_back(std::make_shared<RegressionObjective>(
        pooled.A.middleRows(row, s), pooled.b.segment(row, s), pooled.loss,
        1.0 / N, l2 * static_cast<double>(s) / N));
    row += s;
  }
  return problem;
}

std::unique_ptr<RegressionObjective> pooledObjective(
    const RegressionProblem& pooled, double l2) {
  return std::make_unique<RegressionObjective>(
      pooled.A, pooled.b, pooled.loss,
      1.0 / static_cast<double>(pooled.samples()), l2);
}

StackedObjective::StackedObjective(const ConsensusProblem& problem)
    : problem_(problem) {
  problem_.validate();
}

Index StackedObjective::dim() const {
  return problem_.sharedDim * problem_.nodes();
}

double StackedObjective::value(const DenseVector& x) const {
  requireSameSize(dim(), x.size(), "StackedObjective::value");
  const Index n = problem_.sharedDim;
  double total = 0.0;
  for (int j = 0; j < problem_.nodes(); ++j) {
    total += problem_.localObjectives[static_cast<std::size_t>(j)]->value(
        x.segment(j * n, n));
  }
  return total;
}

DenseVector StackedObjective::gradient(const DenseVector& x) const {
  requireSameSize(dim(), x.size(), "StackedObjective::gradient");
  const Index n = problem_.sharedDim;
  DenseVector g(x.size());
  for (int j = 0; j < problem_.nodes(); ++j) {
    g.segment(j * n, n) =
        problem_.localObjectives[static_cast<std::size_t>(j)]->gradient(
            x.segment(j * n, n));
  }
  return g;
}

std::string_view toString(MetricMode mode) {
  switch (mode) {
    case MetricMode::GlobalBB: return "global_bb";
    case MetricMode::GlobalDBB: return "global_dbb";
    case MetricMode::LocalBB: return "local_bb";
    case MetricMode::LocalDBB: return "local_dbb";
  }
  return "?";
}

std::optional<MetricMode> parseMetricMode(std::string_view text) {
  for (auto m : {MetricMode::GlobalBB, MetricMode::GlobalDBB,
                 MetricMode::LocalBB, MetricMode::LocalDBB}) {
    if (text == toString(m)) return m;
  }
  return std::nullopt;
}

DiagonalMetric localMetric(const NodeState& node, MetricMode mode,
                           const BBConfig& cfg) {
  const StepPair sp(node.x - node.xPrev, node.grad - node.gradPrev);
  switch (mode) {
    case MetricMode::LocalBB:
      return DiagonalMetric::scalar(node.x.size(),
                                    1.0 / hybridBB(sp, cfg, node.stepsize));
    case MetricMode::LocalDBB:
      return diagonalBB(sp, cfg, node.stepsize);
    case MetricMode::GlobalBB:
    case MetricMode::GlobalDBB:
      break;
  }
  throw ContractViolation("localMetric: global modes need all nodes");
}

std::vector<DiagonalMetric> roundMetrics(const std::vector<NodeState>& nodes,
                                         MetricMode mode,
                                         const BBConfig& cfg) {
  if (nodes.empty()) throw ContractViolation("roundMetrics: no nodes");
  std::vector<DiagonalMetric> metrics;
  metrics.reserve(nodes.size());
  if (mode == MetricMode::LocalBB || mode == MetricMode::LocalDBB) {
    for (const auto& node : nodes) metrics.push_back(localMetric(node, mode, cfg));
    return metrics;
  }

  std::vector<DenseVector> s, y, prev;
  for (const auto& node : nodes) {
    s.push_back(node.x - node.xPrev);
    y.push_back(node.grad - node.gradPrev);
    prev.push_back(node.stepsize.prevMetric.diag());
  }
  const StepPair sp(stack(s), stack(y));
  const Index n = nodes.front().x.size();
  if (mode == MetricMode::GlobalBB) {
    const double alpha = hybridBB(sp, cfg, nodes.front().stepsize);
    for (std::size_t j = 0; j < nodes.size(); ++j)
      metrics.push_back(DiagonalMetric::scalar(n, 1.0 / alpha));
    return metrics;
  }
  const StepsizeState global(nodes.front().stepsize.prevAlpha,
                             DiagonalMetric(stack(prev)));
  const DiagonalMetric stacked = diagonalBB(sp, cfg, global);
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    metrics.emplace_back(
        stacked.diag().segment(static_cast<Index>(j) * n, n).eval());
  }
  return metrics;
}

std::vector<DenseVector> localForwardSteps(
    const std::vector<NodeState>& nodes,
    const std::vector<DiagonalMetric>& metrics) {
  if (nodes.size() != metrics.size())
    throw ContractViolation("localForwardSteps: one metric per node");
  std::vector<DenseVector> forward;
  forward.reserve(nodes.size());
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    forward.push_back(nodes[j].x - metrics[j].applyInverse(nodes[j].grad));
  }
  return forward;
}

ConsensusState initialConsensusState(const ConsensusProblem& problem,
                                     const DenseVector& x0,
                                     const ConsensusConfig& cfg) {
  problem.validate();
  cfg.solver.validate();
  requireSameSize(problem.sharedDim, x0.size(), "consensus start point");
  requireFinite(x0, "consensus start point");
  const Index n = problem.sharedDim;
  const int N = problem.nodes();

  std::vector<DenseVector> grads(static_cast<std::size_t>(N));
  forEachNode(N, cfg.parallel, [&](int j) {
    grads[static_cast<std::size_t>(j)] =
        problem.localObjectives[static_cast<std::size_t>(j)]->gradient(x0);
  });

  const std::size_t capacity =
      cfg.solver.lineSearch == LineSearchMode::Nonmonotone
          ? static_cast<std::size_t>(cfg.solver.mLS) + 1
          : 1;
  ConsensusState state{{},
                       x0,
                       DenseVector(),
                       ObjectiveWindow(capacity),
                       sumObjective(problem, x0, cfg.parallel),
                       0,
                       std::chrono::steady_clock::now()};
  std::vector<DenseVector> xs;
  for (int j = 0; j < N; ++j) {
    auto& g = grads[static_cast<std::size_t>(j)];
    requireFinite(g, "local gradient at start point");
    state.nodes.push_back(NodeState{x0, x0, g, g, DiagonalMetric::identity(n),
                                    StepsizeState(n)});
    xs.push_back(x0);
  }
  state.forward = stack(xs);
  state.history.reset(state.objective);
  return state;
}

RoundOutcome consensusRound(const ConsensusProblem& problem,
                            ConsensusState& state,
                            const ConsensusConfig& cfg) {
  const SolverConfig& sc = cfg.solver;
  const int N = problem.nodes();
  const Index n = problem.sharedDim;
  if (static_cast<int>(state.nodes.size()) != N)
    throw ContractViolation("consensusRound: state does not match problem");

  std::vector<DiagonalMetric> metrics;
  double fHat = kInf;
  LineSearchMode mode = sc.lineSearch;
  if (state.iter == 0) {
    std::vector<DenseVector> grads;
    for (const auto& node : state.nodes) grads.push_back(node.grad);
    const double gradNorm = stack(grads).norm();
    const double alpha0 = gradNorm > 0.0 ? std::min(1.0, 1.0 / gradNorm) : 1.0;
    metrics.assign(static_cast<std::size_t>(N),
                   DiagonalMetric::scalar(n, 1.0 / alpha0));
    fHat = state.objective;
    if (mode != LineSearchMode::Off) mode = LineSearchMode::Monotone;
  } else {
    metrics = roundMetrics(state.nodes, cfg.mode, sc.bb);
    if (mode == LineSearchMode::Nonmonotone) fHat = state.history.max();
    if (mode == LineSearchMode::Monotone) fHat = state.objective;
  }

  int backtracks = 0;
  std::vector<DenseVector> forward;
  DenseVector z;
  double objectiveNext = kInf;
  double stepSq = 0.0;
  for (;;) {
    forward = localForwardSteps(state.nodes, metrics);
    const DenseVector stackedForward = stack(forward);
    if (stackedForward.allFinite()) {
      z = consensusAverage(stackedForward,
                           BlockDiagonalMetric(std::vector(metrics)));
      objectiveNext = sumObjective(problem, z, cfg.parallel);
      stepSq = 0.0;
      for (int j = 0; j < N; ++j) {
        stepSq += unormSquared(z - state.nodes[static_cast<std::size_t>(j)].x,
                               metrics[static_cast<std::size_t>(j)]);
      }
      if (mode == LineSearchMode::Off || objectiveNext <= fHat - 0.5 * stepSq)
        break;
    } else if (mode == LineSearchMode::Off) {
      requireFinite(stackedForward, "consensus forward step");
    }
    if (backtracks >= sc.maxBacktracks) {
      double uMax = 0.0;
      for (const auto& m : metrics) uMax = std::max(uMax, m.maxEntry());
      throw LineSearchFailure(state.iter, backtracks, fHat, objectiveNext,
                              uMax);
    }
    for (auto& m : metrics) m = m.scaled(sc.beta);
    ++backtracks;
  }

  RoundOutcome out;
  DenseVector stackedForward = stack(forward);
  out.forwardChange = (stackedForward - state.forward).norm();
  {
    // Stacked G = U(x - x+) with x_j the previous shared iterate.
    double mappingSq = 0.0;
    for (int j = 0; j < N; ++j) {
      const auto& node = state.nodes[static_cast<std::size_t>(j)];
      mappingSq +=
          metrics[static_cast<std::size_t>(j)].apply(node.x - z).squaredNorm();
    }
    const double xNorm = std::sqrt(static_cast<double>(N)) * state.z.norm();
    out.relativeGradMapping = std::sqrt(mappingSq) / std::max(1.0, xNorm);
  }

  std::vector<DenseVector> grads(static_cast<std::size_t>(N));
  forEachNode(N, cfg.parallel, [&](int j) {
    grads[static_cast<std::size_t>(j)] =
        problem.localObjectives[static_cast<std::size_t>(j)]->gradient(z);
  });
  double uMin = kInf;
  double uMax = 0.0;
  for (int j = 0; j < N; ++j) {
    auto& node = state.nodes[static_cast<std::size_t>(j)];
    auto& metric = metrics[static_cast<std::size_t>(j)];
    requireFinite(grads[static_cast<std::size_t>(j)], "local gradient");
    node.xPrev = std::move(node.x);
    node.x = z;
    node.gradPrev = std::move(node.grad);
    node.grad = std::move(grads[static_cast<std::size_t>(j)]);
    node.stepsize.prevAlpha =
        std::clamp(1.0 / metric.maxEntry(), sc.bb.alphaMin, sc.bb.alphaMax);
    node.stepsize.prevMetric = metric;
    uMin = std::min(uMin, metric.minEntry());
    uMax = std::max(uMax, metric.maxEntry());
    node.metric = std::move(metric);
  }
  {
    double residualSq = 0.0;
    double gradSq = 0.0;
    double subSq = 0.0;
    for (int j = 0; j < N; ++j) {
      const auto& node = state.nodes[static_cast<std::size_t>(j)];
      const DenseVector sub =
          node.metric.apply(forward[static_cast<std::size_t>(j)] - z);
      residualSq += (node.grad + sub).squaredNorm();
      gradSq += node.grad.squaredNorm();
      subSq += sub.squaredNorm();
    }
    const double denom = std::sqrt(std::max(gradSq, subSq));
    out.relativeResidual =
        denom > 0.0 ? std::sqrt(residualSq) / denom : std::sqrt(residualSq);
  }
  state.z = std::move(z);
  state.forward = std::move(stackedForward);
  state.objective = objectiveNext;
  state.history.push(objectiveNext);
  if (state.iter == 0) state.history.reset(objectiveNext);
  ++state.iter;

  ConsensusTraceRecord& rec = out.record;
  rec.iter = state.iter;
  rec.objective = objectiveNext;
  // With x_j = z for every node, G = U(x - x+) gives ||G||_{U^{-1}} equal to
  // the U-norm of the step.
  rec.gradMapNorm = std::sqrt(stepSq);
  rec.stepNormU = std::sqrt(stepSq);
  rec.backtracks = backtracks;
  rec.uMin = uMin;
  rec.uMax = uMax;
  rec.wallMs = elapsedMs(state.started);
  rec.bytesExchanged = 2 * static_cast<std::int64_t>(n) * N *
                       static_cast<std::int64_t>(sizeof(double));
  return out;
}

double ConsensusResult::finalObjective() const {
  return trace.empty() ? std::numeric_limits<double>::quiet_NaN()
                       : trace.back().objective;
}

ConsensusResult solveConsensus(const ConsensusProblem& problem,
                               const DenseVector& x0,
                               const ConsensusConfig& cfg) {
  ConsensusState state = initialConsensusState(problem, x0, cfg);
  ConsensusResult result;
  const SolverConfig& sc = cfg.solver;
  try {
    for (;;) {
      const RoundOutcome round = consensusRound(problem, state, cfg);
      result.trace.push_back(round.record);
      const double residual =
          sc.stopping == StoppingRule::ForwardStep ? round.forwardChange
          : sc.stopping == StoppingRule::RelativeGradientMapping
              ? round.relativeGradMapping
              : round.relativeResidual;
      if (residual <= sc.epsTol) {
        result.status = SolveStatus::Converged;
        break;
      }
      if (state.iter >= sc.maxIter) {
        result.status = SolveStatus::MaxIter;
        break;
      }
    }
  } catch (const LineSearchFailure& e) {
    result.status = SolveStatus::LineSearchFailure;
    result.message = e.what();
  }
  result.solution = state.z;
  return result;
}

}  // namespace vmpg

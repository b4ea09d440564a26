#pragma once

#include "vmpg/core.hpp"
#include "vmpg/problems.hpp"
#include "vmpg/solver.hpp"
#include "vmpg/stepsize.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

namespace vmpg {

/// minimize sum_j f_j(x_j) subject to x_1 = ... = x_N.
struct ConsensusProblem {
  Index sharedDim = 0;
  std::vector<std::shared_ptr<const SmoothObjective>> localObjectives;
  std::vector<Index> shardSizes;  ///< samples held by each node

  int nodes() const { return static_cast<int>(localObjectives.size()); }
  void validate() const;
};

/// Shard sizes proportional to the node number 1..nodes, rounded down, with
/// the remainder handed out one sample at a time from the last node
/// backwards. Sizes are nondecreasing, at least 1 and sum to N.
std::vector<Index> proportionalShards(Index N, int nodes);

/// Splits a pooled regression problem into contiguous row shards.
/// f_j(x) = (1/N) sum_{i in shard j} l(x; a_i, b_i) + l2 (N_j/N) ||x||^2, so
/// that sum_j f_j is exactly the pooled objective
/// (1/N) sum_i l(x; a_i, b_i) + l2 ||x||^2.
ConsensusProblem makeConsensusRegression(const RegressionProblem& pooled,
                                         const std::vector<Index>& shardSizes,
                                         double l2);

/// (1/N) sum_i l(x; a_i, b_i) + l2 ||x||^2 on all rows.
std::unique_ptr<RegressionObjective> pooledObjective(
    const RegressionProblem& pooled, double l2);

/// sum_j f_j(x_j) on the stacked vector (x_1, ..., x_N).
class StackedObjective final : public SmoothObjective {
 public:
  explicit StackedObjective(const ConsensusProblem& problem);

  Index dim() const override;
  double value(const DenseVector& x) const override;
  DenseVector gradient(const DenseVector& x) const override;

 private:
  const ConsensusProblem& problem_;
};

enum class MetricMode { GlobalBB, GlobalDBB, LocalBB, LocalDBB };

std::string_view toString(MetricMode mode);
std::optional<MetricMode> parseMetricMode(std::string_view text);

struct NodeState {
  DenseVector x;
  DenseVector xPrev;
  DenseVector grad;
  DenseVector gradPrev;
  DiagonalMetric metric;
  StepsizeState stepsize;
};

/// Metric of one node from its own (s_j, y_j): hybrid BB times I for
/// LocalBB, diagonal BB for LocalDBB. Global modes need every node; use
/// roundMetrics for those.
DiagonalMetric localMetric(const NodeState& node, MetricMode mode,
                           const BBConfig& cfg);

/// One metric per node. Global modes compute a single scalar or diagonal
/// metric from the concatenated (s, y) of all nodes and hand each node its
/// block.
std::vector<DiagonalMetric> roundMetrics(const std::vector<NodeState>& nodes,
                                         MetricMode mode, const BBConfig& cfg);

/// y_j = x_j - U_j^{-1} grad f_j(x_j) for every node.
std::vector<DenseVector> localForwardSteps(
    const std::vector<NodeState>& nodes,
    const std::vector<DiagonalMetric>& metrics);

struct ConsensusConfig {
  SolverConfig solver;  ///< line search, stopping, BB parameters
  MetricMode mode = MetricMode::LocalDBB;
  bool parallel = false;  ///< evaluate node gradients on worker threads
};

struct ConsensusTraceRecord : TraceRecord {
  std::int64_t bytesExchanged = 0;
};

struct ConsensusState {
  std::vector<NodeState> nodes;
  DenseVector z;              ///< shared iterate
  DenseVector forward;        ///< stacked forward point (y_1, ..., y_N)
  ObjectiveWindow history;
  double objective = 0.0;     ///< sum_j f_j(z)
  int iter = 0;
  std::chrono::steady_clock::time_point started;
};

struct RoundOutcome {
  ConsensusTraceRecord record;
  double forwardChange = 0.0;  ///< ||y^{k+1} - y^k||_2 on stacked points
  double relativeGradMapping = 0.0;
  double relativeResidual = 0.0;
};

/// Every node starts from x0.
ConsensusState initialConsensusState(const ConsensusProblem& problem,
                                     const DenseVector& x0,
                                     const ConsensusConfig& cfg);

/// One synchronous round: node-local forward steps, metric-weighted average
/// z = (sum_j U_j)^{-1} sum_j U_j y_j, broadcast x_j := z. The line search
/// on sum_j f_j(z) wraps the round and rescales every block by beta. The
/// first round (state.iter == 0) uses the scalar warm-up metric.
RoundOutcome consensusRound(const ConsensusProblem& problem,
                            ConsensusState& state, const ConsensusConfig& cfg);

struct ConsensusResult {
  DenseVector solution;
  std::vector<ConsensusTraceRecord> trace;
  SolveStatus status = SolveStatus::MaxIter;
  std::string message;

  int rounds() const { return static_cast<int>(trace.size()); }
  double finalObjective() const;
};

ConsensusResult solveConsensus(const ConsensusProblem& problem,
                               const DenseVector& x0,
                               const ConsensusConfig& cfg);

}  // namespace vmpg

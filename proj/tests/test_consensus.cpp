#include "checks.hpp"
#include "test_util.hpp"

#include "vmpg/consensus.hpp"
#include "vmpg/prox.hpp"

#include <doctest.h>

#include <numeric>

using namespace vmpg;
using testutil::vec;

namespace {

/// c/2 ||x||^2.
std::shared_ptr<const SmoothObjective> scaledNorm(Index n, double c) {
  return std::make_shared<QuadraticObjective>(
      c * DenseMatrix::Identity(n, n), DenseVector::Zero(n));
}

NodeState nodeWith(const SmoothObjective& f, const DenseVector& x,
                   const DenseVector& xPrev) {
  const Index n = x.size();
  return NodeState{x, xPrev, f.gradient(x), f.gradient(xPrev),
                   DiagonalMetric::identity(n), StepsizeState(n)};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_SUITE("consensus") {

TEST_CASE("proportional shards") {
  for (Index N : {10, 55, 100, 1000, 1237}) {
    for (int nodes : {1, 3, 10}) {
      const auto sizes = proportionalShards(N, nodes);
      CHECK(sizes.size() == static_cast<std::size_t>(nodes));
      CHECK(std::accumulate(sizes.begin(), sizes.end(), Index{0}) == N);
      CHECK(sizes.front() >= 1);
      CHECK(std::is_sorted(sizes.begin(), sizes.end()));
    }
  }
  // 1..10 sums to 55
  const auto exact = proportionalShards(55, 10);
  for (int j = 0; j < 10; ++j) CHECK(exact[static_cast<std::size_t>(j)] == j + 1);
  CHECK_THROWS_AS(proportionalShards(3, 4), ContractViolation);
}

TEST_CASE("one node: local and global metrics coincide") {
  Rng rng(51);
  const auto f = testutil::randomQuadratic(rng, 5);
  const std::vector<NodeState> nodes{
      nodeWith(*f, rng.normalVector(5), rng.normalVector(5))};
  const BBConfig cfg;
  CHECK(roundMetrics(nodes, MetricMode::LocalBB, cfg)[0].diag() ==
        roundMetrics(nodes, MetricMode::GlobalBB, cfg)[0].diag());
  CHECK(roundMetrics(nodes, MetricMode::LocalDBB, cfg)[0].diag() ==
        roundMetrics(nodes, MetricMode::GlobalDBB, cfg)[0].diag());
}

TEST_CASE("local BB recovers each node's curvature") {
  const auto f1 = scaledNorm(3, 2.0), f2 = scaledNorm(3, 7.0);
  const std::vector<NodeState> nodes{
      nodeWith(*f1, vec({1, 2, 3}), vec({0, 1, 1})),
      nodeWith(*f2, vec({-1, 0, 2}), vec({1, 1, 1}))};
  const auto metrics = roundMetrics(nodes, MetricMode::LocalBB, BBConfig{});
  CHECK(metrics[0][0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(metrics[1][0] == doctest::Approx(7.0).epsilon(1e-14));
  CHECK(metrics[0].isScalar());
  // global scalar BB mixes both
  const auto global = roundMetrics(nodes, MetricMode::GlobalBB, BBConfig{});
  CHECK(global[0].diag() == global[1].diag());
}

TEST_CASE("local DBB blocks assemble into the block metric") {
  Rng rng(52);
  const auto f1 = testutil::randomQuadratic(rng, 4);
  const auto f2 = testutil::randomQuadratic(rng, 4);
  const std::vector<NodeState> nodes{
      nodeWith(*f1, rng.normalVector(4), rng.normalVector(4)),
      nodeWith(*f2, rng.normalVector(4), rng.normalVector(4))};
  const auto metrics = roundMetrics(nodes, MetricMode::LocalDBB, BBConfig{});
  const BlockDiagonalMetric B(metrics);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(B.block(j).diag() ==
          localMetric(nodes[j], MetricMode::LocalDBB, BBConfig{}).diag());
  }
}

TEST_CASE("weighted average examples") {
  const BlockDiagonalMetric B({DiagonalMetric(vec({1})), DiagonalMetric(vec({3}))});
  CHECK(consensusAverage(vec({0, 4}), B) == vec({3}));
  const BlockDiagonalMetric equal(
      {DiagonalMetric::scalar(2, 4), DiagonalMetric::scalar(2, 4)});
  CHECK(consensusAverage(vec({1, 2, 3, 6}), equal) == vec({2, 4}));
}

TEST_CASE("property: weighted average first-order condition") {
  Rng rng(53);
  for (int t = 0; t < 100; ++t) {
    const int nodes = static_cast<int>(rng.uniformIndex(1, 6));
    const Index n = rng.uniformIndex(1, 5);
    std::vector<DiagonalMetric> blocks;
    for (int j = 0; j < nodes; ++j)
      blocks.push_back(testutil::randomMetric(rng, n, 1e-2, 1e2));
    const BlockDiagonalMetric B(blocks);
    const DenseVector y = rng.normalVector(nodes * n);
    const DenseVector z = consensusAverage(y, B);
    DenseVector residual = DenseVector::Zero(n);
    for (int j = 0; j < nodes; ++j)
      residual += blocks[static_cast<std::size_t>(j)].apply(y.segment(j * n, n) - z);
    CHECK(residual.cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("block separability of the forward step") {
  Rng rng(54);
  const RegressionProblem p = generateRegression(60, 6, Loss::Logistic, 54);
  const ConsensusProblem problem =
      makeConsensusRegression(p, proportionalShards(60, 3), 0.01);
  std::vector<NodeState> nodes;
  std::vector<DenseVector> xs;
  for (int j = 0; j < 3; ++j) {
    nodes.push_back(nodeWith(*problem.localObjectives[static_cast<std::size_t>(j)],
                             rng.normalVector(6), rng.normalVector(6)));
    xs.push_back(nodes.back().x);
  }
  const auto metrics = roundMetrics(nodes, MetricMode::LocalDBB, BBConfig{});
  const auto local = localForwardSteps(nodes, metrics);
  const StackedObjective stacked(problem);
  DenseVector x(18);
  for (int j = 0; j < 3; ++j) x.segment(j * 6, 6) = xs[static_cast<std::size_t>(j)];
  const DenseVector monolithic =
      x - BlockDiagonalMetric(metrics).applyInverse(stacked.gradient(x));
  for (int j = 0; j < 3; ++j)
    CHECK(local[static_cast<std::size_t>(j)] == monolithic.segment(j * 6, 6));
}

TEST_CASE("equal metrics reduce a round to pooled gradient descent") {
  const RegressionProblem p = generateRegression(80, 10, Loss::LeastSquares, 55);
  const int N = 4;
  const ConsensusProblem problem =
      makeConsensusRegression(p, proportionalShards(80, N), 0.01);
  const auto pooled = pooledObjective(p, 0.01);
  Rng rng(55);
  DenseVector x = rng.normalVector(10);
  const double u = 3.0;
  for (int round = 0; round < 20; ++round) {
    std::vector<NodeState> nodes;
    for (const auto& f : problem.localObjectives) nodes.push_back(nodeWith(*f, x, x));
    const std::vector<DiagonalMetric> metrics(N, DiagonalMetric::scalar(10, u));
    std::vector<DenseVector> forward = localForwardSteps(nodes, metrics);
    DenseVector stacked(N * 10);
    for (int j = 0; j < N; ++j) stacked.segment(j * 10, 10) = forward[static_cast<std::size_t>(j)];
    const DenseVector z = consensusAverage(stacked, BlockDiagonalMetric(metrics));
    // z = x - (1/N) sum_j grad f_j / u: stepsize 1/(N u) on the pooled sum
    const DenseVector pg = x - pooled->gradient(x) / (N * u);
    CHECK(testutil::maxAbsDiff(z, pg) <= 1e-12);
    x = z;
  }
}

TEST_CASE("rounds keep every node on the shared iterate") {
  const RegressionProblem p = generateRegression(100, 8, Loss::LeastSquares, 56);
  const ConsensusProblem problem =
      makeConsensusRegression(p, proportionalShards(100, 5), 0.01);
  ConsensusConfig cfg;
  ConsensusState state = initialConsensusState(problem, DenseVector::Zero(8), cfg);
  for (int k = 0; k < 15; ++k) {
    const RoundOutcome out = consensusRound(problem, state, cfg);
    CHECK(out.record.bytesExchanged == 2 * 8 * 5 * 8);
    for (const auto& node : state.nodes) CHECK(node.x == state.z);
  }
}

TEST_CASE("one node reproduces the centralized solver") {
  const auto r = checks::consensusEquivalence(2, {1, 4}, 57);
  CHECK(r.traceLengthsMatch);
  CHECK(r.worstTrajectory <= 1e-10);
  CHECK(r.nonConverged == 0);
  CHECK(r.worstObjectiveRel <= 1e-4);
}

TEST_CASE("parallel evaluation gives bit-identical results") {
  const RegressionProblem p = generateRegression(200, 12, Loss::Logistic, 58);
  const ConsensusProblem problem =
      makeConsensusRegression(p, proportionalShards(200, 6), 1e-3);
  ConsensusConfig cfg;
  cfg.solver.epsTol = 1e-8;
  const ConsensusResult serial = solveConsensus(problem, DenseVector::Zero(12), cfg);
  cfg.parallel = true;
  const ConsensusResult parallel =
      solveConsensus(problem, DenseVector::Zero(12), cfg);
  REQUIRE(serial.trace.size() == parallel.trace.size());
  for (std::size_t i = 0; i < serial.trace.size(); ++i)
    CHECK(serial.trace[i].objective == parallel.trace[i].objective);
  CHECK(serial.solution == parallel.solution);
}

TEST_CASE("local DBB needs no more rounds than local BB") {
  std::vector<double> dbb, bb;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    // N >= 10 n per node on average
    const Index n = 10, nodes = 4, N = 10 * n * nodes;
    const RegressionProblem p =
        generateRegression(N, n, Loss::LeastSquares, 100 + seed);
    const ConsensusProblem problem = makeConsensusRegression(
        p, proportionalShards(N, nodes), defaultLambda(Loss::LeastSquares));
    ConsensusConfig cfg;
    cfg.solver.maxIter = 2000;
    cfg.mode = MetricMode::LocalDBB;
    dbb.push_back(solveConsensus(problem, DenseVector::Zero(n), cfg).rounds());
    cfg.mode = MetricMode::LocalBB;
    bb.push_back(solveConsensus(problem, DenseVector::Zero(n), cfg).rounds());
  }
  MESSAGE("median rounds local DBB " << median(dbb) << " local BB " << median(bb));
  CHECK(median(dbb) <= median(bb));
}

TEST_CASE("problem validation") {
  ConsensusProblem empty;
  empty.sharedDim = 3;
  CHECK_THROWS_AS(empty.validate(), ContractViolation);
  ConsensusProblem mismatch;
  mismatch.sharedDim = 3;
  mismatch.localObjectives.push_back(scaledNorm(2, 1.0));
  CHECK_THROWS_AS(mismatch.validate(), ContractViolation);
  const RegressionProblem p = generateRegression(10, 3, Loss::LeastSquares, 1);
  CHECK_THROWS_AS(makeConsensusRegression(p, {4, 4}, 0.0), ContractViolation);
  for (auto m : {MetricMode::GlobalBB, MetricMode::GlobalDBB,
                 MetricMode::LocalBB, MetricMode::LocalDBB})
    CHECK((parseMetricMode(toString(m)) == m));
}

}

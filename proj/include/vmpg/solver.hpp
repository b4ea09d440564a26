#pragma once

#include "vmpg/core.hpp"
#include "vmpg/stepsize.hpp"

#include <chrono>
#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vmpg {

enum class Method {
  VmpgDbb,  ///< diagonal BB metric
  PgBb,     ///< scalar hybrid BB stepsize, same line search
  PgFixed,  ///< constant stepsize SolverConfig::fixedStep
  Fista,    ///< accelerated proximal gradient, no restart
};

enum class LineSearchMode { Nonmonotone, Monotone, Off };

enum class StoppingRule {
  ForwardStep,              ///< ||y^{k+1} - y^k||_2 <= epsTol on forward points
  RelativeGradientMapping,  ///< ||G(x^k)||_2 / max(1, ||x^k||_2) <= epsTol
  /// ||r|| / max(||grad f(x^{k+1})||, ||U(y^{k+1} - x^{k+1})||) <= epsTol with
  /// r = grad f(x^{k+1}) + U(y^{k+1} - x^{k+1}), an element of dF(x^{k+1}).
  RelativeResidual,
};

enum class SolveStatus { Converged, MaxIter, LineSearchFailure };

std::string_view toString(Method method);
std::string_view toString(LineSearchMode mode);
std::string_view toString(StoppingRule rule);
std::string_view toString(SolveStatus status);
std::optional<Method> parseMethod(std::string_view text);
std::optional<LineSearchMode> parseLineSearch(std::string_view text);
std::optional<StoppingRule> parseStoppingRule(std::string_view text);

struct SolverConfig {
  Method method = Method::VmpgDbb;
  LineSearchMode lineSearch = LineSearchMode::Nonmonotone;
  StoppingRule stopping = StoppingRule::ForwardStep;
  BBConfig bb;
  int mLS = 15;
  double beta = 2.0;
  double epsTol = 1e-4;
  int maxIter = 5000;
  int maxBacktracks = 60;
  /// PgFixed stepsize and initial FISTA stepsize; <= 0 means 1/L when the
  /// objective knows L, else 1.
  double fixedStep = 0.0;

  void validate() const;
};

struct TraceRecord {
  int iter = 0;
  double objective = 0.0;
  double gradMapNorm = 0.0;  ///< ||G_U(x^k)||_{U^{-1}}
  double stepNormU = 0.0;    ///< ||x^{k+1} - x^k||_U
  int backtracks = 0;
  double uMin = 0.0;
  double uMax = 0.0;
  double wallMs = 0.0;
};

/// Thrown when backtracking exceeds SolverConfig::maxBacktracks.
class LineSearchFailure : public NumericalError {
 public:
  LineSearchFailure(int iter, int backtracks, double fHat, double trialObjective,
                    double uMax);

  int iter;
  int backtracks;
  double fHat;
  double trialObjective;
  double uMax;
};

/// Sliding window of recent objective values; max() is the reference value
/// of the non-monotone acceptance test.
class ObjectiveWindow {
 public:
  explicit ObjectiveWindow(std::size_t capacity);

  void push(double value);
  void reset(double value);
  double max() const;
  std::size_t size() const { return values_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::deque<double> values_;
  std::size_t capacity_;
};

struct SolverState {
  DenseVector x;
  DenseVector xPrev;
  DenseVector grad;
  DenseVector gradPrev;
  DenseVector forward;  ///< forward point y^k that produced x^k
  DiagonalMetric metric;
  StepsizeState stepsize;
  ObjectiveWindow history;
  double objective = 0.0;  ///< F(x^k)
  int iter = 0;            ///< k
  std::chrono::steady_clock::time_point started;
};

/// Everything the line search saw for one accepted step.
struct StepEvent {
  int iter;  ///< k of the iterate the step started from
  const DenseVector& x;
  const DenseVector& xNext;
  const DiagonalMetric& metric;  ///< accepted U^k
  double fHat;
  double objective;      ///< F(x^k)
  double objectiveNext;  ///< F(x^{k+1})
  int backtracks;
};

using StepObserver = std::function<void(const StepEvent&)>;

struct StepOutcome {
  TraceRecord record;
  double forwardChange;        ///< ||y^{k+1} - y^k||_2
  double relativeGradMapping;  ///< ||G_U(x^k)||_2 / max(1, ||x^k||_2)
  double relativeResidual;     ///< see StoppingRule::RelativeResidual
};

struct SolveResult {
  DenseVector solution;
  std::vector<TraceRecord> trace;
  SolveStatus status = SolveStatus::MaxIter;
  std::string message;

  int iterations() const { return static_cast<int>(trace.size()); }
  double finalObjective() const;
};

double compositeObjective(const SmoothObjective& f, const ProxRegularizer& g,
                          const DenseVector& x);

/// U (x - prox_{g,U}(x - U^{-1} grad f(x))).
DenseVector gradientMapping(const SmoothObjective& f, const ProxRegularizer& g,
                            const DenseVector& x, const DiagonalMetric& metric);

/// State at k = 0 (x^0 only; x^1 comes from warmUpStep).
SolverState initialState(const SmoothObjective& f, const ProxRegularizer& g,
                         const DenseVector& x0, const SolverConfig& cfg);

/// Produces x^1 with one proximal gradient step of stepsize
/// min(1, 1/||grad f(x^0)||_2) and monotone backtracking.
StepOutcome warmUpStep(const SmoothObjective& f, const ProxRegularizer& g,
                       SolverState& state, const SolverConfig& cfg,
                       const StepObserver& observer = {});

/// One iteration k >= 1: initial metric from the chosen rule, forward and
/// proximal step, backtracking U := beta U until
///   F(x^{k+1}) <= Fhat^k - 1/2 ||x^{k+1} - x^k||_{U^k}^2.
StepOutcome vmpgStep(const SmoothObjective& f, const ProxRegularizer& g,
                     SolverState& state, const SolverConfig& cfg,
                     const StepObserver& observer = {});

/// Same step as vmpgStep, but starting from a caller-chosen metric instead of
/// the stepsize rule. The line search still applies as configured.
StepOutcome metricStep(const SmoothObjective& f, const ProxRegularizer& g,
                       SolverState& state, const SolverConfig& cfg,
                       DiagonalMetric metric,
                       const StepObserver& observer = {});

/// Runs the configured method from x0. Line-search failures end the run with
/// SolveStatus::LineSearchFailure and the last accepted iterate.
SolveResult solve(const SmoothObjective& f, const ProxRegularizer& g,
                  const DenseVector& x0, const SolverConfig& cfg,
                  const StepObserver& observer = {});

/// Accelerated proximal gradient (FISTA). With lineSearch == Off the stepsize
/// stays fixed; otherwise 1/stepsize is multiplied by beta until the
/// quadratic upper bound holds.
SolveResult fista(const SmoothObjective& f, const ProxRegularizer& g,
                  const DenseVector& x0, double stepsize,
                  const SolverConfig& cfg);

}  // namespace vmpg

#include "vmpg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace vmpg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double elapsedMs(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - since)
      .count();
}

double defaultStepsize(const SmoothObjective& f, const SolverConfig& cfg) {
  if (cfg.fixedStep > 0.0) return cfg.fixedStep;
  if (auto L = f.smoothness(); L && *L > 0.0) return 1.0 / *L;
  return 1.0;
}

std::size_t windowCapacity(const SolverConfig& cfg) {
  // Fhat^k = max{F(x^k), ..., F(x^{k - min(M, k-1)})}: at most M + 1 values.
  return cfg.lineSearch == LineSearchMode::Nonmonotone
             ? static_cast<std::size_t>(cfg.mLS) + 1
             : 1;
}

StepOutcome takeStep(const SmoothObjective& f, const ProxRegularizer& g,
                     SolverState& state, const SolverConfig& cfg,
                     DiagonalMetric metric, double fHat, LineSearchMode mode,
                     const StepObserver& observer) {
  int backtracks = 0;
  DenseVector forward;
  DenseVector xNext;
  double objectiveNext = kInf;
  double stepSq = 0.0;
  for (;;) {
    forward = state.x - metric.applyInverse(state.grad);
    if (forward.allFinite()) {
      xNext = g.prox(forward, metric);
      objectiveNext = compositeObjective(f, g, xNext);
      stepSq = unormSquared(xNext - state.x, metric);
      if (mode == LineSearchMode::Off ||
          objectiveNext <= fHat - 0.5 * stepSq) {
        break;
      }
    } else if (mode == LineSearchMode::Off) {
      requireFinite(forward, "forward step");
    }
    if (backtracks >= cfg.maxBacktracks) {
      throw LineSearchFailure(state.iter, backtracks, fHat, objectiveNext,
                              metric.maxEntry());
    }
    metric = metric.scaled(cfg.beta);
    ++backtracks;
  }

  if (observer) {
    observer(StepEvent{state.iter, state.x, xNext, metric, fHat,
                       state.objective, objectiveNext, backtracks});
  }

  const DenseVector mapping = metric.apply(state.x - xNext);
  StepOutcome out;
  out.forwardChange = (forward - state.forward).norm();
  out.relativeGradMapping = mapping.norm() / std::max(1.0, state.x.norm());

  state.xPrev = std::move(state.x);
  state.x = std::move(xNext);
  state.gradPrev = std::move(state.grad);
  state.grad = f.gradient(state.x);
  requireFinite(state.grad, "gradient");
  {
    const DenseVector subgradient = metric.apply(forward - state.x);
    const double denom = std::max(state.grad.norm(), subgradient.norm());
    const double residual = (state.grad + subgradient).norm();
    out.relativeResidual = denom > 0.0 ? residual / denom : residual;
  }
  state.forward = std::move(forward);
  state.objective = objectiveNext;
  state.history.push(objectiveNext);
  ++state.iter;

  TraceRecord& rec = out.record;
  rec.iter = state.iter;
  rec.objective = objectiveNext;
  rec.gradMapNorm = std::sqrt(mapping.dot(metric.applyInverse(mapping)));
  rec.stepNormU = std::sqrt(stepSq);
  rec.backtracks = backtracks;
  rec.uMin = metric.minEntry();
  rec.uMax = metric.maxEntry();
  rec.wallMs = elapsedMs(state.started);

  state.stepsize.prevAlpha =
      std::clamp(1.0 / metric.maxEntry(), cfg.bb.alphaMin, cfg.bb.alphaMax);
  state.stepsize.prevMetric = metric;
  state.metric = std::move(metric);
  return out;
}

bool converged(const StepOutcome& step, const SolverConfig& cfg) {
  switch (cfg.stopping) {
    case StoppingRule::ForwardStep:
      return step.forwardChange <= cfg.epsTol;
    case StoppingRule::RelativeGradientMapping:
      return step.relativeGradMapping <= cfg.epsTol;
    case StoppingRule::RelativeResidual:
      return step.relativeResidual <= cfg.epsTol;
  }
  return false;
}

}  // namespace

std::string_view toString(Method method) {
  switch (method) {
    case Method::VmpgDbb: return "VMPG_DBB";
    case Method::PgBb: return "PG_BB";
    case Method::PgFixed: return "PG_FIXED";
    case Method::Fista: return "FISTA";
  }
  return "?";
}

std::string_view toString(LineSearchMode mode) {
  switch (mode) {
    case LineSearchMode::Nonmonotone: return "nonmonotone";
    case LineSearchMode::Monotone: return "monotone";
    case LineSearchMode::Off: return "off";
  }
  return "?";
}

std::string_view toString(StoppingRule rule) {
  switch (rule) {
    case StoppingRule::ForwardStep: return "forward_step";
    case StoppingRule::RelativeGradientMapping: return "gradient_mapping";
    case StoppingRule::RelativeResidual: return "relative_residual";
  }
  return "?";
}

std::string_view toString(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIter: return "max_iter";
    case SolveStatus::LineSearchFailure: return "line_search_failure";
  }
  return "?";
}

std::optional<Method> parseMethod(std::string_view text) {
  for (Method m : {Method::VmpgDbb, Method::PgBb, Method::PgFixed,
                   Method::Fista}) {
    if (text == toString(m)) return m;
  }
  return std::nullopt;
}

std::optional<LineSearchMode> parseLineSearch(std::string_view text) {
  for (auto m : {LineSearchMode::Nonmonotone, LineSearchMode::Monotone,
                 LineSearchMode::Off}) {
    if (text == toString(m)) return m;
  }
  return std::nullopt;
}

std::optional<StoppingRule> parseStoppingRule(std::string_view text) {
  for (auto r : {StoppingRule::ForwardStep,
                 StoppingRule::RelativeGradientMapping,
                 StoppingRule::RelativeResidual}) {
    if (text == toString(r)) return r;
  }
  return std::nullopt;
}

void SolverConfig::validate() const {
  bb.validate();
  if (mLS < 1) throw ContractViolation("SolverConfig: mLS must be >= 1");
  if (!(beta > 1.0)) throw ContractViolation("SolverConfig: beta must be > 1");
  if (!(epsTol > 0.0)) throw ContractViolation("SolverConfig: epsTol <= 0");
  if (maxIter < 1) throw ContractViolation("SolverConfig: maxIter < 1");
  if (maxBacktracks < 0)
    throw ContractViolation("SolverConfig: maxBacktracks < 0");
  if (method == Method::PgFixed && !(fixedStep >= 0.0))
    throw ContractViolation("SolverConfig: fixedStep must be >= 0");
}

LineSearchFailure::LineSearchFailure(int iter_, int backtracks_, double fHat_,
                                     double trialObjective_, double uMax_)
    : NumericalError([&] {
        std::ostringstream msg;
        msg << "line search failed at iteration " << iter_ << " after "
            << backtracks_ << " backtracks (Fhat = " << fHat_
            << ", last trial F = " << trialObjective_
            << ", max metric entry = " << uMax_
            << "); f may be nonsmooth or its gradient inconsistent";
        return msg.str();
      }()),
      iter(iter_),
      backtracks(backtracks_),
      fHat(fHat_),
      trialObjective(trialObjective_),
      uMax(uMax_) {}

ObjectiveWindow::ObjectiveWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ContractViolation("ObjectiveWindow: capacity 0");
}

void ObjectiveWindow::push(double value) {
  values_.push_back(value);
  while (values_.size() > capacity_) values_.pop_front();
}

void ObjectiveWindow::reset(double value) {
  values_.clear();
  values_.push_back(value);
}

double ObjectiveWindow::max() const {
  if (values_.empty()) return kInf;
  return *std::max_element(values_.begin(), values_.end());
}

double SolveResult::finalObjective() const {
  return trace.empty() ? std::numeric_limits<double>::quiet_NaN()
                       : trace.back().objective;
}

double compositeObjective(const SmoothObjective& f, const ProxRegularizer& g,
                          const DenseVector& x) {
  const double gx = g.value(x);
  if (!std::isfinite(gx)) return kInf;
  return f.value(x) + gx;
}

DenseVector gradientMapping(const SmoothObjective& f, const ProxRegularizer& g,
                            const DenseVector& x,
                            const DiagonalMetric& metric) {
  requireSameSize(f.dim(), x.size(), "gradientMapping");
  const DenseVector forward = x - metric.applyInverse(f.gradient(x));
  return metric.apply(x - g.prox(forward, metric));
}

SolverState initialState(const SmoothObjective& f, const ProxRegularizer& g,
                         const DenseVector& x0, const SolverConfig& cfg) {
  cfg.validate();
  requireSameSize(f.dim(), x0.size(), "solver start point");
  requireFinite(x0, "solver start point");
  DenseVector grad = f.gradient(x0);
  requireFinite(grad, "gradient at start point");
  const Index n = x0.size();
  SolverState state{x0,
                    x0,
                    grad,
                    grad,
                    x0,
                    DiagonalMetric::identity(n),
                    StepsizeState(n),
                    ObjectiveWindow(windowCapacity(cfg)),
                    compositeObjective(f, g, x0),
                    0,
                    std::chrono::steady_clock::now()};
  state.history.reset(state.objective);
  return state;
}

StepOutcome warmUpStep(const SmoothObjective& f, const ProxRegularizer& g,
                       SolverState& state, const SolverConfig& cfg,
                       const StepObserver& observer) {
  if (state.iter != 0) throw ContractViolation("warmUpStep: state.iter != 0");
  const double gradNorm = state.grad.norm();
  const double alpha0 = gradNorm > 0.0 ? std::min(1.0, 1.0 / gradNorm) : 1.0;
  const LineSearchMode mode = cfg.lineSearch == LineSearchMode::Off
                                  ? LineSearchMode::Off
                                  : LineSearchMode::Monotone;
  StepOutcome out =
      takeStep(f, g, state, cfg, DiagonalMetric::scalar(state.x.size(),
                                                        1.0 / alpha0),
               state.objective, mode, observer);
  state.history.reset(state.objective);
  return out;
}

StepOutcome vmpgStep(const SmoothObjective& f, const ProxRegularizer& g,
                     SolverState& state, const SolverConfig& cfg,
                     const StepObserver& observer) {
  if (state.iter < 1) throw ContractViolation("vmpgStep: needs x^0 and x^1");
  const Index n = state.x.size();
  const StepPair sp(state.x - state.xPrev, state.grad - state.gradPrev);

  std::optional<DiagonalMetric> metric;
  switch (cfg.method) {
    case Method::VmpgDbb:
      metric = diagonalBB(sp, cfg.bb, state.stepsize);
      break;
    case Method::PgBb:
      metric = DiagonalMetric::scalar(n, 1.0 / hybridBB(sp, cfg.bb,
                                                        state.stepsize));
      break;
    case Method::PgFixed:
      metric = DiagonalMetric::scalar(n, 1.0 / defaultStepsize(f, cfg));
      break;
    case Method::Fista:
      throw ContractViolation("vmpgStep: FISTA has its own iteration");
  }

  return metricStep(f, g, state, cfg, std::move(*metric), observer);
}

StepOutcome metricStep(const SmoothObjective& f, const ProxRegularizer& g,
                       SolverState& state, const SolverConfig& cfg,
                       DiagonalMetric metric, const StepObserver& observer) {
  requireSameSize(state.x.size(), metric.size(), "metricStep");
  double fHat = kInf;
  if (cfg.lineSearch == LineSearchMode::Nonmonotone) fHat = state.history.max();
  if (cfg.lineSearch == LineSearchMode::Monotone) fHat = state.objective;
  return takeStep(f, g, state, cfg, std::move(metric), fHat, cfg.lineSearch,
                  observer);
}

SolveResult solve(const SmoothObjective& f, const ProxRegularizer& g,
                  const DenseVector& x0, const SolverConfig& cfg,
                  const StepObserver& observer) {
  cfg.validate();
  if (cfg.method == Method::Fista) {
    return fista(f, g, x0, defaultStepsize(f, cfg), cfg);
  }
  SolverState state = initialState(f, g, x0, cfg);
  SolveResult result;
  try {
    StepOutcome step = warmUpStep(f, g, state, cfg, observer);
    result.trace.push_back(step.record);
    while (!converged(step, cfg)) {
      if (state.iter >= cfg.maxIter) {
        result.status = SolveStatus::MaxIter;
        result.solution = state.x;
        return result;
      }
      step = vmpgStep(f, g, state, cfg, observer);
      result.trace.push_back(step.record);
    }
    result.status = SolveStatus::Converged;
  } catch (const LineSearchFailure& e) {
    result.status = SolveStatus::LineSearchFailure;
    result.message = e.what();
  }
  result.solution = state.x;
  return result;
}

SolveResult fista(const SmoothObjective& f, const ProxRegularizer& g,
                  const DenseVector& x0, double stepsize,
                  const SolverConfig& cfg) {
  cfg.validate();
  requireSameSize(f.dim(), x0.size(), "fista start point");
  requireFinite(x0, "fista start point");
  if (!(stepsize > 0.0)) throw ContractViolation("fista: stepsize must be > 0");
  const Index n = x0.size();
  const auto started = std::chrono::steady_clock::now();

  double lipschitz = 1.0 / stepsize;
  double t = 1.0;
  DenseVector x = x0;
  DenseVector extrapolated = x0;
  DenseVector previousForward = x0;

  SolveResult result;
  for (int k = 1; k <= cfg.maxIter; ++k) {
    const DenseVector grad = f.gradient(extrapolated);
    requireFinite(grad, "fista gradient");
    const double fy = f.value(extrapolated);
    int backtracks = 0;
    DenseVector forward;
    DenseVector xNext;
    for (;;) {
      const DiagonalMetric metric = DiagonalMetric::scalar(n, lipschitz);
      forward = extrapolated - grad / lipschitz;
      xNext = g.prox(forward, metric);
      if (cfg.lineSearch == LineSearchMode::Off) break;
      const DenseVector d = xNext - extrapolated;
      if (f.value(xNext) <=
          fy + grad.dot(d) + 0.5 * lipschitz * d.squaredNorm()) {
        break;
      }
      if (backtracks >= cfg.maxBacktracks) {
        result.status = SolveStatus::LineSearchFailure;
        result.message = LineSearchFailure(k - 1, backtracks, fy, kInf,
                                           lipschitz)
                             .what();
        result.solution = x;
        return result;
      }
      lipschitz *= cfg.beta;
      ++backtracks;
    }

    const double tNext = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const DenseVector step = xNext - x;
    const DenseVector mappingStep = extrapolated - xNext;
    const double relativeMapping =
        lipschitz * mappingStep.norm() / std::max(1.0, extrapolated.norm());
    extrapolated = xNext + ((t - 1.0) / tNext) * step;
    x = xNext;
    t = tNext;

    TraceRecord rec;
    rec.iter = k;
    rec.objective = compositeObjective(f, g, x);
    rec.gradMapNorm = std::sqrt(lipschitz) * mappingStep.norm();
    rec.stepNormU = std::sqrt(lipschitz) * step.norm();
    rec.backtracks = backtracks;
    rec.uMin = lipschitz;
    rec.uMax = lipschitz;
    rec.wallMs = elapsedMs(started);
    result.trace.push_back(rec);

    double residual = relativeMapping;
    if (cfg.stopping == StoppingRule::ForwardStep) {
      residual = (forward - previousForward).norm();
    } else if (cfg.stopping == StoppingRule::RelativeResidual) {
      const DenseVector gradNext = f.gradient(x);
      const DenseVector subgradient = lipschitz * (forward - x);
      const double denom = std::max(gradNext.norm(), subgradient.norm());
      residual = (gradNext + subgradient).norm();
      if (denom > 0.0) residual /= denom;
    }
    previousForward = forward;
    if (residual <= cfg.epsTol) {
      result.status = SolveStatus::Converged;
      result.solution = x;
      return result;
    }
  }
  result.status = SolveStatus::MaxIter;
  result.solution = x;
  return result;
}

}  // namespace vmpg

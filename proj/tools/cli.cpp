#include "cli.hpp"

#include "vmpg/problems.hpp"
#include "vmpg/prox.hpp"
#include "vmpg/rng.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace vmpg::cli {
namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string_view trimView(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string> splitList(std::string_view text) {
  std::vector<std::string> items;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = text.find(',', start);
    const auto item = trimView(text.substr(start, comma - start));
    if (!item.empty()) items.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return items;
}

double parseReal(std::string_view key, std::string_view text) {
  text = trimView(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [end, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size() ||
      !std::isfinite(value)) {
    throw UsageError(std::string(key) + ": '" + std::string(text) +
                     "' is not a finite number");
  }
  return value;
}

long long parseInteger(std::string_view key, std::string_view text) {
  text = trimView(text);
  long long value = 0;
  const auto [end, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size()) {
    throw UsageError(std::string(key) + ": '" + std::string(text) +
                     "' is not an integer");
  }
  return value;
}

Index parsePositive(std::string_view key, std::string_view text) {
  const long long v = parseInteger(key, text);
  if (v < 1) throw UsageError(std::string(key) + " must be >= 1");
  return static_cast<Index>(v);
}

// One setting, from either a config file ("section.key") or a flag.
void applySetting(RunSpec& spec, const std::string& key,
                  const std::string& value) {
  ProblemSpec& p = spec.problem;
  SolverConfig& s = spec.solver;
  if (key == "problem.kind") {
    if (value != "qp" && value != "ls" && value != "lr" && value != "csv")
      throw UsageError("problem kind must be qp, ls, lr or csv");
    p.kind = value;
  } else if (key == "problem.n") {
    p.n = parsePositive(key, value);
  } else if (key == "problem.samples") {
    p.samples = parsePositive(key, value);
  } else if (key == "problem.kappa") {
    p.kappa = parseReal(key, value);
    if (p.kappa < 1.0) throw UsageError("kappa must be >= 1");
  } else if (key == "problem.regularizer") {
    static const std::vector<std::string> known{
        "none", "nonneg", "lasso", "elastic_net", "simplex", "group_lasso"};
    if (std::find(known.begin(), known.end(), value) == known.end())
      throw UsageError("unknown regularizer '" + value + "'");
    p.regularizer = value;
  } else if (key == "problem.lambda") {
    p.lambda = parseReal(key, value);
    if (*p.lambda < 0.0) throw UsageError("lambda must be >= 0");
  } else if (key == "problem.lambda2") {
    p.lambda2 = parseReal(key, value);
    if (p.lambda2 < 0.0) throw UsageError("lambda2 must be >= 0");
  } else if (key == "problem.group_size") {
    p.groupSize = parsePositive(key, value);
  } else if (key == "problem.l2") {
    p.l2 = parseReal(key, value);
    if (*p.l2 < 0.0) throw UsageError("l2 must be >= 0");
  } else if (key == "problem.csv") {
    p.csvPath = value;
  } else if (key == "problem.label_column") {
    const long long c = parseInteger(key, value);
    if (c < 0) throw UsageError("label column must be >= 0");
    p.labelColumn = static_cast<Index>(c);
  } else if (key == "problem.loss") {
    if (!parseLoss(value)) throw UsageError("loss must be ls or lr");
    p.loss = value;
  } else if (key == "solver.methods") {
    spec.methods.clear();
    for (const auto& item : splitList(value)) {
      auto m = parseMethod(item);
      if (!m) {
        throw UsageError("unknown method '" + item +
                         "' (VMPG_DBB, PG_BB, PG_FIXED, FISTA)");
      }
      spec.methods.push_back(*m);
    }
  } else if (key == "solver.seeds") {
    spec.seeds = parseSeedList(value);
  } else if (key == "solver.max_iter") {
    s.maxIter = static_cast<int>(parsePositive(key, value));
  } else if (key == "solver.eps_tol") {
    s.epsTol = parseReal(key, value);
    spec.epsTolSet = true;
  } else if (key == "solver.mu") {
    s.bb.mu = parseReal(key, value);
  } else if (key == "solver.mls") {
    s.mLS = static_cast<int>(parsePositive(key, value));
  } else if (key == "solver.beta") {
    s.beta = parseReal(key, value);
  } else if (key == "solver.delta") {
    s.bb.delta = parseReal(key, value);
  } else if (key == "solver.line_search") {
    auto m = parseLineSearch(value);
    if (!m) throw UsageError("line search must be nonmonotone, monotone or off");
    s.lineSearch = *m;
  } else if (key == "solver.stopping") {
    auto r = parseStoppingRule(value);
    if (!r) {
      throw UsageError(
          "stopping must be forward_step, gradient_mapping or "
          "relative_residual");
    }
    s.stopping = *r;
  } else if (key == "solver.fixed_step") {
    s.fixedStep = parseReal(key, value);
  } else if (key == "solver.max_backtracks") {
    const long long b = parseInteger(key, value);
    if (b < 0) throw UsageError("max backtracks must be >= 0");
    s.maxBacktracks = static_cast<int>(b);
  } else if (key == "sweep.mu_values") {
    spec.muValues.clear();
    for (const auto& item : splitList(value))
      spec.muValues.push_back(parseReal(key, item));
  } else if (key == "consensus.nodes") {
    spec.nodes = static_cast<int>(parsePositive(key, value));
  } else if (key == "consensus.shards") {
    if (value != "proportional" && value != "equal")
      throw UsageError("shards must be proportional or equal");
    spec.shards = value;
  } else if (key == "consensus.modes") {
    spec.modes.clear();
    for (const auto& item : splitList(value)) {
      auto m = parseMetricMode(item);
      if (!m) {
        throw UsageError("unknown metric mode '" + item +
                         "' (global_bb, global_dbb, local_bb, local_dbb)");
      }
      spec.modes.push_back(*m);
    }
  } else if (key == "output.dir") {
    spec.outDir = value;
  } else {
    throw UsageError("unknown setting '" + key + "'");
  }
}

void loadConfig(RunSpec& spec, const fs::path& path) {
  if (!fs::exists(path))
    throw UsageError("config file not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw UsageError("config: " + std::string(e.what()));
  }
  for (const auto& [section, entries] : tree) {
    if (entries.empty()) {
      throw UsageError("config: key '" + section + "' outside of a section");
    }
    for (const auto& [key, node] : entries) {
      applySetting(spec, section + "." + key, node.get_value<std::string>());
    }
  }
}

struct FlagInfo {
  const char* flag;
  const char* key;
  const char* help;
};

const std::vector<FlagInfo>& commonFlags() {
  static const std::vector<FlagInfo> flags{
      {"--seed", "solver.seeds", "seeds, e.g. 0,1,2 or 0-19"},
      {"--method", "solver.methods", "methods: VMPG_DBB,PG_BB,PG_FIXED,FISTA"},
      {"--out", "output.dir", "output directory"},
      {"--max-iter", "solver.max_iter", "iteration limit"},
      {"--eps-tol", "solver.eps_tol", "stopping tolerance"},
      {"--mls", "solver.mls", "non-monotone window length"},
      {"--beta", "solver.beta", "backtracking factor (> 1)"},
      {"--delta", "solver.delta", "hybrid BB threshold"},
      {"--line-search", "solver.line_search", "nonmonotone | monotone | off"},
      {"--stopping", "solver.stopping",
       "forward_step | gradient_mapping | relative_residual"},
      {"--fixed-step", "solver.fixed_step", "PG_FIXED / FISTA stepsize"},
      {"--max-backtracks", "solver.max_backtracks", "backtracking limit"},
      {"--problem", "problem.kind", "qp | ls | lr | csv"},
      {"--n", "problem.n", "number of variables"},
      {"--samples", "problem.samples", "regression sample count N"},
      {"--kappa", "problem.kappa", "QP condition number"},
      {"--reg", "problem.regularizer",
       "none | nonneg | lasso | elastic_net | simplex | group_lasso"},
      {"--lambda", "problem.lambda", "regularization weight"},
      {"--lambda2", "problem.lambda2", "elastic net quadratic weight"},
      {"--group-size", "problem.group_size", "group lasso block size"},
      {"--l2", "problem.l2", "smooth l2^2 penalty added to f"},
      {"--csv", "problem.csv", "CSV data file for --problem csv"},
      {"--label-column", "problem.label_column", "0-based label column"},
      {"--loss", "problem.loss", "ls | lr (CSV input)"},
  };
  return flags;
}

// ---------------------------------------------------------------- problems

Loss lossOf(const ProblemSpec& p) {
  if (p.kind == "lr") return Loss::Logistic;
  if (p.kind == "csv") return *parseLoss(p.loss);
  return Loss::LeastSquares;
}

Index sampleCount(const ProblemSpec& p) {
  return p.samples > 0 ? p.samples : std::max<Index>(1, p.n / 5);
}

double lambdaOf(const ProblemSpec& p) {
  if (p.lambda) return *p.lambda;
  return p.kind == "qp" ? 1e-2 : defaultLambda(lossOf(p));
}

std::unique_ptr<ProxRegularizer> makeRegularizer(const ProblemSpec& p,
                                                 Index n) {
  const double lambda = lambdaOf(p);
  if (p.regularizer == "none") return std::make_unique<ZeroRegularizer>();
  if (p.regularizer == "nonneg") return std::make_unique<NonnegativeIndicator>();
  if (p.regularizer == "lasso") return std::make_unique<Lasso>(lambda);
  if (p.regularizer == "elastic_net")
    return std::make_unique<ElasticNet>(lambda, p.lambda2);
  if (p.regularizer == "simplex") return std::make_unique<SimplexIndicator>();
  if (p.regularizer == "group_lasso") {
    std::vector<Index> groups;
    for (Index left = n; left > 0; left -= std::min(left, p.groupSize))
      groups.push_back(std::min(left, p.groupSize));
    return std::make_unique<GroupLasso>(lambda, groups);
  }
  throw UsageError("unknown regularizer '" + p.regularizer + "'");
}

RegressionProblem makeRegression(const ProblemSpec& p, std::uint64_t seed) {
  if (p.kind == "csv") {
    return loadCsv(p.csvPath, p.labelColumn, lossOf(p), p.lambda);
  }
  RegressionOptions options;
  options.lambda = p.lambda;
  return generateRegression(sampleCount(p), p.n, lossOf(p), seed, options);
}

struct Instance {
  std::unique_ptr<SmoothObjective> f;
  std::unique_ptr<ProxRegularizer> g;
};

Instance makeInstance(const ProblemSpec& p, std::uint64_t seed) {
  Instance inst;
  if (p.kind == "qp") {
    inst.f = smoothPart(generateQP(p.n, p.kappa, seed));
  } else {
    inst.f = pooledObjective(makeRegression(p, seed), p.l2.value_or(0.0));
  }
  inst.g = makeRegularizer(p, inst.f->dim());
  return inst;
}

// ------------------------------------------------------------------ output

struct RunRow {
  std::string method;
  std::uint64_t seed = 0;
  int iterations = 0;
  double wallMs = 0.0;
  double finalObjective = 0.0;
  std::string status;
};

std::string joinSeeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(seeds[i]);
  }
  return out;
}

void writeMetadata(std::ostream& os, const RunSpec& spec,
                   std::string_view command, const std::string& seedText) {
  os << "# tool: vmpg " << kToolVersion << '\n'
     << "# command: " << command << '\n'
     << "# config_hash: " << configHash(spec, command) << '\n'
     << "# rng: " << Rng::kAlgorithm << '\n'
     << "# seed: " << seedText << '\n';
}

std::ofstream openOutput(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

template <class Record>
void writeTrace(const fs::path& path, const RunSpec& spec,
                std::string_view command, std::uint64_t seed,
                const std::vector<Record>& trace, bool withBytes) {
  std::ofstream os = openOutput(path);
  writeMetadata(os, spec, command, std::to_string(seed));
  const auto& cols = traceColumns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  if (withBytes) os << ",bytes_exchanged";
  os << '\n';
  for (const auto& r : trace) {
    os << r.iter << ',' << formatDouble(r.objective) << ','
       << formatDouble(r.gradMapNorm) << ',' << formatDouble(r.stepNormU)
       << ',' << r.backtracks << ',' << formatDouble(r.uMin) << ','
       << formatDouble(r.uMax) << ','
       << formatDouble(spec.deterministic ? 0.0 : r.wallMs);
    if constexpr (std::is_same_v<Record, ConsensusTraceRecord>) {
      if (withBytes) os << ',' << r.bytesExchanged;
    }
    os << '\n';
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void writeSummary(const fs::path& path, const RunSpec& spec,
                  std::string_view command, const std::vector<RunRow>& rows,
                  const std::vector<std::string>& methodOrder) {
  std::ofstream os = openOutput(path);
  writeMetadata(os, spec, command, joinSeeds(spec.seeds));
  const auto& cols = summaryColumns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : rows) {
    os << r.method << ',' << r.seed << ',' << r.iterations << ','
       << formatDouble(r.wallMs) << ',' << formatDouble(r.finalObjective)
       << ',' << r.status << ",,,,\n";
  }
  // One aggregate row per method: medians in the base columns, mean and
  // standard deviation in the trailing ones.
  for (const auto& method : methodOrder) {
    std::vector<double> iters, walls, objs;
    int converged = 0;
    for (const auto& r : rows) {
      if (r.method != method) continue;
      iters.push_back(r.iterations);
      walls.push_back(r.wallMs);
      objs.push_back(r.finalObjective);
      converged += r.status == toString(SolveStatus::Converged);
    }
    if (iters.empty()) continue;
    os << method << ",aggregate," << formatDouble(median(iters)) << ','
       << formatDouble(median(walls)) << ',' << formatDouble(median(objs))
       << ",converged " << converged << '/' << iters.size() << ','
       << formatDouble(mean(iters)) << ',' << formatDouble(stddev(iters))
       << ',' << formatDouble(mean(walls)) << ','
       << formatDouble(stddev(walls)) << '\n';
  }
}

RunRow rowFrom(std::string method, std::uint64_t seed, const SolveResult& r,
               bool deterministic) {
  RunRow row;
  row.method = std::move(method);
  row.seed = seed;
  row.iterations = r.iterations();
  row.wallMs =
      deterministic || r.trace.empty() ? 0.0 : r.trace.back().wallMs;
  row.finalObjective = r.finalObjective();
  row.status = std::string(toString(r.status));
  return row;
}

SolverConfig configFor(const RunSpec& spec, Method method) {
  SolverConfig cfg = spec.solver;
  cfg.method = method;
  return cfg;
}

bool allConverged(const std::vector<RunRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const RunRow& r) {
    return r.status == toString(SolveStatus::Converged);
  });
}

std::string fileStem(std::string_view label, std::uint64_t seed) {
  return "trace_" + std::string(label) + "_seed" + std::to_string(seed) +
         ".csv";
}

// ---------------------------------------------------------------- commands

int cmdBench(const RunSpec& spec, std::ostream& out) {
  std::vector<RunRow> rows;
  std::vector<std::string> order;
  for (Method m : spec.methods) order.emplace_back(toString(m));
  for (std::uint64_t seed : spec.seeds) {
    const Instance inst = makeInstance(spec.problem, seed);
    const DenseVector x0 = DenseVector::Zero(inst.f->dim());
    for (Method m : spec.methods) {
      const std::string name(toString(m));
      SolveResult result;
      try {
        result = solve(*inst.f, *inst.g, x0, configFor(spec, m));
      } catch (const NumericalError& e) {
        result.status = SolveStatus::LineSearchFailure;
        result.message = e.what();
      }
      if (!result.message.empty()) {
        out << name << " seed " << seed << ": " << result.message << '\n';
      }
      writeTrace(spec.outDir / fileStem(name, seed), spec, "bench", seed,
                 result.trace, false);
      rows.push_back(rowFrom(name, seed, result, spec.deterministic));
    }
  }
  writeSummary(spec.outDir / "summary.csv", spec, "bench", rows, order);
  out << "wrote " << rows.size() << " runs to " << spec.outDir.string()
      << '\n';
  return allConverged(rows) ? kSuccess : kRuntimeFailure;
}

int cmdSolve(const RunSpec& spec, std::ostream& out) {
  const std::uint64_t seed = spec.seeds.front();
  const Method method = spec.methods.front();
  const Instance inst = makeInstance(spec.problem, seed);
  SolveResult result;
  try {
    result = solve(*inst.f, *inst.g, DenseVector::Zero(inst.f->dim()),
                   configFor(spec, method));
  } catch (const NumericalError& e) {
    result.status = SolveStatus::LineSearchFailure;
    result.message = e.what();
  }
  const std::string name(toString(method));
  writeTrace(spec.outDir / fileStem(name, seed), spec, "solve", seed,
             result.trace, false);
  const RunRow row = rowFrom(name, seed, result, spec.deterministic);
  out << "method,seed,iterations,wall_ms,final_objective,status\n"
      << row.method << ',' << row.seed << ',' << row.iterations << ','
      << formatDouble(row.wallMs) << ',' << formatDouble(row.finalObjective)
      << ',' << row.status << '\n';
  if (!result.message.empty()) out << result.message << '\n';
  return result.status == SolveStatus::Converged ? kSuccess : kRuntimeFailure;
}

int cmdSweepMu(const RunSpec& spec, std::ostream& out) {
  if (spec.muValues.size() < 2)
    throw UsageError("sweep-mu needs at least two values in --mu");
  const Method method = spec.methods.front();
  const fs::path longPath = spec.outDir / "sweep.csv";
  std::ofstream longOs = openOutput(longPath);
  writeMetadata(longOs, spec, "sweep-mu", joinSeeds(spec.seeds));
  longOs << "mu,seed,iter,objective\n";

  std::vector<RunRow> rows;
  std::vector<std::string> order;
  for (double mu : spec.muValues) order.push_back(formatDouble(mu));
  for (std::uint64_t seed : spec.seeds) {
    const Instance inst = makeInstance(spec.problem, seed);
    const DenseVector x0 = DenseVector::Zero(inst.f->dim());
    for (double mu : spec.muValues) {
      SolverConfig cfg = configFor(spec, method);
      cfg.bb.mu = mu;
      SolveResult result;
      try {
        result = solve(*inst.f, *inst.g, x0, cfg);
      } catch (const NumericalError& e) {
        result.status = SolveStatus::LineSearchFailure;
        result.message = e.what();
      }
      for (const auto& r : result.trace) {
        longOs << formatDouble(mu) << ',' << seed << ',' << r.iter << ','
               << formatDouble(r.objective) << '\n';
      }
      rows.push_back(
          rowFrom(formatDouble(mu), seed, result, spec.deterministic));
    }
  }
  writeSummary(spec.outDir / "sweep_summary.csv", spec, "sweep-mu", rows,
               order);
  out << "wrote " << rows.size() << " runs to " << spec.outDir.string()
      << '\n';
  return allConverged(rows) ? kSuccess : kRuntimeFailure;
}

std::vector<Index> shardsFor(const RunSpec& spec, Index N) {
  if (N < spec.nodes)
    throw UsageError("consensus needs at least one sample per node");
  if (spec.shards == "proportional") return proportionalShards(N, spec.nodes);
  std::vector<Index> sizes(static_cast<std::size_t>(spec.nodes),
                           N / spec.nodes);
  sizes.back() += N % spec.nodes;
  return sizes;
}

int cmdConsensus(const RunSpec& spec, std::ostream& out) {
  if (spec.problem.kind == "qp")
    throw UsageError("consensus needs a regression problem (ls, lr or csv)");
  if (spec.problem.regularizer != "none")
    throw UsageError("consensus supports only --reg none (smooth f_j)");
  if (spec.modes.empty()) throw UsageError("no metric modes given");
  const double l2 =
      spec.problem.l2.value_or(defaultLambda(lossOf(spec.problem)));

  std::vector<RunRow> rows;
  std::vector<std::string> order;
  for (MetricMode m : spec.modes) order.emplace_back(toString(m));
  for (std::uint64_t seed : spec.seeds) {
    const RegressionProblem pooled = makeRegression(spec.problem, seed);
    const ConsensusProblem problem =
        makeConsensusRegression(pooled, shardsFor(spec, pooled.samples()), l2);
    const DenseVector x0 = DenseVector::Zero(problem.sharedDim);
    for (MetricMode mode : spec.modes) {
      ConsensusConfig cfg;
      cfg.solver = spec.solver;
      cfg.mode = mode;
      ConsensusResult result;
      try {
        result = solveConsensus(problem, x0, cfg);
      } catch (const NumericalError& e) {
        result.status = SolveStatus::LineSearchFailure;
        result.message = e.what();
      }
      const std::string name(toString(mode));
      writeTrace(spec.outDir / fileStem(name, seed), spec, "consensus", seed,
                 result.trace, true);
      RunRow row;
      row.method = name;
      row.seed = seed;
      row.iterations = result.rounds();
      row.wallMs = spec.deterministic || result.trace.empty()
                       ? 0.0
                       : result.trace.back().wallMs;
      row.finalObjective = result.finalObjective();
      row.status = std::string(toString(result.status));
      rows.push_back(std::move(row));
    }
  }
  writeSummary(spec.outDir / "summary.csv", spec, "consensus", rows, order);
  out << "wrote " << rows.size() << " runs to " << spec.outDir.string()
      << '\n';
  return allConverged(rows) ? kSuccess : kRuntimeFailure;
}

int cmdGen(const RunSpec& spec, std::ostream& out) {
  for (std::uint64_t seed : spec.seeds) {
    const fs::path path =
        spec.outDir / ("problem_seed" + std::to_string(seed) + ".csv");
    std::ofstream os = openOutput(path);
    writeMetadata(os, spec, "gen", std::to_string(seed));
    if (spec.problem.kind == "qp") {
      const QPProblem qp = generateQP(spec.problem.n, spec.problem.kappa, seed);
      os << "q";
      for (Index j = 0; j < qp.Q.cols(); ++j) os << ",Q" << j + 1;
      os << '\n';
      for (Index i = 0; i < qp.Q.rows(); ++i) {
        os << formatDouble(qp.q[i]);
        for (Index j = 0; j < qp.Q.cols(); ++j)
          os << ',' << formatDouble(qp.Q(i, j));
        os << '\n';
      }
    } else {
      const RegressionProblem p = makeRegression(spec.problem, seed);
      os << "b";
      for (Index j = 0; j < p.A.cols(); ++j) os << ",a" << j + 1;
      os << '\n';
      for (Index i = 0; i < p.A.rows(); ++i) {
        os << formatDouble(p.b[i]);
        for (Index j = 0; j < p.A.cols(); ++j)
          os << ',' << formatDouble(p.A(i, j));
        os << '\n';
      }
    }
    out << "wrote " << path.string() << '\n';
  }
  return kSuccess;
}

void finalize(RunSpec& spec, std::string_view command) {
  if (spec.outDir.empty()) {
    const char* env = std::getenv(std::string(kOutDirEnv).c_str());
    spec.outDir = env && *env ? fs::path(env) : fs::path("vmpg-out");
  }
  if (spec.methods.empty()) throw UsageError("no methods given");
  if (spec.seeds.empty()) throw UsageError("no seeds given");
  if (!spec.epsTolSet && spec.problem.kind != "qp" &&
      lossOf(spec.problem) == Loss::Logistic) {
    spec.solver.epsTol = 1e-2;
  }
  try {
    spec.solver.validate();
  } catch (const ContractViolation& e) {
    throw UsageError(e.what());
  }
  if (spec.problem.kind == "qp" && spec.problem.n < 2)
    throw UsageError("QP needs n >= 2");
  if (spec.problem.kind == "csv") {
    if (spec.problem.csvPath.empty()) throw UsageError("--csv is required");
    if (!fs::exists(spec.problem.csvPath))
      throw UsageError("CSV file not found: " + spec.problem.csvPath);
  }
  if (command == "sweep-mu") {
    for (double mu : spec.muValues)
      if (!(mu > 0.0)) throw UsageError("mu values must be > 0");
  }
  std::error_code ec;
  fs::create_directories(spec.outDir, ec);
  if (ec) {
    throw std::runtime_error("cannot create " + spec.outDir.string() + ": " +
                             ec.message());
  }
}

}  // namespace

const std::vector<std::string>& traceColumns() {
  static const std::vector<std::string> cols{
      "iter",       "objective", "grad_map_norm", "step_norm_u",
      "backtracks", "u_min",     "u_max",         "wall_ms"};
  return cols;
}

const std::vector<std::string>& summaryColumns() {
  static const std::vector<std::string> cols{
      "method",          "seed",
      "iterations",      "wall_ms",
      "final_objective", "status",
      "iterations_mean", "iterations_stddev",
      "wall_ms_mean",    "wall_ms_stddev"};
  return cols;
}

std::string formatDouble(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string configHash(const RunSpec& spec, std::string_view command) {
  std::ostringstream os;
  const ProblemSpec& p = spec.problem;
  const SolverConfig& s = spec.solver;
  os << command << '|' << p.kind << '|' << p.n << '|' << p.samples << '|'
     << formatDouble(p.kappa) << '|' << p.regularizer << '|'
     << (p.lambda ? formatDouble(*p.lambda) : "default") << '|'
     << formatDouble(p.lambda2) << '|' << p.groupSize << '|'
     << (p.l2 ? formatDouble(*p.l2) : "default") << '|' << p.csvPath << '|'
     << p.labelColumn << '|' << p.loss << '|';
  for (Method m : spec.methods) os << toString(m) << ';';
  os << '|' << joinSeeds(spec.seeds) << '|' << s.maxIter << '|'
     << formatDouble(s.epsTol) << '|' << formatDouble(s.bb.mu) << '|'
     << formatDouble(s.bb.delta) << '|' << s.mLS << '|'
     << formatDouble(s.beta) << '|' << toString(s.lineSearch) << '|'
     << toString(s.stopping) << '|' << formatDouble(s.fixedStep) << '|'
     << s.maxBacktracks << '|';
  for (double mu : spec.muValues) os << formatDouble(mu) << ';';
  os << '|' << spec.nodes << '|' << spec.shards << '|';
  for (MetricMode m : spec.modes) os << toString(m) << ';';

  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : os.str()) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

std::vector<std::uint64_t> parseSeedList(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : splitList(text)) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      const long long v = parseInteger("seed", item);
      if (v < 0) throw UsageError("seeds must be >= 0");
      seeds.push_back(static_cast<std::uint64_t>(v));
      continue;
    }
    const long long lo = parseInteger("seed", item.substr(0, dash));
    const long long hi = parseInteger("seed", item.substr(dash + 1));
    if (lo < 0 || hi < lo) throw UsageError("bad seed range '" + item + "'");
    for (long long v = lo; v <= hi; ++v)
      seeds.push_back(static_cast<std::uint64_t>(v));
  }
  if (seeds.empty()) throw UsageError("empty seed list");
  return seeds;
}

int runCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Variable metric proximal gradient benchmarks", "vmpg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  struct Command {
    const char* name;
    const char* help;
    std::function<int(const RunSpec&, std::ostream&)> run;
    std::function<void(RunSpec&)> defaults;
  };
  const std::vector<Command> commands{
      {"bench", "run every (seed, method) pair and summarize", cmdBench, {}},
      {"sweep-mu", "run one method for several mu values", cmdSweepMu,
       [](RunSpec& s) { s.methods = {Method::VmpgDbb}; }},
      {"consensus", "distributed consensus regression", cmdConsensus,
       [](RunSpec& s) {
         s.problem.kind = "ls";
         s.problem.regularizer = "none";
       }},
      {"gen", "write generated problems as CSV", cmdGen, {}},
      {"solve", "single run of one method on one seed", cmdSolve, {}},
  };

  std::map<std::string, std::string> values;
  std::string configPath;
  std::string muText;
  std::string nodesText;
  std::string shardsText;
  std::string modesText;
  bool deterministic = false;
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", configPath, "INI file with run settings");
    for (const auto& f : commonFlags()) {
      sub->add_option(f.flag, values[f.key], f.help);
    }
    sub->add_option("--mu", muText,
                    std::string(c.name) == "sweep-mu"
                        ? "comma-separated mu values"
                        : "diagonal BB regularization weight");
    if (std::string(c.name) == "consensus") {
      sub->add_option("--nodes", nodesText, "number of nodes");
      sub->add_option("--shards", shardsText, "proportional | equal");
      sub->add_option("--modes", modesText,
                      "global_bb, global_dbb, local_bb, local_dbb");
    }
    sub->add_flag("--deterministic", deterministic,
                  "write wall_ms as 0 so reruns are byte-identical");
    subs[c.name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    for (const auto& [name, sub] : subs)
      if (sub->parsed()) out << sub->help();
    return kSuccess;
  } catch (const CLI::CallForVersion&) {
    out << "vmpg " << kToolVersion << '\n';
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }

  for (const auto& c : commands) {
    CLI::App* sub = subs.at(c.name);
    if (!sub->parsed()) continue;
    RunSpec spec;
    try {
      if (c.defaults) c.defaults(spec);
      if (!configPath.empty()) loadConfig(spec, configPath);
      for (const auto& f : commonFlags()) {
        if (sub->count(f.flag) > 0) applySetting(spec, f.key, values[f.key]);
      }
      if (sub->count("--mu") > 0) {
        applySetting(spec,
                     std::string(c.name) == "sweep-mu" ? "sweep.mu_values"
                                                       : "solver.mu",
                     muText);
      }
      if (std::string(c.name) == "consensus") {
        if (sub->count("--nodes") > 0)
          applySetting(spec, "consensus.nodes", nodesText);
        if (sub->count("--shards") > 0)
          applySetting(spec, "consensus.shards", shardsText);
        if (sub->count("--modes") > 0)
          applySetting(spec, "consensus.modes", modesText);
      }
      spec.deterministic = deterministic;
      finalize(spec, c.name);
    } catch (const UsageError& e) {
      err << "error: " << e.what() << '\n';
      return kUsageError;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kRuntimeFailure;
    }

    try {
      return c.run(spec, out);
    } catch (const UsageError& e) {
      err << "error: " << e.what() << '\n';
      return kUsageError;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kRuntimeFailure;
    }
  }
  err << "error: no command\n";
  return kUsageError;
}

}  // namespace vmpg::cli

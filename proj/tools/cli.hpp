#pragma once

#include "vmpg/consensus.hpp"
#include "vmpg/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vmpg::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kOutDirEnv = "VMPG_OUT_DIR";

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kRuntimeFailure = 2 };

struct ProblemSpec {
  std::string kind = "qp";  ///< qp | ls | lr | csv
  Index n = 200;
  Index samples = 0;  ///< 0: N = n / 5
  double kappa = 1e4;
  std::string regularizer = "nonneg";  ///< none | nonneg | lasso | elastic_net | simplex | group_lasso
  std::optional<double> lambda;        ///< default depends on the loss
  double lambda2 = 1e-2;               ///< elastic net quadratic weight
  Index groupSize = 10;
  std::optional<double> l2;  ///< smooth l2^2 penalty folded into f
  std::string csvPath;
  Index labelColumn = 0;
  std::string loss = "ls";  ///< loss for csv input
};

struct RunSpec {
  ProblemSpec problem;
  std::vector<Method> methods{Method::VmpgDbb, Method::PgBb};
  std::vector<std::uint64_t> seeds{0};
  SolverConfig solver;
  bool epsTolSet = false;
  std::vector<double> muValues;
  int nodes = 4;
  std::string shards = "proportional";  ///< proportional | equal
  std::vector<MetricMode> modes{MetricMode::GlobalBB, MetricMode::LocalBB,
                                MetricMode::LocalDBB};
  std::filesystem::path outDir;
  bool deterministic = false;  ///< write wall_ms as 0
};

/// Column names of every trace file, in order.
const std::vector<std::string>& traceColumns();
const std::vector<std::string>& summaryColumns();

/// Decimal with 17 significant digits.
std::string formatDouble(double value);

/// FNV-1a 64-bit hash of the resolved run description (output directory
/// and timing switches excluded), as 16 hex digits.
std::string configHash(const RunSpec& spec, std::string_view command);

/// "0,2,5-7" -> {0, 2, 5, 6, 7}.
std::vector<std::uint64_t> parseSeedList(std::string_view text);

/// Entry point of the `vmpg` tool. Never throws; returns an ExitCode.
int runCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);

}  // namespace vmpg::cli

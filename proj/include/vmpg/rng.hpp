#pragma once

#include "vmpg/core.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

namespace vmpg {

/// Seeded generator with a fixed sampling algorithm. std::normal_distribution
/// differs between standard libraries, so normals come from our own
/// Box-Muller transform on top of the (portable) mt19937_64 stream.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64/box-muller";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double normal();
  DenseVector normalVector(Index n);
  DenseMatrix normalMatrix(Index rows, Index cols);
  DenseVector uniformVector(Index n, double lo, double hi);
  /// Uniform integer in [lo, hi].
  Index uniformIndex(Index lo, Index hi);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace vmpg

#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace gambo {

inline constexpr int kSobolMaxDim = 256;

namespace detail {
struct SobolDirection {
  std::uint32_t poly;
  std::uint32_t m[18];
};
extern const SobolDirection kSobolDirections[kSobolMaxDim];
}  // namespace detail

/// First n points of the d-dimensional Sobol sequence in [0,1)^d.
///
/// Convention: the all-zero point at index 0 is skipped, so the first point
/// is (0.5, ..., 0.5) when unscrambled. With scramble = true every coordinate
/// is XOR-shifted by a seed-derived 32-bit digital shift, which keeps the
/// net structure. Throws std::invalid_argument for d outside [1, 256].
Eigen::MatrixXd sobol_sample(int n, int d, std::uint64_t seed, bool scramble = true);

}  // namespace gambo

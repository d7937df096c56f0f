#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace gambo {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to spread seeds before they reach a generator.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent stream seed from a root seed and a component tag.
/// derive_seed(root, "critic-batch") is stable across platforms and releases.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) noexcept {
  return splitmix64(splitmix64(root) ^ fnv1a64(tag));
}

inline Rng make_rng(std::uint64_t root, std::string_view tag) {
  return Rng(derive_seed(root, tag));
}

/// Matrix of independent standard normal draws.
inline Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  // Row-major fill order so that adding columns never reshuffles earlier rows.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
  return out;
}

}  // namespace gambo

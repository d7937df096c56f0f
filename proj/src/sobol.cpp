#include "gambo/sobol.hpp"

#include <array>
#include <bit>
#include <stdexcept>
#include <string>
#include <vector>

#include "gambo/rng.hpp"

namespace gambo {

namespace {

constexpr int kBits = 32;

std::array<std::uint32_t, kBits> direction_numbers(int dim) {
  std::array<std::uint32_t, kBits> v{};
  if (dim == 0) {
    for (int j = 0; j < kBits; ++j) v[j] = 1u << (kBits - 1 - j);
    return v;
  }
  const auto& dir = detail::kSobolDirections[dim];
  const int s = std::bit_width(dir.poly) - 1;
  const std::uint32_t a = (dir.poly >> 1) & ((1u << (s - 1)) - 1u);
  for (int j = 0; j < s && j < kBits; ++j) v[j] = dir.m[j] << (kBits - 1 - j);
  for (int j = s; j < kBits; ++j) {
    std::uint32_t x = v[j - s] ^ (v[j - s] >> s);
    for (int k = 1; k < s; ++k)
      if ((a >> (s - 1 - k)) & 1u) x ^= v[j - k];
    v[j] = x;
  }
  return v;
}

}  // namespace

Eigen::MatrixXd sobol_sample(int n, int d, std::uint64_t seed, bool scramble) {
  if (d < 1 || d > kSobolMaxDim)
    throw std::invalid_argument("sobol_sample: dimension " + std::to_string(d) + " unsupported (1.." +
                                std::to_string(kSobolMaxDim) + ")");
  if (n < 0) throw std::invalid_argument("sobol_sample: negative count");
  std::vector<std::array<std::uint32_t, kBits>> v(static_cast<std::size_t>(d));
  std::vector<std::uint32_t> shift(static_cast<std::size_t>(d), 0u);
  Rng rng(derive_seed(seed, "sobol-scramble"));
  for (int j = 0; j < d; ++j) {
    v[static_cast<std::size_t>(j)] = direction_numbers(j);
    if (scramble) shift[static_cast<std::size_t>(j)] = static_cast<std::uint32_t>(rng() >> 32);
  }

  Eigen::MatrixXd out(n, d);
  std::vector<std::uint32_t> x(static_cast<std::size_t>(d), 0u);
  constexpr double kNorm = 1.0 / 4294967296.0;
  // Gray-code order: point i differs from point i-1 by the direction number
  // indexed by the lowest zero bit of i-1.
  for (int i = 1; i <= n; ++i) {
    const int c = std::countr_one(static_cast<std::uint32_t>(i - 1));
    for (int j = 0; j < d; ++j) {
      auto& xj = x[static_cast<std::size_t>(j)];
      xj ^= v[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
      out(i - 1, j) = static_cast<double>(xj ^ shift[static_cast<std::size_t>(j)]) * kNorm;
    }
  }
  return out;
}

}  // namespace gambo

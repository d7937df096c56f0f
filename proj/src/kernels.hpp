#pragma once

// Dense products with a fixed per-element summation order.
//
// Every output element is the dot product of two contiguous rows accumulated
// in four interleaved lanes and reduced as (l0 + l1) + (l2 + l3), followed by a
// scalar tail. The order depends only on the inner length, so a row of a
// batched product is bit-identical to the same product computed alone.

#include <cstddef>

#include "gambo/nets.hpp"

namespace gambo::detail {

typedef double v4d __attribute__((vector_size(32)));

inline v4d load4(const double* p) {
  v4d v;
  __builtin_memcpy(&v, p, sizeof(v));
  return v;
}

inline double finish(v4d acc, const double* a, const double* b, std::size_t k, std::size_t n) {
  double s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  for (; k < n; ++k) s += a[k] * b[k];
  return s;
}

inline double dot(const double* a, const double* b, std::size_t n) {
  v4d acc = {0.0, 0.0, 0.0, 0.0};
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) acc += load4(a + k) * load4(b + k);
  return finish(acc, a, b, k, n);
}

template <int MI, int NJ>
inline void tile(const double* A, const double* B, std::size_t n, double* C, std::size_t ldc) {
  v4d acc[MI][NJ] = {};
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    v4d x[MI], y[NJ];
    for (int a = 0; a < MI; ++a) x[a] = load4(A + a * n + k);
    for (int b = 0; b < NJ; ++b) y[b] = load4(B + b * n + k);
    for (int a = 0; a < MI; ++a)
      for (int b = 0; b < NJ; ++b) acc[a][b] += x[a] * y[b];
  }
  for (int a = 0; a < MI; ++a)
    for (int b = 0; b < NJ; ++b) C[a * ldc + b] = finish(acc[a][b], A + a * n, B + b * n, k, n);
}

/// C(i, j) = dot(A.row(i), B.row(j)) for row-major A (m x n) and B (p x n).
inline void gemm_nt(const RowMatrix& A, const RowMatrix& B, RowMatrix& C) {
  const std::size_t m = static_cast<std::size_t>(A.rows());
  const std::size_t p = static_cast<std::size_t>(B.rows());
  const std::size_t n = static_cast<std::size_t>(A.cols());
  C.resize(A.rows(), B.rows());
  constexpr std::size_t kBlockJ = 48;
  for (std::size_t j0 = 0; j0 < p; j0 += kBlockJ) {
    const std::size_t j1 = j0 + kBlockJ < p ? j0 + kBlockJ : p;
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      std::size_t j = j0;
      for (; j + 3 <= j1; j += 3) tile<4, 3>(A.data() + i * n, B.data() + j * n, n, C.data() + i * p + j, p);
      for (; j < j1; ++j) tile<4, 1>(A.data() + i * n, B.data() + j * n, n, C.data() + i * p + j, p);
    }
    for (; i < m; ++i)
      for (std::size_t j = j0; j < j1; ++j) C(i, j) = dot(A.data() + i * n, B.data() + j * n, n);
  }
}

}  // namespace gambo::detail

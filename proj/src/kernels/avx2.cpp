// Copyright 2026 The qelim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Compiled with -mavx2 -mfma. Nothing in this translation unit may run before
// dispatch has confirmed CPU support, so it holds no static initialisers.

#include <immintrin.h>

#include <vector>

#include "qelim/kernels.hpp"

namespace qelim::kernels::avx2 {
namespace {

constexpr std::size_t kBlockK = 256;
constexpr std::size_t kBlockM = 96;

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// R rows by 4*W columns register tile: C += A(R x kc) * B(kc x 4W).
template <int R, int W>
inline void tile(std::size_t kc, const double* a, std::size_t lda, const double* b, std::size_t ldb,
                 double* c, std::size_t ldc) {
  __m256d acc[R][W];
  for (int r = 0; r < R; ++r)
    for (int w = 0; w < W; ++w) acc[r][w] = _mm256_loadu_pd(c + r * ldc + 4 * w);
  for (std::size_t p = 0; p < kc; ++p) {
    __m256d bv[W];
    for (int w = 0; w < W; ++w) bv[w] = _mm256_loadu_pd(b + p * ldb + 4 * w);
    for (int r = 0; r < R; ++r) {
      const __m256d av = _mm256_broadcast_sd(a + r * lda + p);
      for (int w = 0; w < W; ++w) acc[r][w] = _mm256_fmadd_pd(av, bv[w], acc[r][w]);
    }
  }
  for (int r = 0; r < R; ++r)
    for (int w = 0; w < W; ++w) _mm256_storeu_pd(c + r * ldc + 4 * w, acc[r][w]);
}

// All rows of C against one packed strip of B (kc x 4W, contiguous).
template <int W>
inline void strip(std::size_t m, std::size_t kc, const double* a, std::size_t lda, const double* bp, double* c,
                  std::size_t ldc) {
  constexpr std::size_t ldb = 4 * W;
  std::size_t i = 0;
  for (; i + 6 <= m; i += 6) tile<6, W>(kc, a + i * lda, lda, bp, ldb, c + i * ldc, ldc);
  switch (m - i) {
    case 5: tile<5, W>(kc, a + i * lda, lda, bp, ldb, c + i * ldc, ldc); break;
    case 4: tile<4, W>(kc, a + i * lda, lda, bp, ldb, c + i * ldc, ldc); break;
    case 3: tile<3, W>(kc, a + i * lda, lda, bp, ldb, c + i * ldc, ldc); break;
    case 2: tile<2, W>(kc, a + i * lda, lda, bp, ldb, c + i * ldc, ldc); break;
    case 1: tile<1, W>(kc, a + i * lda, lda, bp, ldb, c + i * ldc, ldc); break;
    default: break;
  }
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
  }
  for (; i + 4 <= n; i += 4) s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
  double sum = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  // Each k-block of B is packed into contiguous strips of 8 (then 4) columns,
  // and A is walked in row blocks that stay cache-resident across strips.
  const std::size_t n8 = n / 8 * 8;
  const std::size_t n4 = n8 + (n - n8) / 4 * 4;
  thread_local std::vector<double> packed;
  packed.resize(kBlockK * n4);
  for (std::size_t p0 = 0; p0 < k; p0 += kBlockK) {
    const std::size_t kc = (k - p0 < kBlockK) ? k - p0 : kBlockK;
    const double* bp = b + p0 * ldb;
    const double* ap = a + p0;
    for (std::size_t j = 0; j < n8; j += 8)
      for (std::size_t p = 0; p < kc; ++p)
        for (int w = 0; w < 8; ++w) packed[j * kc + p * 8 + w] = bp[p * ldb + j + w];
    for (std::size_t j = n8; j < n4; j += 4)
      for (std::size_t p = 0; p < kc; ++p)
        for (int w = 0; w < 4; ++w) packed[j * kc + p * 4 + w] = bp[p * ldb + j + w];

    for (std::size_t i0 = 0; i0 < m; i0 += kBlockM) {
      const std::size_t mc = (m - i0 < kBlockM) ? m - i0 : kBlockM;
      const double* ai = ap + i0 * lda;
      double* ci = c + i0 * ldc;
      for (std::size_t j = 0; j < n8; j += 8) strip<2>(mc, kc, ai, lda, packed.data() + j * kc, ci + j, ldc);
      for (std::size_t j = n8; j < n4; j += 4) strip<1>(mc, kc, ai, lda, packed.data() + j * kc, ci + j, ldc);
      for (std::size_t j = n4; j < n; ++j)
        for (std::size_t i = 0; i < mc; ++i) {
          double s = ci[i * ldc + j];
          for (std::size_t p = 0; p < kc; ++p) s += ai[i * lda + p] * bp[p * ldb + j];
          ci[i * ldc + j] = s;
        }
    }
  }
}

}  // namespace qelim::kernels::avx2

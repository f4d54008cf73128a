/*
   Copyright 2026 The hclm Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

// Compiled with -mavx2 -mfma; only reached after a cpuid check.

#include <immintrin.h>

#include "kernels_impl.hpp"

namespace hclm::kernels::detail {
namespace {

inline double hsum(__m256d v)
{
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double *a, const double *b, std::size_t n)
{
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i)
        acc += a[i] * b[i];
    return acc;
}

void axpy_avx2(double alpha, const double *x, double *y, std::size_t n)
{
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i)
        y[i] += alpha * x[i];
}

void gemv_avx2(const double *w, std::size_t rows, std::size_t cols,
               const double *x, double *y)
{
    for (std::size_t r = 0; r < rows; ++r)
        y[r] += dot_avx2(w + r * cols, x, cols);
}

void gemv_t_avx2(const double *w, std::size_t rows, std::size_t cols,
                 const double *g, double *x)
{
    for (std::size_t r = 0; r < rows; ++r) {
        if (g[r] != 0.0)
            axpy_avx2(g[r], w + r * cols, x, cols);
    }
}

void ger_avx2(double *w, std::size_t rows, std::size_t cols,
              const double *a, const double *b)
{
    for (std::size_t r = 0; r < rows; ++r) {
        if (a[r] != 0.0)
            axpy_avx2(a[r], b, w + r * cols, cols);
    }
}

} // namespace

const KernelTable avx2_table = {
    Isa::avx2, dot_avx2, axpy_avx2, gemv_avx2, gemv_t_avx2, ger_avx2,
};

} // namespace hclm::kernels::detail

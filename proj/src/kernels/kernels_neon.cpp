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

// AArch64 Advanced SIMD variant; NEON is part of the base ISA there.

#include <arm_neon.h>

#include "kernels_impl.hpp"

namespace hclm::kernels::detail {
namespace {

double dot_neon(const double *a, const double *b, std::size_t n)
{
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i)
        acc += a[i] * b[i];
    return acc;
}

void axpy_neon(double alpha, const double *x, double *y, std::size_t n)
{
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i)
        y[i] += alpha * x[i];
}

void gemv_neon(const double *w, std::size_t rows, std::size_t cols,
               const double *x, double *y)
{
    for (std::size_t r = 0; r < rows; ++r)
        y[r] += dot_neon(w + r * cols, x, cols);
}

void gemv_t_neon(const double *w, std::size_t rows, std::size_t cols,
                 const double *g, double *x)
{
    for (std::size_t r = 0; r < rows; ++r) {
        if (g[r] != 0.0)
            axpy_neon(g[r], w + r * cols, x, cols);
    }
}

void ger_neon(double *w, std::size_t rows, std::size_t cols,
              const double *a, const double *b)
{
    for (std::size_t r = 0; r < rows; ++r) {
        if (a[r] != 0.0)
            axpy_neon(a[r], b, w + r * cols, cols);
    }
}

} // namespace

const KernelTable neon_table = {
    Isa::neon, dot_neon, axpy_neon, gemv_neon, gemv_t_neon, ger_neon,
};

} // namespace hclm::kernels::detail

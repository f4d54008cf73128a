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

#include "kernels_impl.hpp"

namespace hclm::kernels::detail {
namespace {

double dot_scalar(const double *a, const double *b, std::size_t n)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double *x, double *y, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i)
        y[i] += alpha * x[i];
}

void gemv_scalar(const double *w, std::size_t rows, std::size_t cols,
                 const double *x, double *y)
{
    for (std::size_t r = 0; r < rows; ++r)
        y[r] += dot_scalar(w + r * cols, x, cols);
}

void gemv_t_scalar(const double *w, std::size_t rows, std::size_t cols,
                   const double *g, double *x)
{
    for (std::size_t r = 0; r < rows; ++r) {
        if (g[r] != 0.0)
            axpy_scalar(g[r], w + r * cols, x, cols);
    }
}

void ger_scalar(double *w, std::size_t rows, std::size_t cols,
                const double *a, const double *b)
{
    for (std::size_t r = 0; r < rows; ++r) {
        if (a[r] != 0.0)
            axpy_scalar(a[r], b, w + r * cols, cols);
    }
}

} // namespace

const KernelTable scalar_table = {
    Isa::scalar, dot_scalar, axpy_scalar, gemv_scalar, gemv_t_scalar, ger_scalar,
};

} // namespace hclm::kernels::detail

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

#pragma once

// Dense double-precision kernels behind every mat-vec in the cells.
//
// Each kernel exists as a scalar reference and, where the target supports
// it, an AVX2+FMA (x86-64) or NEON (aarch64) variant. The variant is picked
// once per process from the CPU feature bits; setting HCLM_SIMD=scalar in the
// environment forces the reference path. The vector variants reorder the
// floating-point reductions, so results agree with the reference to rounding
// only, never bit-exactly.

#include <cstddef>
#include <string_view>

namespace hclm::kernels {

enum class Isa
{
    scalar,
    avx2,
    neon,
};

std::string_view isa_name(Isa isa) noexcept;

struct KernelTable
{
    Isa isa;

    // sum_i a[i] * b[i]
    double (*dot)(const double *a, const double *b, std::size_t n);

    // y += alpha * x
    void (*axpy)(double alpha, const double *x, double *y, std::size_t n);

    // y += W x, W is rows x cols row-major
    void (*gemv)(const double *w, std::size_t rows, std::size_t cols,
                 const double *x, double *y);

    // x += W^T g
    void (*gemv_t)(const double *w, std::size_t rows, std::size_t cols,
                   const double *g, double *x);

    // W += a b^T, a has `rows` entries and b has `cols`
    void (*ger)(double *w, std::size_t rows, std::size_t cols,
                const double *a, const double *b);
};

// Kernel table in use for this process.
const KernelTable &active() noexcept;

// True when `isa` can run on this machine and was compiled in.
bool available(Isa isa) noexcept;

// Table for a specific ISA; throws ArgumentError when unavailable.
const KernelTable &table(Isa isa);

} // namespace hclm::kernels

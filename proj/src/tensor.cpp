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

#include "hclm/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "hclm/error.hpp"
#include "hclm/kernels.hpp"

namespace hclm {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill)
{
}

void Matrix::fill(double v)
{
    std::fill(data_.begin(), data_.end(), v);
}

std::string shape_string(std::size_t rows, std::size_t cols)
{
    return std::to_string(rows) + "x" + std::to_string(cols);
}

void gemv_acc(const Matrix &w, std::span<const double> x, std::span<double> y)
{
    if (x.size() != w.cols() || y.size() != w.rows())
        throw DimensionError("gemv: matrix " + shape_string(w.rows(), w.cols()) + " with x of " +
                             std::to_string(x.size()) + " and y of " + std::to_string(y.size()));
    kernels::active().gemv(w.data(), w.rows(), w.cols(), x.data(), y.data());
}

void gemv_t_acc(const Matrix &w, std::span<const double> g, std::span<double> x)
{
    if (g.size() != w.rows() || x.size() != w.cols())
        throw DimensionError("gemv_t: matrix " + shape_string(w.rows(), w.cols()) + " with g of " +
                             std::to_string(g.size()) + " and x of " + std::to_string(x.size()));
    kernels::active().gemv_t(w.data(), w.rows(), w.cols(), g.data(), x.data());
}

void ger_acc(Matrix &w, std::span<const double> a, std::span<const double> b)
{
    if (a.size() != w.rows() || b.size() != w.cols())
        throw DimensionError("ger: matrix " + shape_string(w.rows(), w.cols()) + " with a of " +
                             std::to_string(a.size()) + " and b of " + std::to_string(b.size()));
    kernels::active().ger(w.data(), w.rows(), w.cols(), a.data(), b.data());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y)
{
    if (x.size() != y.size())
        throw DimensionError("axpy: sizes " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
    kernels::active().axpy(alpha, x.data(), y.data(), x.size());
}

double dot(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw DimensionError("dot: sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    return kernels::active().dot(a.data(), b.data(), a.size());
}

double logistic(double z) noexcept
{
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

bool all_finite(std::span<const double> v) noexcept
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void fill_uniform(std::span<double> v, double lo, double hi, std::mt19937_64 &rng)
{
    // Explicit mapping from raw 64-bit draws keeps initial weights identical
    // across standard library implementations.
    for (double &x : v) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        x = lo + (hi - lo) * u;
    }
}

} // namespace hclm

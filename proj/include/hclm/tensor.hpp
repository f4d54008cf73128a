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

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hclm {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix
{
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double &operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double *data() noexcept { return data_.data(); }
    const double *data() const noexcept { return data_.data(); }

    void fill(double v);

    friend bool operator==(const Matrix &, const Matrix &) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Thin wrappers over the active kernel table. All of them accumulate into
// their output and check shapes, throwing DimensionError on mismatch.

// y += W x
void gemv_acc(const Matrix &w, std::span<const double> x, std::span<double> y);
// x += W^T g
void gemv_t_acc(const Matrix &w, std::span<const double> g, std::span<double> x);
// W += a b^T
void ger_acc(Matrix &w, std::span<const double> a, std::span<const double> b);
// y += alpha x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b);

double logistic(double z) noexcept;

bool all_finite(std::span<const double> v) noexcept;

void fill_uniform(std::span<double> v, double lo, double hi, std::mt19937_64 &rng);

std::string shape_string(std::size_t rows, std::size_t cols);

} // namespace hclm

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

// Recurrent cells with external clock and reset signals.
//
// A cell is a recurrence s_t = f(x_t, s_{t-1}) with output y_t = h_t. The
// clocked/reset wrapper evaluates
//
//     s_t = (1 - c_t)(1 - r_t) s_{t-1} + c_t f(x_t, (1 - r_t) s_{t-1})
//
// with c_t, r_t in {0, 1}. With c_t = 0 the state is copied through
// unchanged (or zeroed when r_t = 1); the inner cell is not evaluated.
//
// Cell types (LstmCell, ElmanCell) expose the same static interface so the
// wrapper and the sequence-level backward pass are written once.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hclm/tensor.hpp"

namespace hclm {

enum class PeepholeKind
{
    diagonal, // one weight per memory cell
    full,     // dense hidden x hidden matrices
};

std::string_view to_string(PeepholeKind kind) noexcept;
PeepholeKind parse_peephole(std::string_view text);

// A named view of one parameter block, used for serialization, optimizers
// and gradient checking.
struct ParamBlock
{
    std::string name;
    std::size_t rows;
    std::size_t cols;
    std::span<double> values;
};

struct ConstParamBlock
{
    std::string name;
    std::size_t rows;
    std::size_t cols;
    std::span<const double> values;
};

struct CellState
{
    Vector m; // memory cell; empty for Elman
    Vector h; // output activation

    static CellState zeros(std::size_t hidden, bool with_memory);
    bool finite() const noexcept;

    friend bool operator==(const CellState &, const CellState &) = default;
};

// Everything needed to replay one clocked/reset step backwards.
struct TapeStep
{
    int clock = 1;
    int reset = 0;
    Vector x;
    CellState prev; // state the inner cell actually saw, i.e. (1 - r) s_{t-1}
    CellState next;
    // LSTM gate activations; empty for Elman and for unclocked steps.
    Vector i, f, g, o, tanh_m;
};

struct LstmParams
{
    PeepholeKind peephole = PeepholeKind::diagonal;
    Matrix W_ix, W_ih, W_im;
    Matrix W_fx, W_fh, W_fm;
    Matrix W_mx, W_mh;
    Matrix W_ox, W_oh, W_om;
    Vector b_i, b_f, b_m, b_o;

    static LstmParams zeros(std::size_t input_dim, std::size_t hidden_dim, PeepholeKind peephole);

    std::size_t input_dim() const noexcept { return W_ix.cols(); }
    std::size_t hidden_dim() const noexcept { return W_ix.rows(); }
    std::size_t parameter_count() const noexcept;

    void visit(const std::string &prefix, const std::function<void(ParamBlock)> &fn);
    void visit(const std::string &prefix, const std::function<void(ConstParamBlock)> &fn) const;

    friend bool operator==(const LstmParams &, const LstmParams &) = default;
};

struct ElmanParams
{
    Matrix W_hx, W_hh;
    Vector b_h;

    static ElmanParams zeros(std::size_t input_dim, std::size_t hidden_dim);

    std::size_t input_dim() const noexcept { return W_hx.cols(); }
    std::size_t hidden_dim() const noexcept { return W_hx.rows(); }

    void visit(const std::string &prefix, const std::function<void(ParamBlock)> &fn);
    void visit(const std::string &prefix, const std::function<void(ConstParamBlock)> &fn) const;

    friend bool operator==(const ElmanParams &, const ElmanParams &) = default;
};

// Numerically stable softmax; throws NumericError on non-finite input.
Vector softmax(std::span<const double> z);

// h_t = sigma(W_hx x + W_hh h_prev + b_h)
Vector elman_step(const Matrix &W_hx, const Matrix &W_hh, std::span<const double> b_h,
                  std::span<const double> x, std::span<const double> h_prev);

std::pair<CellState, TapeStep> lstm_step(const LstmParams &params, std::span<const double> x,
                                         const CellState &prev);

struct LstmCell
{
    using Params = LstmParams;

    static CellState zero_state(const Params &p) { return CellState::zeros(p.hidden_dim(), true); }

    // Unclocked update; fills the gate fields of `tape` when non-null.
    static CellState forward(const Params &p, std::span<const double> x, const CellState &prev, TapeStep *tape);

    // `dstate` holds dL/ds_t on entry and dL/d(prev) on exit. Adds parameter
    // gradients into `grads` and input gradients into `dx`.
    static void backward(const Params &p, const TapeStep &tape, CellState &dstate, std::span<double> dx,
                         Params &grads);
};

struct ElmanCell
{
    using Params = ElmanParams;

    static CellState zero_state(const Params &p) { return CellState::zeros(p.hidden_dim(), false); }
    static CellState forward(const Params &p, std::span<const double> x, const CellState &prev, TapeStep *tape);
    static void backward(const Params &p, const TapeStep &tape, CellState &dstate, std::span<double> dx,
                         Params &grads);
};

// Clocked update without reset.
template <class Cell>
CellState clocked_step(const typename Cell::Params &p, std::span<const double> x, const CellState &prev, int clock,
                       TapeStep *tape = nullptr);

// Clocked update with reset. Throws ArgumentError for signals outside {0,1}.
template <class Cell>
CellState clocked_reset_step(const typename Cell::Params &p, std::span<const double> x, const CellState &prev,
                             int clock, int reset, TapeStep *tape = nullptr);

// Backward through one clocked/reset step. `dstate` is dL/ds_t on entry and
// dL/ds_{t-1} on exit; `dx` (input-sized) receives dL/dx_t.
template <class Cell>
void clocked_reset_backward(const typename Cell::Params &p, const TapeStep &tape, CellState &dstate,
                            std::span<double> dx, typename Cell::Params &grads);

template <class Cell>
struct SequenceGradients
{
    typename Cell::Params params;
    std::vector<Vector> inputs;
    CellState initial_state;
};

// Reverse-mode gradients of a sequence of clocked/reset steps, given
// dL/dy_t for every step. Throws ArgumentError on length mismatch.
template <class Cell>
SequenceGradients<Cell> cell_backward(const typename Cell::Params &p, std::span<const TapeStep> tape,
                                      std::span<const Vector> output_grads);

} // namespace hclm

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

#include "hclm/cells.hpp"

#include <algorithm>
#include <cmath>

#include "hclm/error.hpp"

namespace hclm {
namespace {

void check_signal(int v, const char *name)
{
    if (v != 0 && v != 1)
        throw ArgumentError(std::string(name) + " signal must be 0 or 1, got " + std::to_string(v));
}

void check_input(std::size_t expected, std::size_t got, const char *what)
{
    if (expected != got)
        throw DimensionError(std::string(what) + ": expected " + std::to_string(expected) + " values, got " +
                             std::to_string(got));
}

// a += P m with P either dense or diagonal (hidden x 1).
void add_peephole(const Matrix &P, PeepholeKind kind, std::span<const double> m, std::span<double> a)
{
    if (kind == PeepholeKind::full) {
        gemv_acc(P, m, a);
        return;
    }
    for (std::size_t k = 0; k < a.size(); ++k)
        a[k] += P(k, 0) * m[k];
}

// dm += P^T da and dP += da m^T (dense) or da o m (diagonal).
void peephole_backward(const Matrix &P, PeepholeKind kind, std::span<const double> da, std::span<const double> m,
                       std::span<double> dm, Matrix &dP)
{
    if (kind == PeepholeKind::full) {
        gemv_t_acc(P, da, dm);
        ger_acc(dP, da, m);
        return;
    }
    for (std::size_t k = 0; k < da.size(); ++k) {
        dm[k] += P(k, 0) * da[k];
        dP(k, 0) += da[k] * m[k];
    }
}

void visit_matrix(const std::string &prefix, const char *name, Matrix &m, const std::function<void(ParamBlock)> &fn)
{
    fn(ParamBlock{prefix + name, m.rows(), m.cols(), m.values()});
}

void visit_matrix(const std::string &prefix, const char *name, const Matrix &m,
                  const std::function<void(ConstParamBlock)> &fn)
{
    fn(ConstParamBlock{prefix + name, m.rows(), m.cols(), m.values()});
}

void visit_vector(const std::string &prefix, const char *name, Vector &v, const std::function<void(ParamBlock)> &fn)
{
    fn(ParamBlock{prefix + name, v.size(), 1, v});
}

void visit_vector(const std::string &prefix, const char *name, const Vector &v,
                  const std::function<void(ConstParamBlock)> &fn)
{
    fn(ConstParamBlock{prefix + name, v.size(), 1, v});
}

template <class P, class Fn>
void visit_lstm(P &p, const std::string &prefix, const Fn &fn)
{
    visit_matrix(prefix, "W_ix", p.W_ix, fn);
    visit_matrix(prefix, "W_ih", p.W_ih, fn);
    visit_matrix(prefix, "W_im", p.W_im, fn);
    visit_matrix(prefix, "W_fx", p.W_fx, fn);
    visit_matrix(prefix, "W_fh", p.W_fh, fn);
    visit_matrix(prefix, "W_fm", p.W_fm, fn);
    visit_matrix(prefix, "W_mx", p.W_mx, fn);
    visit_matrix(prefix, "W_mh", p.W_mh, fn);
    visit_matrix(prefix, "W_ox", p.W_ox, fn);
    visit_matrix(prefix, "W_oh", p.W_oh, fn);
    visit_matrix(prefix, "W_om", p.W_om, fn);
    visit_vector(prefix, "b_i", p.b_i, fn);
    visit_vector(prefix, "b_f", p.b_f, fn);
    visit_vector(prefix, "b_m", p.b_m, fn);
    visit_vector(prefix, "b_o", p.b_o, fn);
}

template <class P, class Fn>
void visit_elman(P &p, const std::string &prefix, const Fn &fn)
{
    visit_matrix(prefix, "W_hx", p.W_hx, fn);
    visit_matrix(prefix, "W_hh", p.W_hh, fn);
    visit_vector(prefix, "b_h", p.b_h, fn);
}

} // namespace

std::string_view to_string(PeepholeKind kind) noexcept
{
    return kind == PeepholeKind::full ? "full" : "diagonal";
}

PeepholeKind parse_peephole(std::string_view text)
{
    if (text == "diagonal")
        return PeepholeKind::diagonal;
    if (text == "full")
        return PeepholeKind::full;
    throw ConfigError("unknown peephole kind '" + std::string(text) + "' (expected diagonal or full)");
}

CellState CellState::zeros(std::size_t hidden, bool with_memory)
{
    CellState s;
    s.h.assign(hidden, 0.0);
    if (with_memory)
        s.m.assign(hidden, 0.0);
    return s;
}

bool CellState::finite() const noexcept
{
    return all_finite(m) && all_finite(h);
}

LstmParams LstmParams::zeros(std::size_t input_dim, std::size_t hidden_dim, PeepholeKind peephole)
{
    if (hidden_dim == 0)
        throw DimensionError("LSTM hidden dimension must be positive");
    const std::size_t peep_cols = peephole == PeepholeKind::full ? hidden_dim : 1;
    LstmParams p;
    p.peephole = peephole;
    p.W_ix = p.W_fx = p.W_mx = p.W_ox = Matrix(hidden_dim, input_dim);
    p.W_ih = p.W_fh = p.W_mh = p.W_oh = Matrix(hidden_dim, hidden_dim);
    p.W_im = p.W_fm = p.W_om = Matrix(hidden_dim, peep_cols);
    p.b_i = p.b_f = p.b_m = p.b_o = Vector(hidden_dim, 0.0);
    return p;
}

std::size_t LstmParams::parameter_count() const noexcept
{
    std::size_t n = 0;
    visit("", std::function<void(ConstParamBlock)>([&](ConstParamBlock b) { n += b.values.size(); }));
    return n;
}

void LstmParams::visit(const std::string &prefix, const std::function<void(ParamBlock)> &fn)
{
    visit_lstm(*this, prefix, fn);
}

void LstmParams::visit(const std::string &prefix, const std::function<void(ConstParamBlock)> &fn) const
{
    visit_lstm(*this, prefix, fn);
}

ElmanParams ElmanParams::zeros(std::size_t input_dim, std::size_t hidden_dim)
{
    if (hidden_dim == 0)
        throw DimensionError("Elman hidden dimension must be positive");
    ElmanParams p;
    p.W_hx = Matrix(hidden_dim, input_dim);
    p.W_hh = Matrix(hidden_dim, hidden_dim);
    p.b_h.assign(hidden_dim, 0.0);
    return p;
}

void ElmanParams::visit(const std::string &prefix, const std::function<void(ParamBlock)> &fn)
{
    visit_elman(*this, prefix, fn);
}

void ElmanParams::visit(const std::string &prefix, const std::function<void(ConstParamBlock)> &fn) const
{
    visit_elman(*this, prefix, fn);
}

Vector softmax(std::span<const double> z)
{
    if (z.empty())
        throw DimensionError("softmax of an empty vector");
    if (!all_finite(z))
        throw NumericError("softmax input contains NaN or Inf");
    const double zmax = *std::max_element(z.begin(), z.end());
    Vector p(z.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
        p[k] = std::exp(z[k] - zmax);
        sum += p[k];
    }
    for (double &v : p)
        v /= sum;
    return p;
}

Vector elman_step(const Matrix &W_hx, const Matrix &W_hh, std::span<const double> b_h, std::span<const double> x,
                  std::span<const double> h_prev)
{
    if (W_hh.rows() != W_hh.cols() || W_hx.rows() != W_hh.rows() || b_h.size() != W_hh.rows())
        throw DimensionError("elman_step: inconsistent parameter shapes");
    Vector a(b_h.begin(), b_h.end());
    gemv_acc(W_hx, x, a);
    gemv_acc(W_hh, h_prev, a);
    for (double &v : a)
        v = logistic(v);
    return a;
}

std::pair<CellState, TapeStep> lstm_step(const LstmParams &params, std::span<const double> x, const CellState &prev)
{
    TapeStep tape;
    CellState next = LstmCell::forward(params, x, prev, &tape);
    return {std::move(next), std::move(tape)};
}

CellState LstmCell::forward(const Params &p, std::span<const double> x, const CellState &prev, TapeStep *tape)
{
    const std::size_t H = p.hidden_dim();
    check_input(p.input_dim(), x.size(), "lstm input");
    check_input(H, prev.h.size(), "lstm previous h");
    check_input(H, prev.m.size(), "lstm previous m");

    Vector i(p.b_i), f(p.b_f), g(p.b_m), o(p.b_o);
    gemv_acc(p.W_ix, x, i);
    gemv_acc(p.W_ih, prev.h, i);
    add_peephole(p.W_im, p.peephole, prev.m, i);
    gemv_acc(p.W_fx, x, f);
    gemv_acc(p.W_fh, prev.h, f);
    add_peephole(p.W_fm, p.peephole, prev.m, f);
    gemv_acc(p.W_mx, x, g);
    gemv_acc(p.W_mh, prev.h, g);

    CellState next;
    next.m.resize(H);
    next.h.resize(H);
    for (std::size_t k = 0; k < H; ++k) {
        i[k] = logistic(i[k]);
        f[k] = logistic(f[k]);
        g[k] = std::tanh(g[k]);
        next.m[k] = f[k] * prev.m[k] + i[k] * g[k];
    }

    gemv_acc(p.W_ox, x, o);
    gemv_acc(p.W_oh, prev.h, o);
    add_peephole(p.W_om, p.peephole, next.m, o);
    Vector tanh_m(H);
    for (std::size_t k = 0; k < H; ++k) {
        o[k] = logistic(o[k]);
        tanh_m[k] = std::tanh(next.m[k]);
        next.h[k] = o[k] * tanh_m[k];
    }

    if (tape != nullptr) {
        tape->x.assign(x.begin(), x.end());
        tape->prev = prev;
        tape->next = next;
        tape->i = std::move(i);
        tape->f = std::move(f);
        tape->g = std::move(g);
        tape->o = std::move(o);
        tape->tanh_m = std::move(tanh_m);
    }
    return next;
}

void LstmCell::backward(const Params &p, const TapeStep &tape, CellState &dstate, std::span<double> dx, Params &grads)
{
    const std::size_t H = p.hidden_dim();
    check_input(p.input_dim(), dx.size(), "lstm dx");
    const Vector &m_prev = tape.prev.m;
    const Vector &h_prev = tape.prev.h;
    const Vector &m = tape.next.m;

    Vector da_i(H), da_f(H), da_g(H), da_o(H);
    Vector dm(H);
    for (std::size_t k = 0; k < H; ++k) {
        const double o = tape.o[k];
        da_o[k] = dstate.h[k] * tape.tanh_m[k] * o * (1.0 - o);
        dm[k] = dstate.m[k] + dstate.h[k] * o * (1.0 - tape.tanh_m[k] * tape.tanh_m[k]);
    }
    // The output gate peeks at m_t, so its gradient flows into dm before the
    // other gates are differentiated.
    peephole_backward(p.W_om, p.peephole, da_o, m, dm, grads.W_om);

    Vector dm_prev(H), dh_prev(H, 0.0);
    for (std::size_t k = 0; k < H; ++k) {
        const double i = tape.i[k], f = tape.f[k], g = tape.g[k];
        da_i[k] = dm[k] * g * i * (1.0 - i);
        da_g[k] = dm[k] * i * (1.0 - g * g);
        da_f[k] = dm[k] * m_prev[k] * f * (1.0 - f);
        dm_prev[k] = dm[k] * f;
    }
    peephole_backward(p.W_im, p.peephole, da_i, m_prev, dm_prev, grads.W_im);
    peephole_backward(p.W_fm, p.peephole, da_f, m_prev, dm_prev, grads.W_fm);

    gemv_t_acc(p.W_ix, da_i, dx);
    gemv_t_acc(p.W_fx, da_f, dx);
    gemv_t_acc(p.W_mx, da_g, dx);
    gemv_t_acc(p.W_ox, da_o, dx);
    gemv_t_acc(p.W_ih, da_i, dh_prev);
    gemv_t_acc(p.W_fh, da_f, dh_prev);
    gemv_t_acc(p.W_mh, da_g, dh_prev);
    gemv_t_acc(p.W_oh, da_o, dh_prev);

    ger_acc(grads.W_ix, da_i, tape.x);
    ger_acc(grads.W_fx, da_f, tape.x);
    ger_acc(grads.W_mx, da_g, tape.x);
    ger_acc(grads.W_ox, da_o, tape.x);
    ger_acc(grads.W_ih, da_i, h_prev);
    ger_acc(grads.W_fh, da_f, h_prev);
    ger_acc(grads.W_mh, da_g, h_prev);
    ger_acc(grads.W_oh, da_o, h_prev);
    axpy(1.0, da_i, grads.b_i);
    axpy(1.0, da_f, grads.b_f);
    axpy(1.0, da_g, grads.b_m);
    axpy(1.0, da_o, grads.b_o);

    dstate.m = std::move(dm_prev);
    dstate.h = std::move(dh_prev);
}

CellState ElmanCell::forward(const Params &p, std::span<const double> x, const CellState &prev, TapeStep *tape)
{
    check_input(p.input_dim(), x.size(), "elman input");
    check_input(p.hidden_dim(), prev.h.size(), "elman previous h");
    CellState next;
    next.h = elman_step(p.W_hx, p.W_hh, p.b_h, x, prev.h);
    if (tape != nullptr) {
        tape->x.assign(x.begin(), x.end());
        tape->prev = prev;
        tape->next = next;
    }
    return next;
}

void ElmanCell::backward(const Params &p, const TapeStep &tape, CellState &dstate, std::span<double> dx,
                         Params &grads)
{
    const std::size_t H = p.hidden_dim();
    check_input(p.input_dim(), dx.size(), "elman dx");
    Vector da(H);
    for (std::size_t k = 0; k < H; ++k) {
        const double h = tape.next.h[k];
        da[k] = dstate.h[k] * h * (1.0 - h);
    }
    Vector dh_prev(H, 0.0);
    gemv_t_acc(p.W_hx, da, dx);
    gemv_t_acc(p.W_hh, da, dh_prev);
    ger_acc(grads.W_hx, da, tape.x);
    ger_acc(grads.W_hh, da, tape.prev.h);
    axpy(1.0, da, grads.b_h);
    dstate.h = std::move(dh_prev);
}

template <class Cell>
CellState clocked_step(const typename Cell::Params &p, std::span<const double> x, const CellState &prev, int clock,
                       TapeStep *tape)
{
    return clocked_reset_step<Cell>(p, x, prev, clock, 0, tape);
}

template <class Cell>
CellState clocked_reset_step(const typename Cell::Params &p, std::span<const double> x, const CellState &prev,
                             int clock, int reset, TapeStep *tape)
{
    check_signal(clock, "clock");
    check_signal(reset, "reset");
    if (tape != nullptr) {
        *tape = TapeStep{};
        tape->clock = clock;
        tape->reset = reset;
    }
    if (clock == 0) {
        if (reset == 0)
            return prev;
        return Cell::zero_state(p);
    }
    if (reset == 1)
        return Cell::forward(p, x, Cell::zero_state(p), tape);
    return Cell::forward(p, x, prev, tape);
}

template <class Cell>
void clocked_reset_backward(const typename Cell::Params &p, const TapeStep &tape, CellState &dstate,
                            std::span<double> dx, typename Cell::Params &grads)
{
    if (tape.clock == 1)
        Cell::backward(p, tape, dstate, dx, grads);
    if (tape.reset == 1) {
        std::fill(dstate.m.begin(), dstate.m.end(), 0.0);
        std::fill(dstate.h.begin(), dstate.h.end(), 0.0);
    }
}

namespace {

LstmParams zeros_like(const LstmParams &p)
{
    return LstmParams::zeros(p.input_dim(), p.hidden_dim(), p.peephole);
}

ElmanParams zeros_like(const ElmanParams &p)
{
    return ElmanParams::zeros(p.input_dim(), p.hidden_dim());
}

} // namespace

template <class Cell>
SequenceGradients<Cell> cell_backward(const typename Cell::Params &p, std::span<const TapeStep> tape,
                                      std::span<const Vector> output_grads)
{
    if (tape.size() != output_grads.size())
        throw ArgumentError("cell_backward: tape has " + std::to_string(tape.size()) + " steps but " +
                            std::to_string(output_grads.size()) + " output gradients were given");
    SequenceGradients<Cell> out{zeros_like(p), std::vector<Vector>(tape.size()), Cell::zero_state(p)};
    CellState &dstate = out.initial_state;
    for (std::size_t t = tape.size(); t-- > 0;) {
        check_input(p.hidden_dim(), output_grads[t].size(), "cell_backward output gradient");
        axpy(1.0, output_grads[t], dstate.h);
        out.inputs[t].assign(p.input_dim(), 0.0);
        clocked_reset_backward<Cell>(p, tape[t], dstate, out.inputs[t], out.params);
    }
    return out;
}

template CellState clocked_step<LstmCell>(const LstmParams &, std::span<const double>, const CellState &, int,
                                          TapeStep *);
template CellState clocked_step<ElmanCell>(const ElmanParams &, std::span<const double>, const CellState &, int,
                                           TapeStep *);
template CellState clocked_reset_step<LstmCell>(const LstmParams &, std::span<const double>, const CellState &, int,
                                                int, TapeStep *);
template CellState clocked_reset_step<ElmanCell>(const ElmanParams &, std::span<const double>, const CellState &,
                                                 int, int, TapeStep *);
template void clocked_reset_backward<LstmCell>(const LstmParams &, const TapeStep &, CellState &, std::span<double>,
                                               LstmParams &);
template void clocked_reset_backward<ElmanCell>(const ElmanParams &, const TapeStep &, CellState &,
                                                std::span<double>, ElmanParams &);
template SequenceGradients<LstmCell> cell_backward<LstmCell>(const LstmParams &, std::span<const TapeStep>,
                                                             std::span<const Vector>);
template SequenceGradients<ElmanCell> cell_backward<ElmanCell>(const ElmanParams &, std::span<const TapeStep>,
                                                               std::span<const Vector>);

} // namespace hclm

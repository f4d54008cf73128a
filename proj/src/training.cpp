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

#include "hclm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "hclm/error.hpp"
#include "hclm/eval.hpp"

namespace hclm {
namespace {

// Gradient reduction granularity. Fixed so results do not depend on the
// worker count.
constexpr std::size_t kReductionGroups = 4;

std::vector<std::span<double>> param_spans(NetworkParams &p)
{
    std::vector<std::span<double>> out;
    p.visit(std::function<void(ParamBlock)>([&](ParamBlock b) { out.push_back(b.values); }));
    return out;
}

std::vector<ConstParamBlock> param_blocks(const NetworkParams &p)
{
    std::vector<ConstParamBlock> out;
    p.visit(std::function<void(ConstParamBlock)>([&](ConstParamBlock b) { out.push_back(b); }));
    return out;
}

void add_into(NetworkParams &dst, const NetworkParams &src)
{
    auto d = param_spans(dst);
    const auto s = param_blocks(src);
    for (std::size_t b = 0; b < d.size(); ++b)
        axpy(1.0, s[b].values, d[b]);
}

void zero(NetworkParams &p)
{
    for (auto span : param_spans(p))
        std::fill(span.begin(), span.end(), 0.0);
}

// Portable uniform index in [0, n).
std::size_t uniform_index(std::mt19937_64 &rng, std::size_t n)
{
    const auto u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n)));
}

double nats_to_bits(double nats, std::size_t count)
{
    if (count == 0)
        return std::numeric_limits<double>::quiet_NaN();
    return nats / (static_cast<double>(count) * std::numbers::ln2);
}

struct WindowResult
{
    double loss = 0.0;
    std::size_t targets = 0;
};

} // namespace

void TrainConfig::validate() const
{
    if (bptt_length < 1)
        throw ConfigError("bptt_length must be >= 1");
    if (batch_size < 1)
        throw ConfigError("batch_size must be >= 1");
    if (!(adadelta_rho > 0.0 && adadelta_rho < 1.0))
        throw ConfigError("adadelta rho must lie in (0,1)");
    if (!(adadelta_eps > 0.0))
        throw ConfigError("adadelta eps must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw ConfigError("momentum must lie in [0,1)");
    if (clip_norm && !(*clip_norm > 0.0))
        throw ConfigError("clip_norm must be > 0");
    if (threads < 1)
        throw ConfigError("threads must be >= 1");
}

std::vector<Block> batch_sequences(const std::vector<TokenSequence> &corpus, std::size_t batch_size,
                                   std::size_t bptt_length)
{
    if (corpus.empty())
        throw DataError("empty training corpus");
    if (batch_size < 1 || bptt_length < 1)
        throw ArgumentError("batch_size and bptt_length must be >= 1");

    const std::size_t streams = std::min(batch_size, corpus.size());
    std::vector<std::vector<Window>> per_stream(streams);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const std::size_t s = i % streams;
        const auto &ids = corpus[i].ids;
        if (ids.size() < 2)
            continue;
        const std::size_t steps = ids.size() - 1;
        for (std::size_t start = 0; start < steps; start += bptt_length) {
            const std::size_t len = std::min(bptt_length, steps - start);
            Window w;
            w.stream = s;
            w.inputs.assign(ids.begin() + static_cast<std::ptrdiff_t>(start),
                            ids.begin() + static_cast<std::ptrdiff_t>(start + len));
            w.targets.assign(ids.begin() + static_cast<std::ptrdiff_t>(start + 1),
                             ids.begin() + static_cast<std::ptrdiff_t>(start + len + 1));
            w.continues = start > 0;
            per_stream[s].push_back(std::move(w));
        }
    }

    std::size_t depth = 0;
    for (const auto &s : per_stream)
        depth = std::max(depth, s.size());
    std::vector<Block> blocks(depth);
    for (std::size_t d = 0; d < depth; ++d) {
        for (auto &s : per_stream) {
            if (d < s.size())
                blocks[d].push_back(std::move(s[d]));
        }
    }
    return blocks;
}

OptimizerState OptimizerState::for_params(const NetworkParams &params)
{
    OptimizerState opt;
    for (const auto &b : param_blocks(params)) {
        opt.mean_sq_grad.emplace_back(b.values.size(), 0.0);
        opt.mean_sq_delta.emplace_back(b.values.size(), 0.0);
        opt.velocity.emplace_back(b.values.size(), 0.0);
    }
    return opt;
}

void adadelta_nesterov_update(std::span<double> params, std::span<const double> grads, std::span<double> mean_sq_grad,
                              std::span<double> mean_sq_delta, std::span<double> velocity, double rho, double eps,
                              double momentum, double grad_scale)
{
    const std::size_t n = params.size();
    if (grads.size() != n || mean_sq_grad.size() != n || mean_sq_delta.size() != n || velocity.size() != n)
        throw DimensionError("optimizer state does not match the parameter block");
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i] * grad_scale;
        mean_sq_grad[i] = rho * mean_sq_grad[i] + (1.0 - rho) * g * g;
        const double delta = -std::sqrt(mean_sq_delta[i] + eps) / std::sqrt(mean_sq_grad[i] + eps) * g;
        mean_sq_delta[i] = rho * mean_sq_delta[i] + (1.0 - rho) * delta * delta;
        velocity[i] = momentum * velocity[i] + delta;
        params[i] += momentum * velocity[i] + delta;
    }
}

void adadelta_nesterov_update(NetworkParams &params, const NetworkParams &grads, OptimizerState &opt,
                              const TrainConfig &config)
{
    auto p = param_spans(params);
    const auto g = param_blocks(grads);
    if (g.size() != p.size() || opt.mean_sq_grad.size() != p.size())
        throw DimensionError("gradient/optimizer layout does not match the parameters");

    double sq_norm = 0.0;
    for (const auto &block : g) {
        if (!all_finite(block.values))
            throw NumericError("non-finite gradient in parameter block '" + block.name + "'");
        for (double v : block.values)
            sq_norm += v * v;
    }
    double scale = 1.0;
    if (config.clip_norm) {
        const double norm = std::sqrt(sq_norm);
        if (norm > *config.clip_norm)
            scale = *config.clip_norm / norm;
    }
    for (std::size_t b = 0; b < p.size(); ++b)
        adadelta_nesterov_update(p[b], g[b].values, opt.mean_sq_grad[b], opt.mean_sq_delta[b], opt.velocity[b],
                                 config.adadelta_rho, config.adadelta_eps, config.momentum, scale);
}

double sequence_loss(const Network &net, std::span<const int> ids)
{
    return sequence_log_loss(net, ids).nats;
}

double sequence_loss_and_gradient(const Network &net, std::span<const int> ids, NetworkParams &grads)
{
    if (ids.size() < 2)
        return 0.0;
    const auto inputs = ids.first(ids.size() - 1);
    const ClockPlan clocks = derive_clocks(inputs, net.spec.clock_triggers, net.spec.levels);
    const ForwardResult fwd = hrnn_forward(net, inputs, clocks, initial_state(net.spec), true);
    return hrnn_backward(net, fwd.tape, ids.subspan(1), grads);
}

TrainResult train(const NetworkSpec &spec, const std::vector<TokenSequence> &train_set,
                  const std::vector<TokenSequence> &heldout_set, const TrainConfig &config, const TrainHooks &hooks)
{
    config.validate();
    spec.validate();
    if (train_set.empty())
        throw DataError("empty training corpus");

    Network net{spec, build_network(spec, config.seed)};
    OptimizerState opt = OptimizerState::for_params(net.params);
    std::mt19937_64 shuffle_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);

    TrainResult result;
    double best = std::numeric_limits<double>::infinity();
    std::vector<TokenSequence> order = train_set;
    for (auto &seq : order)
        seq.ids = with_sentence_start(spec, seq.ids);

    std::vector<NetworkParams> group_grads(kReductionGroups, zero_params(spec));
    NetworkParams grads = zero_params(spec);

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        if (config.shuffle) {
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);
        }
        const std::vector<Block> blocks = batch_sequences(order, config.batch_size, config.bptt_length);
        std::vector<NetworkState> stream_state(std::min(config.batch_size, order.size()), initial_state(spec));

        double epoch_loss = 0.0;
        std::size_t epoch_targets = 0;
        for (const Block &block : blocks) {
            const std::size_t groups = std::min(kReductionGroups, block.size());
            std::vector<WindowResult> window_results(block.size());

            auto run_group = [&](std::size_t g) {
                NetworkParams &acc = group_grads[g];
                zero(acc);
                const std::size_t lo = g * block.size() / groups;
                const std::size_t hi = (g + 1) * block.size() / groups;
                for (std::size_t w = lo; w < hi; ++w) {
                    const Window &win = block[w];
                    NetworkState &state = stream_state[win.stream];
                    if (!win.continues)
                        state = initial_state(spec);
                    const ClockPlan clocks = derive_clocks(win.inputs, spec.clock_triggers, spec.levels);
                    ForwardResult fwd = hrnn_forward(net, win.inputs, clocks, state, true);
                    window_results[w].loss = hrnn_backward(net, fwd.tape, win.targets, acc);
                    window_results[w].targets = win.targets.size();
                    state = std::move(fwd.final_state);
                }
            };

            const std::size_t workers = std::min(config.threads, groups);
            if (workers <= 1) {
                for (std::size_t g = 0; g < groups; ++g)
                    run_group(g);
            } else {
                std::vector<std::exception_ptr> errors(workers);
                std::vector<std::thread> pool;
                for (std::size_t wk = 0; wk < workers; ++wk) {
                    pool.emplace_back([&, wk] {
                        try {
                            for (std::size_t g = wk; g < groups; g += workers)
                                run_group(g);
                        } catch (...) {
                            errors[wk] = std::current_exception();
                        }
                    });
                }
                for (auto &t : pool)
                    t.join();
                for (auto &e : errors) {
                    if (e)
                        std::rethrow_exception(e);
                }
            }

            zero(grads);
            double block_loss = 0.0;
            std::size_t block_targets = 0;
            for (std::size_t g = 0; g < groups; ++g)
                add_into(grads, group_grads[g]);
            for (const auto &r : window_results) {
                block_loss += r.loss;
                block_targets += r.targets;
            }
            if (!std::isfinite(block_loss))
                throw NumericError("training loss diverged (non-finite) in epoch " + std::to_string(epoch));
            const double inv = 1.0 / static_cast<double>(block_targets);
            for (auto span : param_spans(grads)) {
                for (double &v : span)
                    v *= inv;
            }
            adadelta_nesterov_update(net.params, grads, opt, config);
            epoch_loss += block_loss;
            epoch_targets += block_targets;
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.train_bpc = nats_to_bits(epoch_loss, epoch_targets);
        if (!heldout_set.empty()) {
            LossTotals held;
            for (const auto &seq : heldout_set)
                held += sequence_log_loss(net, with_sentence_start(spec, seq.ids));
            m.heldout_bpc = held.bpc();
        } else {
            m.heldout_bpc = std::numeric_limits<double>::quiet_NaN();
        }
        m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (!std::isfinite(m.train_bpc) || (!heldout_set.empty() && !std::isfinite(m.heldout_bpc)))
            throw NumericError("training loss diverged (non-finite) in epoch " + std::to_string(epoch));

        const double score = heldout_set.empty() ? m.train_bpc : m.heldout_bpc;
        const bool improved = score < best;
        if (improved) {
            best = score;
            result.best = net;
        }
        result.metrics.push_back(m);
        if (hooks.on_epoch)
            hooks.on_epoch(m, net, improved);
    }
    result.last = net;
    if (result.best.params.layers.empty())
        result.best = net;
    return result;
}

GradCheckReport gradient_check(const Network &net, std::span<const int> ids, double tolerance, double step)
{
    GradCheckReport report;
    NetworkParams analytic = zero_params(net.spec);
    sequence_loss_and_gradient(net, ids, analytic);

    Network probe = net;
    auto probe_spans = param_spans(probe.params);
    const auto blocks = param_blocks(analytic);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (std::size_t i = 0; i < blocks[b].values.size(); ++i) {
            double &x = probe_spans[b][i];
            const double saved = x;
            x = saved + step;
            const double plus = sequence_loss(probe, ids);
            x = saved - step;
            const double minus = sequence_loss(probe, ids);
            x = saved;

            const double numeric = (plus - minus) / (2.0 * step);
            const double a = blocks[b].values[i];
            const double abs_err = std::abs(a - numeric);
            const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
            ++report.checked;
            report.max_abs_error = std::max(report.max_abs_error, abs_err);
            if (rel > report.max_rel_error || report.worst_block.empty()) {
                if (rel >= report.max_rel_error) {
                    report.max_rel_error = rel;
                    report.worst_block = blocks[b].name;
                    report.worst_index = i;
                }
            }
        }
    }
    report.passed = report.max_rel_error <= tolerance;
    return report;
}

} // namespace hclm

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

// Truncated-BPTT training with ADADELTA + Nesterov momentum.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hclm/corpus.hpp"
#include "hclm/hierarchy.hpp"

namespace hclm {

struct TrainConfig
{
    std::size_t bptt_length = 128;
    std::size_t batch_size = 64;
    double adadelta_rho = 0.95;
    double adadelta_eps = 1e-6;
    double momentum = 0.9;
    std::size_t max_epochs = 10;
    std::uint64_t seed = 1;
    std::optional<double> clip_norm = 5.0;
    bool shuffle = true;
    std::size_t threads = 1;

    void validate() const;
};

// One bptt window of one stream. inputs[t] predicts targets[t].
struct Window
{
    std::size_t stream = 0;
    std::vector<int> inputs;
    std::vector<int> targets;
    // False when the window starts a new sequence: the stream state must be
    // reset to zeros before it.
    bool continues = false;
};

// Windows of all streams advancing together. Streams that ran out of data
// are absent from later blocks.
using Block = std::vector<Window>;

// Deals sequences round-robin onto `batch_size` streams and cuts each stream
// into consecutive windows of at most `bptt_length` predictions. Windows
// never straddle two sequences. Clocks for a window come from
// derive_clocks over its inputs.
std::vector<Block> batch_sequences(const std::vector<TokenSequence> &corpus, std::size_t batch_size,
                                   std::size_t bptt_length);

struct OptimizerState
{
    std::vector<Vector> mean_sq_grad;  // E[g^2]
    std::vector<Vector> mean_sq_delta; // E[dx^2]
    std::vector<Vector> velocity;

    static OptimizerState for_params(const NetworkParams &params);
};

// E[g^2] <- rho E[g^2] + (1-rho) g^2
// d      <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
// E[dx^2]<- rho E[dx^2] + (1-rho) d^2
// v      <- mu v + d
// x      <- x + mu v + d
//
// Gradients are checked for NaN/Inf before anything is touched; on failure a
// NumericError names the offending block. With `clip_norm`, g is scaled so its
// global L2 norm does not exceed the bound.
void adadelta_nesterov_update(NetworkParams &params, const NetworkParams &grads, OptimizerState &opt,
                              const TrainConfig &config);

// Flat-span form used by the network overload; exposed for testing.
void adadelta_nesterov_update(std::span<double> params, std::span<const double> grads, std::span<double> mean_sq_grad,
                              std::span<double> mean_sq_delta, std::span<double> velocity, double rho, double eps,
                              double momentum, double grad_scale = 1.0);

struct EpochMetrics
{
    std::size_t epoch = 0;
    double train_bpc = 0.0;
    double heldout_bpc = 0.0; // NaN without held-out data
    double seconds = 0.0;
};

struct TrainHooks
{
    // Called after every epoch with the current network; `improved` is true
    // when it is the best so far on held-out (or training) BPC.
    std::function<void(const EpochMetrics &, const Network &, bool improved)> on_epoch;
};

struct TrainResult
{
    Network best;
    Network last;
    std::vector<EpochMetrics> metrics;
};

// Every sequence is trained with an implicit leading <s>, so each of its
// N_c tokens is a prediction target. Deterministic given config.seed and
// independent of config.threads. Throws NumericError when the loss diverges.
TrainResult train(const NetworkSpec &spec, const std::vector<TokenSequence> &train_set,
                  const std::vector<TokenSequence> &heldout_set, const TrainConfig &config,
                  const TrainHooks &hooks = {});

// Summed cross-entropy (nats) of predicting ids[t+1] from ids[..t] from a
// zero state, and its gradient.
double sequence_loss(const Network &net, std::span<const int> ids);
double sequence_loss_and_gradient(const Network &net, std::span<const int> ids, NetworkParams &grads);

struct GradCheckReport
{
    std::size_t checked = 0;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::string worst_block;
    std::size_t worst_index = 0;
    bool passed = false;
};

// Relative error is |a - n| / max(|a|, |n|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-4;

GradCheckReport gradient_check(const Network &net, std::span<const int> ids, double tolerance = 1e-4,
                               double step = 1e-5);

} // namespace hclm

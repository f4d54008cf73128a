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

// Multi-timescale networks built from clocked/reset LSTM layers.
//
// Layers are grouped into modules, one per hierarchy level. Level 1 runs at
// the character clock; level l > 1 fires only on its trigger tokens (word
// boundaries for level 2). Level l is reset whenever level l+1 fires. A
// connection from a lower to a higher module is delayed by one step; a
// connection from a higher to a lower module is not, so within one time
// step modules are evaluated top-down and layers bottom-up.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hclm/cells.hpp"
#include "hclm/corpus.hpp"
#include "hclm/tensor.hpp"

namespace hclm {

enum class Variant
{
    mono,
    hlstm_a,
    hlstm_b,
};

std::string_view to_string(Variant v) noexcept;
Variant parse_variant(std::string_view text);

struct InputSource
{
    enum class Kind
    {
        one_hot,  // current token, vocab_size wide
        boundary, // [token == <w>, token == <s>]
        layer,    // output h of another layer
    };

    Kind kind = Kind::one_hot;
    int layer = -1;
    int delay = 0;

    friend bool operator==(const InputSource &, const InputSource &) = default;
};

struct LayerSpec
{
    int level = 1;
    std::size_t hidden = 0;
    std::vector<InputSource> inputs;

    friend bool operator==(const LayerSpec &, const LayerSpec &) = default;
};

struct NetworkSpec
{
    Variant variant = Variant::mono;
    int levels = 1;
    int layers_per_module = 1;
    std::size_t hidden_dim = 0;
    std::size_t vocab_size = 0;
    PeepholeKind peephole = PeepholeKind::diagonal;
    int word_boundary_id = -1;
    int sentence_boundary_id = -1;

    // Wiring table. Layer indices are positions in this vector.
    std::vector<LayerSpec> layers;
    int output_layer = 0;

    // Token ids firing the clock of level l+2 (level 1 is always on).
    std::vector<std::vector<int>> clock_triggers;

    // Throws ConfigError describing the first violated rule.
    void validate() const;

    std::size_t input_dim(int layer) const;
    std::size_t source_dim(const InputSource &src) const;

    // Layer indices in per-step evaluation order.
    std::vector<int> evaluation_order() const;

    // "4x512" style label: total layer count x hidden width.
    std::string size_label() const;

    // Serialized as key=value lines (embedded in checkpoints).
    std::string to_text() const;
    static NetworkSpec from_text(std::string_view text);

    friend bool operator==(const NetworkSpec &, const NetworkSpec &) = default;
};

// Builds the wiring table for a variant. `total_layers` counts every LSTM
// layer (mono: the stack depth; HLSTM: both modules, half each).
NetworkSpec make_network_spec(Variant variant, std::size_t total_layers, std::size_t hidden,
                              const Vocabulary &vocab, PeepholeKind peephole = PeepholeKind::diagonal);

struct ClockPlan
{
    int levels = 1;
    // clock[l][t], reset[l][t] for level l+1.
    std::vector<std::vector<std::uint8_t>> clock;
    std::vector<std::vector<std::uint8_t>> reset;

    std::size_t length() const noexcept { return clock.empty() ? 0 : clock[0].size(); }
    bool valid() const noexcept;
};

// Clocks from explicit per-level trigger sets (triggers[l] drives level l+2).
// A level only fires when the level below fires as well.
ClockPlan derive_clocks(std::span<const int> ids, const std::vector<std::vector<int>> &triggers, int levels);

// Standard triggers: level 2 on <w> and <s>, level 3 on <s>. ConfigError for L > 3.
ClockPlan derive_clocks(std::span<const int> ids, const Vocabulary &vocab, int levels);

std::vector<std::vector<int>> default_clock_triggers(int word_boundary_id, int sentence_boundary_id, int levels);

struct NetworkParams
{
    std::vector<LstmParams> layers;
    Matrix W_out;
    Vector b_out;

    std::size_t parameter_count() const;
    void visit(const std::function<void(ParamBlock)> &fn);
    void visit(const std::function<void(ConstParamBlock)> &fn) const;

    friend bool operator==(const NetworkParams &, const NetworkParams &) = default;
};

NetworkParams zero_params(const NetworkSpec &spec);

// Uniform [-0.08, 0.08] initialization from a seed.
NetworkParams build_network(const NetworkSpec &spec, std::uint64_t seed);

struct Network
{
    NetworkSpec spec;
    NetworkParams params;
};

struct NetworkState
{
    std::vector<CellState> layers;
    // Last emitted output of each layer read through a delayed connection;
    // empty for layers nobody reads with delay.
    std::vector<Vector> delayed;

    friend bool operator==(const NetworkState &, const NetworkState &) = default;
};

NetworkState initial_state(const NetworkSpec &spec);

struct StepTape
{
    int id = 0;
    std::vector<TapeStep> layers;
    Vector probs;
};

struct ForwardResult
{
    std::vector<Vector> probs;
    NetworkState final_state;
    std::vector<StepTape> tape; // empty unless requested
};

// Runs the network over `ids` from `initial`. Throws ArgumentError when the
// clock plan does not match the ids or the network levels.
ForwardResult hrnn_forward(const Network &net, std::span<const int> ids, const ClockPlan &clocks,
                           const NetworkState &initial, bool keep_tape = false);
ForwardResult hrnn_forward(const Network &net, std::span<const int> ids, const ClockPlan &clocks);

// Backpropagates the summed cross-entropy of the targets (-1 = no target at
// that step) through a taped forward run. Gradients are added into `grads`.
// Returns the summed loss in nats.
double hrnn_backward(const Network &net, std::span<const StepTape> tape, std::span<const int> targets,
                     NetworkParams &grads);

struct StepOutput
{
    Vector probs;
    NetworkState state;
};

// One streaming step with clocks derived from the token itself. The input
// state is left untouched.
StepOutput step_stateful(const Network &net, const NetworkState &state, int id);

// In-place variant returning the pre-softmax logits.
Vector step_logits(const Network &net, NetworkState &state, int id);

} // namespace hclm

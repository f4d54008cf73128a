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

#include "hclm/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hclm/error.hpp"

namespace hclm {
namespace {

constexpr double kInitRange = 0.08;
constexpr std::size_t kBoundaryDim = 2;

InputSource one_hot() { return {InputSource::Kind::one_hot, -1, 0}; }
InputSource boundary() { return {InputSource::Kind::boundary, -1, 0}; }
InputSource from_layer(int layer, int delay) { return {InputSource::Kind::layer, layer, delay}; }

std::vector<bool> delayed_sources(const NetworkSpec &spec)
{
    std::vector<bool> out(spec.layers.size(), false);
    for (const auto &layer : spec.layers) {
        for (const auto &src : layer.inputs) {
            if (src.kind == InputSource::Kind::layer && src.delay == 1)
                out[src.layer] = true;
        }
    }
    return out;
}

void check_id(const NetworkSpec &spec, int id)
{
    if (id < 0 || static_cast<std::size_t>(id) >= spec.vocab_size)
        throw ArgumentError("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(spec.vocab_size));
}

// Per-call constants derived from the spec.
struct Plan
{
    std::vector<int> order;
    std::vector<bool> delayed;
    std::vector<std::size_t> input_dims;

    explicit Plan(const NetworkSpec &spec)
        : order(spec.evaluation_order()), delayed(delayed_sources(spec))
    {
        for (std::size_t k = 0; k < spec.layers.size(); ++k)
            input_dims.push_back(spec.input_dim(static_cast<int>(k)));
    }
};

void assemble_input(const NetworkSpec &spec, const LayerSpec &layer, const NetworkState &state, int id, Vector &x)
{
    std::size_t offset = 0;
    for (const auto &src : layer.inputs) {
        switch (src.kind) {
        case InputSource::Kind::one_hot:
            x[offset + id] = 1.0;
            offset += spec.vocab_size;
            break;
        case InputSource::Kind::boundary:
            x[offset] = id == spec.word_boundary_id ? 1.0 : 0.0;
            x[offset + 1] = id == spec.sentence_boundary_id ? 1.0 : 0.0;
            offset += kBoundaryDim;
            break;
        case InputSource::Kind::layer: {
            const Vector &h = src.delay == 1 ? state.delayed[src.layer] : state.layers[src.layer].h;
            std::copy(h.begin(), h.end(), x.begin() + static_cast<std::ptrdiff_t>(offset));
            offset += h.size();
            break;
        }
        }
    }
}

// One time step in place. `clock`/`reset` are indexed by level - 1.
Vector advance(const Network &net, const Plan &plan, NetworkState &state, int id, const std::uint8_t *clock,
               const std::uint8_t *reset, StepTape *tape)
{
    const NetworkSpec &spec = net.spec;
    if (tape != nullptr) {
        tape->id = id;
        tape->layers.assign(spec.layers.size(), TapeStep{});
    }
    for (int k : plan.order) {
        const LayerSpec &layer = spec.layers[k];
        const int c = clock[layer.level - 1];
        const int r = reset[layer.level - 1];
        TapeStep *ts = tape != nullptr ? &tape->layers[k] : nullptr;
        if (c == 0) {
            state.layers[k] = clocked_reset_step<LstmCell>(net.params.layers[k], {}, state.layers[k], c, r, ts);
            continue;
        }
        Vector x(plan.input_dims[k], 0.0);
        assemble_input(spec, layer, state, id, x);
        state.layers[k] = clocked_reset_step<LstmCell>(net.params.layers[k], x, state.layers[k], c, r, ts);
    }
    for (std::size_t k = 0; k < spec.layers.size(); ++k) {
        if (plan.delayed[k])
            state.delayed[k] = state.layers[k].h;
    }
    Vector logits(net.params.b_out);
    gemv_acc(net.params.W_out, state.layers[spec.output_layer].h, logits);
    return logits;
}

void clock_column(const NetworkSpec &spec, int id, std::uint8_t *clock, std::uint8_t *reset)
{
    clock[0] = 1;
    for (int l = 1; l < spec.levels; ++l) {
        const auto &trig = spec.clock_triggers[l - 1];
        const bool fires = std::find(trig.begin(), trig.end(), id) != trig.end();
        clock[l] = clock[l - 1] && fires ? 1 : 0;
    }
    for (int l = 0; l < spec.levels; ++l)
        reset[l] = l + 1 < spec.levels ? clock[l + 1] : 0;
}

std::string source_to_text(const InputSource &src)
{
    switch (src.kind) {
    case InputSource::Kind::one_hot:
        return "onehot";
    case InputSource::Kind::boundary:
        return "boundary";
    case InputSource::Kind::layer:
        return "L" + std::to_string(src.layer) + "d" + std::to_string(src.delay);
    }
    return "";
}

InputSource source_from_text(const std::string &token)
{
    if (token == "onehot")
        return one_hot();
    if (token == "boundary")
        return boundary();
    const auto d = token.find('d');
    if (token.size() < 4 || token[0] != 'L' || d == std::string::npos)
        throw DataError("bad layer source '" + token + "' in network spec");
    try {
        return from_layer(std::stoi(token.substr(1, d - 1)), std::stoi(token.substr(d + 1)));
    } catch (const std::exception &) {
        throw DataError("bad layer source '" + token + "' in network spec");
    }
}

} // namespace

std::string_view to_string(Variant v) noexcept
{
    switch (v) {
    case Variant::mono:
        return "mono";
    case Variant::hlstm_a:
        return "hlstm_a";
    case Variant::hlstm_b:
        return "hlstm_b";
    }
    return "unknown";
}

Variant parse_variant(std::string_view text)
{
    if (text == "mono")
        return Variant::mono;
    if (text == "hlstm_a")
        return Variant::hlstm_a;
    if (text == "hlstm_b")
        return Variant::hlstm_b;
    throw ConfigError("unknown network variant '" + std::string(text) + "' (expected mono, hlstm_a or hlstm_b)");
}

std::size_t NetworkSpec::source_dim(const InputSource &src) const
{
    switch (src.kind) {
    case InputSource::Kind::one_hot:
        return vocab_size;
    case InputSource::Kind::boundary:
        return kBoundaryDim;
    case InputSource::Kind::layer:
        return layers.at(src.layer).hidden;
    }
    return 0;
}

std::size_t NetworkSpec::input_dim(int layer) const
{
    std::size_t dim = 0;
    for (const auto &src : layers.at(layer).inputs)
        dim += source_dim(src);
    return dim;
}

std::vector<int> NetworkSpec::evaluation_order() const
{
    std::vector<int> order(layers.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        order[k] = static_cast<int>(k);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return layers[a].level > layers[b].level; });
    return order;
}

void NetworkSpec::validate() const
{
    auto fail = [](const std::string &msg) { throw ConfigError("invalid network spec: " + msg); };
    if (levels < 1)
        fail("levels must be >= 1");
    if (vocab_size < 2)
        fail("vocabulary must hold at least 2 symbols");
    if (layers.empty())
        fail("no layers");
    if (word_boundary_id < 0 || sentence_boundary_id < 0 || word_boundary_id == sentence_boundary_id ||
        static_cast<std::size_t>(std::max(word_boundary_id, sentence_boundary_id)) >= vocab_size)
        fail("boundary ids must be distinct and inside the vocabulary");
    if (clock_triggers.size() != static_cast<std::size_t>(levels - 1))
        fail("need one clock trigger set per level above 1");
    if (output_layer < 0 || static_cast<std::size_t>(output_layer) >= layers.size() ||
        layers[output_layer].level != 1)
        fail("output layer must be a level-1 layer");

    std::vector<int> seen_per_level(levels, 0);
    const auto order = evaluation_order();
    std::vector<int> position(layers.size());
    for (std::size_t p = 0; p < order.size(); ++p)
        position[order[p]] = static_cast<int>(p);

    for (std::size_t k = 0; k < layers.size(); ++k) {
        const LayerSpec &layer = layers[k];
        const std::string name = "layer " + std::to_string(k);
        if (layer.level < 1 || layer.level > levels)
            fail(name + " has level outside 1.." + std::to_string(levels));
        ++seen_per_level[layer.level - 1];
        if (layer.hidden == 0)
            fail(name + " has zero width");
        if (layer.inputs.empty())
            fail(name + " has no inputs");
        for (const auto &src : layer.inputs) {
            if (src.kind != InputSource::Kind::layer)
                continue;
            if (src.layer < 0 || static_cast<std::size_t>(src.layer) >= layers.size())
                fail(name + " reads a nonexistent layer");
            if (src.delay != 0 && src.delay != 1)
                fail(name + " has a delay other than 0 or 1");
            const int from = layers[src.layer].level;
            if (from < layer.level && src.delay != 1)
                fail(name + ": connections from a lower module must be delayed by one step");
            if (from > layer.level && src.delay != 0)
                fail(name + ": connections from a higher module must not be delayed");
            if (src.delay == 0 && position[src.layer] >= position[k])
                fail(name + " reads an undelayed layer that is evaluated later");
        }
    }
    for (int l = 0; l < levels; ++l) {
        if (seen_per_level[l] == 0)
            fail("level " + std::to_string(l + 1) + " has no layers");
    }
}

std::string NetworkSpec::size_label() const
{
    return std::to_string(layers.size()) + "x" + std::to_string(hidden_dim);
}

std::string NetworkSpec::to_text() const
{
    std::ostringstream out;
    out << "variant=" << to_string(variant) << '\n'
        << "levels=" << levels << '\n'
        << "layers_per_module=" << layers_per_module << '\n'
        << "hidden_dim=" << hidden_dim << '\n'
        << "vocab_size=" << vocab_size << '\n'
        << "peephole=" << to_string(peephole) << '\n'
        << "word_boundary_id=" << word_boundary_id << '\n'
        << "sentence_boundary_id=" << sentence_boundary_id << '\n'
        << "output_layer=" << output_layer << '\n';
    for (const auto &layer : layers) {
        out << "layer=" << layer.level << ' ' << layer.hidden;
        for (const auto &src : layer.inputs)
            out << ' ' << source_to_text(src);
        out << '\n';
    }
    for (const auto &trig : clock_triggers) {
        out << "clock=";
        for (std::size_t i = 0; i < trig.size(); ++i)
            out << (i ? " " : "") << trig[i];
        out << '\n';
    }
    return out.str();
}

NetworkSpec NetworkSpec::from_text(std::string_view text)
{
    NetworkSpec spec;
    std::istringstream in{std::string(text)};
    std::string line;
    auto to_int = [](const std::string &key, const std::string &v) {
        try {
            return std::stoll(v);
        } catch (const std::exception &) {
            throw DataError("bad integer for '" + key + "' in network spec: " + v);
        }
    };
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("malformed network spec line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "variant")
            spec.variant = parse_variant(value);
        else if (key == "levels")
            spec.levels = static_cast<int>(to_int(key, value));
        else if (key == "layers_per_module")
            spec.layers_per_module = static_cast<int>(to_int(key, value));
        else if (key == "hidden_dim")
            spec.hidden_dim = static_cast<std::size_t>(to_int(key, value));
        else if (key == "vocab_size")
            spec.vocab_size = static_cast<std::size_t>(to_int(key, value));
        else if (key == "peephole")
            spec.peephole = parse_peephole(value);
        else if (key == "word_boundary_id")
            spec.word_boundary_id = static_cast<int>(to_int(key, value));
        else if (key == "sentence_boundary_id")
            spec.sentence_boundary_id = static_cast<int>(to_int(key, value));
        else if (key == "output_layer")
            spec.output_layer = static_cast<int>(to_int(key, value));
        else if (key == "layer") {
            std::istringstream fields(value);
            LayerSpec layer;
            std::string tok;
            fields >> layer.level >> layer.hidden;
            if (!fields)
                throw DataError("malformed layer line in network spec: " + value);
            while (fields >> tok)
                layer.inputs.push_back(source_from_text(tok));
            spec.layers.push_back(std::move(layer));
        } else if (key == "clock") {
            std::istringstream fields(value);
            std::vector<int> ids;
            int id = 0;
            while (fields >> id)
                ids.push_back(id);
            spec.clock_triggers.push_back(std::move(ids));
        } else {
            throw DataError("unknown key '" + key + "' in network spec");
        }
    }
    try {
        spec.validate();
    } catch (const ConfigError &e) {
        throw DataError(e.what());
    }
    return spec;
}

std::vector<std::vector<int>> default_clock_triggers(int word_boundary_id, int sentence_boundary_id, int levels)
{
    if (levels > 3)
        throw ConfigError("no standard clock trigger for level " + std::to_string(levels) +
                          "; supply explicit triggers");
    std::vector<std::vector<int>> triggers;
    if (levels >= 2)
        triggers.push_back({word_boundary_id, sentence_boundary_id});
    if (levels >= 3)
        triggers.push_back({sentence_boundary_id});
    return triggers;
}

NetworkSpec make_network_spec(Variant variant, std::size_t total_layers, std::size_t hidden,
                              const Vocabulary &vocab, PeepholeKind peephole)
{
    if (total_layers == 0 || hidden == 0)
        throw ConfigError("network needs at least one layer of positive width");
    NetworkSpec spec;
    spec.variant = variant;
    spec.hidden_dim = hidden;
    spec.vocab_size = vocab.size();
    spec.peephole = peephole;
    spec.word_boundary_id = vocab.word_boundary_id();
    spec.sentence_boundary_id = vocab.sentence_boundary_id();

    if (variant == Variant::mono) {
        spec.levels = 1;
        spec.layers_per_module = static_cast<int>(total_layers);
        for (std::size_t k = 0; k < total_layers; ++k) {
            LayerSpec layer{1, hidden, {}};
            layer.inputs.push_back(k == 0 ? one_hot() : from_layer(static_cast<int>(k) - 1, 0));
            spec.layers.push_back(std::move(layer));
        }
        spec.output_layer = static_cast<int>(total_layers) - 1;
    } else {
        if (total_layers % 2 != 0 || total_layers < 4)
            throw ConfigError("HLSTM networks need an even layer count >= 4 (two modules of >= 2 layers), got " +
                              std::to_string(total_layers));
        const int per_module = static_cast<int>(total_layers / 2);
        spec.levels = 2;
        spec.layers_per_module = per_module;
        const int word_base = per_module;
        const int context = word_base + per_module - 1;

        // Character module: layers 0..per_module-1.
        for (int k = 0; k < per_module; ++k) {
            LayerSpec layer{1, hidden, {}};
            if (k == 0) {
                layer.inputs = {one_hot()};
            } else if (k == 1) {
                // Layer 2 is conditioned on the context vector. In HLSTM-A it
                // sees the characters directly; in HLSTM-B only through the
                // word embedding of layer 1.
                if (variant == Variant::hlstm_a)
                    layer.inputs = {one_hot(), from_layer(context, 0)};
                else
                    layer.inputs = {from_layer(0, 0), from_layer(context, 0)};
            } else {
                layer.inputs = {from_layer(k - 1, 0)};
            }
            spec.layers.push_back(std::move(layer));
        }
        // Word module: delayed embedding from char layer 1 plus the boundary token.
        for (int k = 0; k < per_module; ++k) {
            LayerSpec layer{2, hidden, {}};
            if (k == 0)
                layer.inputs = {from_layer(0, 1), boundary()};
            else
                layer.inputs = {from_layer(word_base + k - 1, 0)};
            spec.layers.push_back(std::move(layer));
        }
        spec.output_layer = per_module - 1;
    }
    spec.clock_triggers = default_clock_triggers(spec.word_boundary_id, spec.sentence_boundary_id, spec.levels);
    spec.validate();
    return spec;
}

bool ClockPlan::valid() const noexcept
{
    if (levels < 1 || clock.size() != static_cast<std::size_t>(levels) || reset.size() != clock.size())
        return false;
    const std::size_t T = length();
    for (int l = 0; l < levels; ++l) {
        if (clock[l].size() != T || reset[l].size() != T)
            return false;
        for (std::size_t t = 0; t < T; ++t) {
            if (l == 0 && clock[0][t] != 1)
                return false;
            if (l > 0 && clock[l][t] == 1 && clock[l - 1][t] != 1)
                return false;
            const std::uint8_t expected_reset = l + 1 < levels ? clock[l + 1][t] : 0;
            if (reset[l][t] != expected_reset)
                return false;
        }
    }
    return true;
}

ClockPlan derive_clocks(std::span<const int> ids, const std::vector<std::vector<int>> &triggers, int levels)
{
    if (levels < 1)
        throw ArgumentError("clock plan needs at least one level");
    if (triggers.size() + 1 < static_cast<std::size_t>(levels))
        throw ArgumentError("missing clock triggers for " + std::to_string(levels) + " levels");
    ClockPlan plan;
    plan.levels = levels;
    plan.clock.assign(levels, std::vector<std::uint8_t>(ids.size(), 0));
    plan.reset.assign(levels, std::vector<std::uint8_t>(ids.size(), 0));
    for (std::size_t t = 0; t < ids.size(); ++t) {
        plan.clock[0][t] = 1;
        for (int l = 1; l < levels; ++l) {
            const auto &trig = triggers[l - 1];
            const bool fires = std::find(trig.begin(), trig.end(), ids[t]) != trig.end();
            plan.clock[l][t] = plan.clock[l - 1][t] && fires ? 1 : 0;
        }
        for (int l = 0; l + 1 < levels; ++l)
            plan.reset[l][t] = plan.clock[l + 1][t];
    }
    return plan;
}

ClockPlan derive_clocks(std::span<const int> ids, const Vocabulary &vocab, int levels)
{
    return derive_clocks(ids, default_clock_triggers(vocab.word_boundary_id(), vocab.sentence_boundary_id(), levels),
                         levels);
}

std::size_t NetworkParams::parameter_count() const
{
    std::size_t n = 0;
    visit(std::function<void(ConstParamBlock)>([&](ConstParamBlock b) { n += b.values.size(); }));
    return n;
}

void NetworkParams::visit(const std::function<void(ParamBlock)> &fn)
{
    for (std::size_t k = 0; k < layers.size(); ++k)
        layers[k].visit("layer" + std::to_string(k) + ".", fn);
    fn(ParamBlock{"output.W", W_out.rows(), W_out.cols(), W_out.values()});
    fn(ParamBlock{"output.b", b_out.size(), 1, b_out});
}

void NetworkParams::visit(const std::function<void(ConstParamBlock)> &fn) const
{
    for (std::size_t k = 0; k < layers.size(); ++k)
        layers[k].visit("layer" + std::to_string(k) + ".", fn);
    fn(ConstParamBlock{"output.W", W_out.rows(), W_out.cols(), W_out.values()});
    fn(ConstParamBlock{"output.b", b_out.size(), 1, b_out});
}

NetworkParams zero_params(const NetworkSpec &spec)
{
    spec.validate();
    NetworkParams p;
    for (std::size_t k = 0; k < spec.layers.size(); ++k)
        p.layers.push_back(LstmParams::zeros(spec.input_dim(static_cast<int>(k)), spec.layers[k].hidden,
                                             spec.peephole));
    p.W_out = Matrix(spec.vocab_size, spec.layers[spec.output_layer].hidden);
    p.b_out.assign(spec.vocab_size, 0.0);
    return p;
}

NetworkParams build_network(const NetworkSpec &spec, std::uint64_t seed)
{
    NetworkParams p = zero_params(spec);
    std::mt19937_64 rng(seed);
    p.visit(std::function<void(ParamBlock)>(
        [&](ParamBlock b) { fill_uniform(b.values, -kInitRange, kInitRange, rng); }));
    return p;
}

NetworkState initial_state(const NetworkSpec &spec)
{
    NetworkState s;
    const auto delayed = delayed_sources(spec);
    for (std::size_t k = 0; k < spec.layers.size(); ++k) {
        s.layers.push_back(CellState::zeros(spec.layers[k].hidden, true));
        s.delayed.push_back(delayed[k] ? Vector(spec.layers[k].hidden, 0.0) : Vector{});
    }
    return s;
}

ForwardResult hrnn_forward(const Network &net, std::span<const int> ids, const ClockPlan &clocks,
                           const NetworkState &initial, bool keep_tape)
{
    const NetworkSpec &spec = net.spec;
    if (clocks.levels != spec.levels)
        throw ArgumentError("clock plan has " + std::to_string(clocks.levels) + " levels, network has " +
                            std::to_string(spec.levels));
    if (clocks.length() != ids.size())
        throw ArgumentError("clock plan covers " + std::to_string(clocks.length()) + " steps but " +
                            std::to_string(ids.size()) + " ids were given");
    if (!clocks.valid())
        throw ArgumentError("clock plan is inconsistent (level 1 must always fire, a level only fires with "
                            "the level below, signals must be 0/1)");
    if (initial.layers.size() != spec.layers.size())
        throw ArgumentError("initial state does not match the network");

    const Plan plan(spec);
    ForwardResult out;
    out.final_state = initial;
    out.probs.reserve(ids.size());
    if (keep_tape)
        out.tape.resize(ids.size());
    std::vector<std::uint8_t> c(spec.levels), r(spec.levels);
    for (std::size_t t = 0; t < ids.size(); ++t) {
        check_id(spec, ids[t]);
        for (int l = 0; l < spec.levels; ++l) {
            c[l] = clocks.clock[l][t];
            r[l] = clocks.reset[l][t];
        }
        StepTape *tape = keep_tape ? &out.tape[t] : nullptr;
        Vector probs = softmax(advance(net, plan, out.final_state, ids[t], c.data(), r.data(), tape));
        if (tape != nullptr)
            tape->probs = probs;
        out.probs.push_back(std::move(probs));
    }
    return out;
}

ForwardResult hrnn_forward(const Network &net, std::span<const int> ids, const ClockPlan &clocks)
{
    return hrnn_forward(net, ids, clocks, initial_state(net.spec));
}

double hrnn_backward(const Network &net, std::span<const StepTape> tape, std::span<const int> targets,
                     NetworkParams &grads)
{
    const NetworkSpec &spec = net.spec;
    if (tape.size() != targets.size())
        throw ArgumentError("backward: " + std::to_string(tape.size()) + " taped steps but " +
                            std::to_string(targets.size()) + " targets");
    const Plan plan(spec);
    const std::size_t L = spec.layers.size();

    std::vector<CellState> dstate;
    std::vector<Vector> pending(L);
    for (std::size_t k = 0; k < L; ++k) {
        dstate.push_back(CellState::zeros(spec.layers[k].hidden, true));
        pending[k].assign(spec.layers[k].hidden, 0.0);
    }

    double loss = 0.0;
    Vector dz(spec.vocab_size);
    for (std::size_t t = tape.size(); t-- > 0;) {
        const StepTape &st = tape[t];
        if (st.layers.size() != L || st.probs.size() != spec.vocab_size)
            throw ArgumentError("backward: tape step " + std::to_string(t) + " was not recorded by this network");
        const int target = targets[t];
        if (target >= 0) {
            check_id(spec, target);
            loss -= std::log(st.probs[target]);
            std::copy(st.probs.begin(), st.probs.end(), dz.begin());
            dz[target] -= 1.0;
            // Output layer state at t is the `next` of its last clocked step;
            // level-1 layers are clocked every step.
            const Vector &h_out = st.layers[spec.output_layer].next.h;
            ger_acc(grads.W_out, dz, h_out);
            axpy(1.0, dz, grads.b_out);
            gemv_t_acc(net.params.W_out, dz, dstate[spec.output_layer].h);
        }

        for (auto it = plan.order.rbegin(); it != plan.order.rend(); ++it) {
            const int k = *it;
            const TapeStep &ts = st.layers[k];
            Vector dx(ts.clock == 1 ? plan.input_dims[k] : 0, 0.0);
            clocked_reset_backward<LstmCell>(net.params.layers[k], ts, dstate[k], dx, grads.layers[k]);
            if (ts.clock == 0)
                continue;
            std::size_t offset = 0;
            for (const auto &src : spec.layers[k].inputs) {
                const std::size_t dim = spec.source_dim(src);
                if (src.kind == InputSource::Kind::layer) {
                    std::span<const double> part(dx.data() + offset, dim);
                    axpy(1.0, part, src.delay == 1 ? pending[src.layer] : dstate[src.layer].h);
                }
                offset += dim;
            }
        }
        // Delayed reads at t saw h_{t-1}; every dstate now refers to t-1.
        for (std::size_t k = 0; k < L; ++k) {
            if (!plan.delayed[k])
                continue;
            axpy(1.0, pending[k], dstate[k].h);
            std::fill(pending[k].begin(), pending[k].end(), 0.0);
        }
    }
    return loss;
}

StepOutput step_stateful(const Network &net, const NetworkState &state, int id)
{
    StepOutput out{{}, state};
    out.probs = softmax(step_logits(net, out.state, id));
    return out;
}

Vector step_logits(const Network &net, NetworkState &state, int id)
{
    const NetworkSpec &spec = net.spec;
    check_id(spec, id);
    if (state.layers.size() != spec.layers.size())
        throw ArgumentError("state does not match the network");
    std::vector<std::uint8_t> c(spec.levels), r(spec.levels);
    clock_column(spec, id, c.data(), r.data());
    const Plan plan(spec);
    return advance(net, plan, state, id, c.data(), r.data(), nullptr);
}

} // namespace hclm

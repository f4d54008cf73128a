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

#include <doctest.h>

#include <cmath>
#include <random>

#include "hclm/cells.hpp"
#include "hclm/error.hpp"
#include "hclm/hierarchy.hpp"
#include "oracles/fixtures.hpp"
#include "oracles/param_count.hpp"

using namespace hclm;

namespace {

std::vector<std::uint8_t> row(std::initializer_list<int> v)
{
    return {v.begin(), v.end()};
}

Vocabulary charset(std::size_t size)
{
    // size - 2 distinct letters plus the two boundaries
    std::string text;
    for (std::size_t i = 0; i + 2 < size; ++i)
        text += static_cast<char>('!' + i);
    return build_vocab(text, TokenMode::character);
}

Vector one_hot(std::size_t n, int id)
{
    Vector v(n, 0.0);
    v[static_cast<std::size_t>(id)] = 1.0;
    return v;
}

Vector concat(const Vector &a, const Vector &b)
{
    Vector out(a);
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

} // namespace

TEST_SUITE("hierarchy")
{
    TEST_CASE("clock derivation from boundaries")
    {
        const Vocabulary v = fixture::letters(2);
        const int a = *v.find("a"), b = *v.find("b"), w = v.word_boundary_id(), s = v.sentence_boundary_id();
        const ClockPlan p = derive_clocks(std::vector<int>{a, w, b, s}, v, 2);
        CHECK(p.clock[0] == row({1, 1, 1, 1}));
        CHECK(p.clock[1] == row({0, 1, 0, 1}));
        CHECK(p.reset[0] == row({0, 1, 0, 1}));
        CHECK(p.reset[1] == row({0, 0, 0, 0}));
        CHECK(p.valid());

        const ClockPlan none = derive_clocks(std::vector<int>{a, b, a}, v, 2);
        CHECK(none.clock[1] == row({0, 0, 0}));

        const ClockPlan one = derive_clocks(std::vector<int>{a, w, s}, v, 1);
        CHECK(one.clock.size() == 1);
        CHECK(one.clock[0] == row({1, 1, 1}));
        CHECK(one.reset[0] == row({0, 0, 0}));

        const ClockPlan three = derive_clocks(std::vector<int>{a, w, b, s}, v, 3);
        CHECK(three.clock[2] == row({0, 0, 0, 1}));
        CHECK(three.reset[1] == row({0, 0, 0, 1}));
        CHECK_THROWS_AS(derive_clocks(std::vector<int>{a}, v, 4), ConfigError);
    }

    TEST_CASE("inconsistent clock plans are rejected")
    {
        const Vocabulary v = fixture::letters(2);
        const Network net = fixture::random_network(Variant::hlstm_b, 4, 3, v, 1);
        const std::vector<int> ids{0, 1};
        ClockPlan p = derive_clocks(ids, v, 2);
        p.clock[1][0] = 1; // level 2 fires without its reset wired to level 1
        CHECK_FALSE(p.valid());
        CHECK_THROWS_AS(hrnn_forward(net, ids, p), ArgumentError);
        CHECK_THROWS_AS(hrnn_forward(net, ids, derive_clocks(ids, v, 1)), ArgumentError);
        CHECK_THROWS_AS(hrnn_forward(net, std::vector<int>{0}, derive_clocks(ids, v, 2)), ArgumentError);
    }

    TEST_CASE("mono parameter count by hand")
    {
        const Vocabulary v = fixture::letters(2); // vocab 4
        const NetworkSpec spec = make_network_spec(Variant::mono, 2, 8, v);
        // layer 1: 4*8*4 + 4*8*8 + 3*8 + 4*8 = 440; layer 2: 4*8*8*2 + 56 = 568; softmax: 4*8 + 4 = 36
        CHECK(zero_params(spec).parameter_count() == 1044);
    }

    TEST_CASE("parameter counts follow the closed form for every variant")
    {
        for (std::size_t V : {4u, 9u, 30u}) {
            const Vocabulary v = charset(V);
            for (Variant var : {Variant::mono, Variant::hlstm_a, Variant::hlstm_b}) {
                for (std::size_t L : {4u, 6u}) {
                    for (std::size_t H : {3u, 8u}) {
                        for (PeepholeKind pk : {PeepholeKind::diagonal, PeepholeKind::full}) {
                            const NetworkSpec spec = make_network_spec(var, L, H, v, pk);
                            CHECK(zero_params(spec).parameter_count() == oracle::network_count(var, L, H, V, pk));
                        }
                    }
                }
            }
        }
        const Vocabulary v = charset(30);
        CHECK(zero_params(make_network_spec(Variant::hlstm_a, 4, 16, v)).parameter_count() !=
              zero_params(make_network_spec(Variant::hlstm_b, 4, 16, v)).parameter_count());
    }

    TEST_CASE("published model sizes within 2%")
    {
        struct Row
        {
            Variant v;
            std::size_t layers, hidden, vocab;
            double millions;
        };
        const Row rows[] = {
            {Variant::mono, 2, 512, 30, 3.23},      {Variant::mono, 4, 512, 30, 7.43},
            {Variant::mono, 4, 1024, 30, 29.54},    {Variant::hlstm_a, 4, 512, 30, 7.50},
            {Variant::hlstm_b, 4, 512, 30, 8.48},   {Variant::hlstm_b, 4, 1024, 30, 33.74},
            {Variant::hlstm_b, 4, 512, 257, 9.06},
        };
        for (const Row &r : rows) {
            const Vocabulary v = r.vocab == 257 ? Vocabulary::bytes() : charset(r.vocab);
            const double n = static_cast<double>(zero_params(make_network_spec(r.v, r.layers, r.hidden, v)).parameter_count());
            CAPTURE(r.millions);
            CHECK(std::abs(n / 1e6 - r.millions) / r.millions < 0.02);
        }
    }

    TEST_CASE("wiring of the two-level variants")
    {
        const Vocabulary v = fixture::letters(3);
        const NetworkSpec a = make_network_spec(Variant::hlstm_a, 4, 5, v);
        const NetworkSpec b = make_network_spec(Variant::hlstm_b, 4, 5, v);
        CHECK(a.levels == 2);
        CHECK(a.output_layer == 1);
        CHECK(a.layers[1].inputs[0].kind == InputSource::Kind::one_hot);
        CHECK(b.layers[1].inputs[0].kind == InputSource::Kind::layer);
        for (const NetworkSpec *s : {&a, &b}) {
            // feed-up delayed, feed-down not
            CHECK(s->layers[2].inputs[0].layer == 0);
            CHECK(s->layers[2].inputs[0].delay == 1);
            CHECK(s->layers[2].inputs[1].kind == InputSource::Kind::boundary);
            CHECK(s->layers[1].inputs[1].layer == 3);
            CHECK(s->layers[1].inputs[1].delay == 0);
            const auto order = s->evaluation_order();
            CHECK(order == std::vector<int>{2, 3, 0, 1});
        }
        CHECK(b.size_label() == "4x5");
        CHECK_THROWS_AS(make_network_spec(Variant::hlstm_b, 3, 5, v), ConfigError);
        CHECK_THROWS_AS(make_network_spec(Variant::hlstm_b, 2, 5, v), ConfigError);
        CHECK_THROWS_AS(make_network_spec(Variant::mono, 0, 5, v), ConfigError);
        CHECK(parse_variant("hlstm_a") == Variant::hlstm_a);
        CHECK_THROWS_AS(parse_variant("hlstm_c"), ConfigError);
    }

    TEST_CASE("spec validation catches bad wiring")
    {
        const Vocabulary v = fixture::letters(3);
        NetworkSpec s = make_network_spec(Variant::hlstm_b, 4, 5, v);
        SUBCASE("undelayed feed-up")
        {
            s.layers[2].inputs[0].delay = 0;
            CHECK_THROWS_AS(s.validate(), ConfigError);
        }
        SUBCASE("missing layer")
        {
            s.layers[1].inputs[1].layer = 9;
            CHECK_THROWS_AS(s.validate(), ConfigError);
        }
        SUBCASE("output layer out of range")
        {
            s.output_layer = 7;
            CHECK_THROWS_AS(s.validate(), ConfigError);
        }
    }

    TEST_CASE("spec text round trip")
    {
        const Vocabulary v = fixture::letters(3);
        for (Variant var : {Variant::mono, Variant::hlstm_a, Variant::hlstm_b}) {
            const NetworkSpec s = make_network_spec(var, 4, 6, v, PeepholeKind::full);
            CHECK(NetworkSpec::from_text(s.to_text()) == s);
        }
        CHECK_THROWS_AS(NetworkSpec::from_text("variant=mono\nbogus=1\n"), DataError);
    }

    TEST_CASE("zero parameters give uniform outputs")
    {
        const Vocabulary v = fixture::letters(3);
        for (Variant var : {Variant::mono, Variant::hlstm_a, Variant::hlstm_b}) {
            Network net{make_network_spec(var, 4, 4, v), {}};
            net.params = zero_params(net.spec);
            const std::vector<int> ids{0, 1, 3, 2, 4};
            const ForwardResult fr = hrnn_forward(net, ids, derive_clocks(ids, v, net.spec.levels));
            for (const Vector &p : fr.probs)
                for (double x : p)
                    CHECK(x == 0.2);
            const StepOutput so = step_stateful(net, initial_state(net.spec), 0);
            for (double x : so.probs)
                CHECK(x == 0.2);
        }
    }

    TEST_CASE("word module is frozen without boundaries")
    {
        const Vocabulary v = fixture::letters(3);
        const Network net = fixture::random_network(Variant::hlstm_b, 4, 4, v, 5);
        const CellState zero = CellState::zeros(4, true);
        NetworkState st = initial_state(net.spec);
        for (int id : {0, 1, 2, 2, 1, 0, 0}) {
            st = step_stateful(net, st, id).state;
            CHECK(st.layers[2] == zero);
            CHECK(st.layers[3] == zero);
            CHECK(st.layers[0] != zero);
        }
        const std::vector<int> ids{0, 1, 2, 2, 1, 0, 0};
        const ForwardResult fr = hrnn_forward(net, ids, derive_clocks(ids, v, 2), initial_state(net.spec), true);
        for (const StepTape &t : fr.tape) {
            CHECK(t.layers[2].clock == 0);
            CHECK(t.layers[3].clock == 0);
        }
    }

    TEST_CASE("forward equals hand composition of clocked steps")
    {
        const Vocabulary v = fixture::letters(3);
        const std::size_t V = v.size(), H = 3;
        const int w = v.word_boundary_id();
        for (Variant var : {Variant::hlstm_a, Variant::hlstm_b}) {
            const Network net = fixture::random_network(var, 4, H, v, 23);
            const auto &L = net.params.layers;
            const std::vector<int> ids{1, w, 2};

            CellState s0 = CellState::zeros(H, true), s1 = s0, s2 = s0, s3 = s0;
            Vector delayed0(H, 0.0);
            std::vector<Vector> want;
            for (int id : ids) {
                const int c2 = id == w ? 1 : 0;
                const Vector bnd{id == w ? 1.0 : 0.0, id == v.sentence_boundary_id() ? 1.0 : 0.0};
                s2 = clocked_reset_step<LstmCell>(L[2], concat(delayed0, bnd), s2, c2, 0);
                s3 = clocked_reset_step<LstmCell>(L[3], s2.h, s3, c2, 0);
                s0 = clocked_reset_step<LstmCell>(L[0], one_hot(V, id), s0, 1, c2);
                const Vector lower = var == Variant::hlstm_a ? one_hot(V, id) : s0.h;
                s1 = clocked_reset_step<LstmCell>(L[1], concat(lower, s3.h), s1, 1, c2);
                delayed0 = s0.h;
                Vector logits(net.params.b_out);
                gemv_acc(net.params.W_out, s1.h, logits);
                want.push_back(softmax(logits));
            }
            const ForwardResult fr = hrnn_forward(net, ids, derive_clocks(ids, v, 2));
            for (std::size_t t = 0; t < ids.size(); ++t)
                CHECK(fr.probs[t] == want[t]);
        }
    }

    TEST_CASE("streaming fold equals the batch forward pass")
    {
        const Vocabulary v = fixture::letters(4);
        std::mt19937_64 rng(31);
        for (Variant var : {Variant::mono, Variant::hlstm_a, Variant::hlstm_b}) {
            const Network net = fixture::random_network(var, 4, 5, v, 7);
            for (int trial = 0; trial < 5; ++trial) {
                const auto ids = fixture::random_ids(rng, v, 15);
                const ForwardResult fr = hrnn_forward(net, ids, derive_clocks(ids, v, net.spec.levels));
                NetworkState st = initial_state(net.spec);
                for (std::size_t t = 0; t < ids.size(); ++t) {
                    StepOutput so = step_stateful(net, st, ids[t]);
                    CHECK(so.probs == fr.probs[t]);
                    st = std::move(so.state);
                }
                CHECK(st == fr.final_state);
            }
        }
    }

    TEST_CASE("cloned states are independent")
    {
        const Vocabulary v = fixture::letters(3);
        const Network net = fixture::random_network(Variant::hlstm_b, 4, 4, v, 3);
        NetworkState st = initial_state(net.spec);
        for (int id : {0, 1, v.word_boundary_id(), 2})
            st = step_stateful(net, st, id).state;
        const NetworkState snapshot = st;
        const StepOutput a = step_stateful(net, st, 0);
        const StepOutput b = step_stateful(net, st, v.word_boundary_id());
        CHECK(st == snapshot);
        CHECK(a.state != b.state);
        const StepOutput a2 = step_stateful(net, snapshot, 0);
        CHECK(a2.probs == a.probs);
    }

    TEST_CASE("build_network is seeded and bounded")
    {
        const Vocabulary v = fixture::letters(3);
        const NetworkSpec spec = make_network_spec(Variant::hlstm_b, 4, 6, v);
        CHECK(build_network(spec, 9) == build_network(spec, 9));
        CHECK_FALSE(build_network(spec, 9) == build_network(spec, 10));
        build_network(spec, 9).visit([](ConstParamBlock b) {
            for (double x : b.values)
                CHECK(std::abs(x) <= 0.08);
        });
    }

    TEST_CASE("out-of-range ids are rejected")
    {
        const Vocabulary v = fixture::letters(2);
        const Network net = fixture::random_network(Variant::mono, 1, 3, v, 1);
        CHECK_THROWS_AS(step_stateful(net, initial_state(net.spec), 99), ArgumentError);
    }
}

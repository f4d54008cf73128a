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
#include <algorithm>
#include <random>
#include <sstream>

#include "hclm/decode.hpp"
#include "hclm/error.hpp"
#include "hclm/training.hpp"
#include "oracles/ctc_enumeration.hpp"
#include "oracles/fixtures.hpp"

using namespace hclm;

namespace {

PosteriorMatrix single_frame()
{
    std::istringstream in("1 2 <blank> a\n0.1 0.9\n");
    return read_posteriors_text(in);
}

DecodeConfig exhaustive_config()
{
    DecodeConfig c;
    c.beam_width = 100000;
    c.width_prune = 0.0;
    return c;
}

std::string ids_text(const std::vector<int> &ids, const Vocabulary &v)
{
    std::string s;
    for (int id : ids)
        s += v.symbol(id) + " ";
    return s;
}

} // namespace

TEST_SUITE("decode")
{
    TEST_CASE("single frame argmax")
    {
        const Vocabulary v = fixture::letters(2);
        const Network net = fixture::random_network(Variant::hlstm_b, 4, 3, v, 1);
        DecodeConfig c;
        c.lm_weight = 0.0;
        c.insertion_bonus = 0.0;
        const auto hyps = beam_search(single_frame(), net, v, c);
        REQUIRE_FALSE(hyps.empty());
        CHECK(transcript(hyps[0], v) == "a");
        CHECK(hyps[0].ctc_logp() == doctest::Approx(std::log(0.9)));
        CHECK(hyps.size() == 2);
        CHECK(transcript(hyps[1], v).empty());
    }

    TEST_CASE("saturating beam equals exhaustive enumeration")
    {
        const Vocabulary v = fixture::letters(3);
        std::mt19937_64 rng(123);
        for (int trial = 0; trial < 12; ++trial) {
            const Network net = fixture::random_network(trial % 2 ? Variant::hlstm_b : Variant::mono, 4, 3, v,
                                                        static_cast<std::uint64_t>(trial), 1.0);
            const std::size_t T = 1 + rng() % 5;
            const auto post = fixture::random_posteriors(rng, T, {"a", "b", "<w>"});
            const DecodeConfig c = exhaustive_config();
            const auto hyps = beam_search(post, net, v, c);
            const auto ref = oracle::enumerate_ctc(post, net, v, c.lm_weight, c.insertion_bonus);
            REQUIRE(hyps.size() == ref.size());
            CHECK(hyps[0].prefix == ref[0].prefix);
            for (std::size_t i = 0; i < ref.size(); ++i) {
                CHECK(std::abs(hyps[i].score - ref[i].score) < 1e-9);
                CHECK(std::abs(hyps[i].ctc_logp() - ref[i].ctc_logp) < 1e-9);
                CHECK(std::abs(hyps[i].lm_logp - ref[i].lm_logp) < 1e-9);
            }
        }
    }

    TEST_CASE("exact ties resolve to the lexicographically smaller prefix")
    {
        const Vocabulary v = fixture::letters(2);
        Network net{make_network_spec(Variant::mono, 1, 2, v), {}};
        net.params = zero_params(net.spec);
        std::istringstream in("2 3 <blank> a b\n0.2 0.4 0.4\n0.2 0.4 0.4\n");
        const PosteriorMatrix post = read_posteriors_text(in);
        const auto hyps = beam_search(post, net, v, exhaustive_config());
        const auto ref = oracle::enumerate_ctc(post, net, v, 2.0, 1.6);
        CHECK(hyps[0].prefix == ref[0].prefix);
        // a and b tie exactly, as do ab and ba
        CHECK(ids_text(hyps[0].prefix, v) == ids_text(ref[0].prefix, v));
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(hyps[i].prefix == ref[i].prefix);
    }

    TEST_CASE("a strong language model dominates uniform posteriors")
    {
        const Vocabulary v = fixture::letters(3);
        std::vector<TokenSequence> corpus(8, tokenize("cab", v));
        // Training primes each line with <s>, as decoding does.
        TrainConfig tc;
        tc.max_epochs = 60;
        tc.batch_size = 4;
        const TrainResult tr = train(make_network_spec(Variant::mono, 1, 8, v), corpus, {}, tc);

        PosteriorMatrix post;
        post.frames = 4;
        post.labels = {"<blank>", "a", "b", "c"};
        post.values.assign(16, 0.25);
        const DecodeConfig c = exhaustive_config();
        const auto hyps = beam_search(post, tr.last, v, c);
        const auto ref = oracle::enumerate_ctc(post, tr.last, v, c.lm_weight, c.insertion_bonus);
        CHECK(transcript(hyps[0], v) == "cab");
        CHECK(hyps[0].prefix == ref[0].prefix);
    }

    TEST_CASE("hypothesis bookkeeping")
    {
        const Vocabulary v = fixture::letters(3);
        const Network net = fixture::random_network(Variant::hlstm_a, 4, 3, v, 5, 0.8);
        std::mt19937_64 rng(8);
        const auto post = fixture::random_posteriors(rng, 6, {"a", "b", "c", "<w>"});
        DecodeConfig c;
        c.beam_width = 16;
        const auto hyps = beam_search(post, net, v, c);
        CHECK(hyps.size() == 16);
        for (std::size_t i = 0; i < hyps.size(); ++i) {
            const Hypothesis &h = hyps[i];
            // score decomposition
            CHECK(std::abs(h.score - hypothesis_score(h.ctc_logp(), h.lm_logp, h.prefix, v, c)) < 1e-9);
            // LM state equals the fold over <s> and the prefix
            NetworkState st = initial_state(net.spec);
            st = step_stateful(net, st, v.sentence_boundary_id()).state;
            for (int id : h.prefix)
                st = step_stateful(net, st, id).state;
            CHECK(st == h.lm_state);
            CHECK(std::abs(h.lm_logp - oracle::lm_log_prob(net, v, h.prefix)) < 1e-9);
            if (i > 0)
                CHECK(hyps[i - 1].score >= h.score);
        }
    }

    TEST_CASE("pruned beams are bounded by the exhaustive optimum and reach it when saturated")
    {
        // Pruned prefix beam search is not monotone in the beam width: a
        // wider beam can crowd out a prefix a narrower one kept. What holds
        // is that a pruned beam never beats the exact optimum.
        const Vocabulary v = fixture::letters(3);
        std::mt19937_64 rng(55);
        for (int trial = 0; trial < 10; ++trial) {
            const Network net = fixture::random_network(Variant::hlstm_b, 4, 3, v, 100 + trial, 1.0);
            const auto post = fixture::random_posteriors(rng, 6, {"a", "b", "c", "<w>"});
            const double exact = oracle::enumerate_ctc(post, net, v, 2.0, 1.6)[0].score;
            for (std::size_t beam : {1u, 2u, 4u, 8u, 32u}) {
                DecodeConfig c;
                c.beam_width = beam;
                c.width_prune = 0.0;
                CHECK(beam_search(post, net, v, c)[0].score <= exact + 1e-9);
            }
            DecodeConfig wide;
            wide.beam_width = 100000;
            wide.width_prune = 0.0;
            CHECK(std::abs(beam_search(post, net, v, wide)[0].score - exact) < 1e-9);
        }
    }

    TEST_CASE("pruning")
    {
        const Vocabulary v = fixture::letters(3);
        const Network net = fixture::random_network(Variant::mono, 1, 3, v, 2);
        DecodeConfig c = exhaustive_config();
        c.width_prune = 1e-4;
        {
            std::istringstream in("1 4 <blank> a b c\n0.5 0.49995 0.00004 0.00001\n");
            const auto hyps = beam_search(read_posteriors_text(in), net, v, c);
            REQUIRE(hyps.size() == 2);
            std::vector<std::string> got{transcript(hyps[0], v), transcript(hyps[1], v)};
            std::sort(got.begin(), got.end());
            CHECK(got == std::vector<std::string>{"", "a"});
        }
        c.width_prune = 0.0;
        c.depth_prune = 1;
        {
            std::istringstream in("2 4 <blank> a b c\n0.1 0.5 0.2 0.2\n0.1 0.4 0.3 0.2\n");
            for (const auto &h : beam_search(read_posteriors_text(in), net, v, c))
                for (int id : h.prefix)
                    CHECK(id == *v.find("a"));
        }
    }

    TEST_CASE("insertion units")
    {
        const Vocabulary v = fixture::letters(3);
        const int a = 0, w = v.word_boundary_id();
        const std::vector<int> p{a, a, w, a, w};
        CHECK(insertion_units(p, v, InsertionUnit::character) == 5);
        CHECK(insertion_units(p, v, InsertionUnit::word) == 2);
        CHECK(parse_insertion_unit("word") == InsertionUnit::word);
        CHECK_THROWS_AS(parse_insertion_unit("phone"), ConfigError);
    }

    TEST_CASE("input validation")
    {
        const Vocabulary v = fixture::letters(2);
        const Network net = fixture::random_network(Variant::mono, 1, 3, v, 1);
        {
            std::istringstream in("1 2 <blank> a\n0.3 0.3\n");
            CHECK_THROWS_AS(beam_search(read_posteriors_text(in), net, v, DecodeConfig{}), DataError);
        }
        {
            std::istringstream in("1 2 <blank> q\n0.5 0.5\n");
            CHECK_THROWS_AS(beam_search(read_posteriors_text(in), net, v, DecodeConfig{}), ConfigError);
        }
        {
            std::istringstream in("1 2 x a\n0.5 0.5\n");
            CHECK_THROWS_AS(read_posteriors_text(in).validate(), DataError);
        }
        {
            std::istringstream in("2 2 <blank> a\n0.5 0.5\n");
            CHECK_THROWS_AS(read_posteriors_text(in), DataError);
        }
        DecodeConfig bad;
        bad.beam_width = 0;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
        const Vocabulary other = fixture::letters(3);
        CHECK_THROWS_AS(beam_search(single_frame(), net, other, DecodeConfig{}), ConfigError);
    }

    TEST_CASE("posterior files round trip")
    {
        std::mt19937_64 rng(4);
        const auto post = fixture::random_posteriors(rng, 5, {"a", "<w>", "\\"});
        std::stringstream text;
        write_posteriors_text(text, post);
        const PosteriorMatrix t = read_posteriors_text(text);
        CHECK(t.labels == post.labels);
        for (std::size_t i = 0; i < post.values.size(); ++i)
            CHECK(t.values[i] == post.values[i]);

        std::stringstream bin;
        write_posteriors_binary(bin, post);
        const PosteriorMatrix b = read_posteriors_binary(bin);
        CHECK(b.labels == post.labels);
        CHECK(b.frames == 5);
        for (std::size_t i = 0; i < post.values.size(); ++i)
            CHECK(std::abs(b.values[i] - post.values[i]) < 1e-7);
        CHECK_NOTHROW(b.validate());
    }

    TEST_CASE("n-best CSV")
    {
        const Vocabulary v = fixture::letters(2);
        const Network net = fixture::random_network(Variant::mono, 1, 3, v, 1);
        const DecodeConfig c;
        const auto hyps = beam_search(single_frame(), net, v, c);
        const std::string csv = format_nbest_csv(hyps, v, c);
        CHECK(csv.rfind("rank,transcript,score,ctc_logp,lm_logp,units\n1,\"a\",", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    }

    TEST_CASE("word error rate")
    {
        using W = std::vector<std::string>;
        CHECK(wer(W{"a", "b"}, W{"a", "b"}) == 0.0);
        CHECK(wer(W{"a", "b", "c"}, W{"a", "c"}) == doctest::Approx(1.0 / 3.0));
        CHECK(wer(W{"a"}, W{"b", "c"}) == 2.0);
        CHECK(wer(split_words("the cat  sat"), split_words(" the mat sat\n")) == doctest::Approx(1.0 / 3.0));
        CHECK_THROWS_AS(wer(W{}, W{"a"}), ArgumentError);
    }
}

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

// Shared test fixtures: tiny vocabularies, random networks and id streams,
// and a central finite-difference gradient oracle.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "hclm/corpus.hpp"
#include "hclm/decode.hpp"
#include "hclm/hierarchy.hpp"
#include "hclm/training.hpp"

namespace hclm::fixture {

// Letters a.. plus <w> and <s>.
inline Vocabulary letters(std::size_t n)
{
    std::string text;
    for (std::size_t i = 0; i < n; ++i)
        text += static_cast<char>('a' + i);
    return build_vocab(text, TokenMode::character);
}

inline void randomize(Network &net, std::mt19937_64 &rng, double scale)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    net.params.visit([&](ParamBlock b) {
        for (double &v : b.values)
            v = u(rng);
    });
}

inline Network random_network(Variant v, std::size_t layers, std::size_t hidden, const Vocabulary &vocab,
                              std::uint64_t seed, double scale = 0.5, PeepholeKind peep = PeepholeKind::diagonal)
{
    Network net;
    net.spec = make_network_spec(v, layers, hidden, vocab, peep);
    net.params = zero_params(net.spec);
    std::mt19937_64 rng(seed);
    randomize(net, rng, scale);
    return net;
}

// Random ids with at least one <w> and one <s> inside, no <w> adjacent to a
// boundary, starting with a letter.
inline std::vector<int> random_ids(std::mt19937_64 &rng, const Vocabulary &vocab, std::size_t len)
{
    const int w = vocab.word_boundary_id();
    const int s = vocab.sentence_boundary_id();
    std::vector<int> letters_ids;
    for (std::size_t i = 0; i < vocab.size(); ++i)
        if (!vocab.is_boundary(static_cast<int>(i)))
            letters_ids.push_back(static_cast<int>(i));
    std::uniform_int_distribution<std::size_t> pick(0, letters_ids.size() - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<int> ids;
    for (std::size_t t = 0; t < len; ++t) {
        const bool prev_letter = !ids.empty() && !vocab.is_boundary(ids.back());
        const double r = u(rng);
        if (prev_letter && r < 0.2)
            ids.push_back(w);
        else if (prev_letter && r < 0.3)
            ids.push_back(s);
        else
            ids.push_back(letters_ids[pick(rng)]);
    }
    // Force both boundaries at interior positions.
    ids[len / 3] = w;
    ids[(2 * len) / 3] = s;
    if (vocab.is_boundary(ids[0]))
        ids[0] = letters_ids[0];
    return ids;
}

struct FdComparison
{
    std::size_t checked = 0;
    double max_rel = 0.0;
    double max_abs = 0.0;
    std::string worst;
};

// Central differences of sequence_loss against sequence_loss_and_gradient.
// Relative error uses max(|a|, |n|, floor) as denominator.
inline FdComparison compare_with_fd(const Network &net, const std::vector<int> &ids, double h, double floor)
{
    NetworkParams analytic = zero_params(net.spec);
    sequence_loss_and_gradient(net, ids, analytic);
    std::vector<std::vector<double>> grads;
    std::vector<std::string> names;
    analytic.visit([&](ConstParamBlock b) {
        grads.emplace_back(b.values.begin(), b.values.end());
        names.push_back(b.name);
    });

    Network probe = net;
    std::vector<std::span<double>> spans;
    probe.params.visit([&](ParamBlock b) { spans.push_back(b.values); });

    FdComparison out;
    for (std::size_t b = 0; b < spans.size(); ++b) {
        for (std::size_t i = 0; i < spans[b].size(); ++i) {
            const double saved = spans[b][i];
            spans[b][i] = saved + h;
            const double lp = sequence_loss(probe, ids);
            spans[b][i] = saved - h;
            const double lm = sequence_loss(probe, ids);
            spans[b][i] = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double a = grads[b][i];
            const double abs_err = std::abs(a - numeric);
            const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), floor});
            ++out.checked;
            out.max_abs = std::max(out.max_abs, abs_err);
            if (rel > out.max_rel) {
                out.max_rel = rel;
                out.worst = names[b] + "[" + std::to_string(i) + "]";
            }
        }
    }
    return out;
}

// Random frame posteriors over <blank> plus `labels`, every entry bounded
// away from zero.
inline PosteriorMatrix random_posteriors(std::mt19937_64 &rng, std::size_t frames,
                                         const std::vector<std::string> &labels)
{
    PosteriorMatrix post;
    post.frames = frames;
    post.labels.push_back(std::string(kBlankLabel));
    post.labels.insert(post.labels.end(), labels.begin(), labels.end());
    const std::size_t K = post.labels.size();
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (std::size_t t = 0; t < frames; ++t) {
        std::vector<double> row(K);
        double sum = 0.0;
        for (double &x : row)
            sum += (x = u(rng) * u(rng));
        for (double x : row)
            post.values.push_back(x / sum);
    }
    return post;
}

} // namespace hclm::fixture

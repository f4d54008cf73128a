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

#include "hclm/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>

#include "hclm/cells.hpp"
#include "hclm/error.hpp"

namespace hclm {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b)
{
    if (a == kNegInf)
        return b;
    if (b == kNegInf)
        return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// LM state after a prefix together with log p(next | prefix).
struct LmNode
{
    NetworkState state;
    Vector next_logp;
};

std::shared_ptr<const LmNode> make_node(const Network &clm, NetworkState state, int id)
{
    auto node = std::make_shared<LmNode>();
    const Vector logits = step_logits(clm, state, id);
    const Vector p = softmax(logits);
    node->next_logp.resize(p.size());
    for (std::size_t k = 0; k < p.size(); ++k)
        node->next_logp[k] = std::log(p[k]);
    node->state = std::move(state);
    return node;
}

struct Beam
{
    std::vector<int> prefix;
    double lpb = kNegInf;
    double lpnb = kNegInf;
    double lm_logp = 0.0;
    std::shared_ptr<const LmNode> lm; // null until the last label has been fed
    std::shared_ptr<const LmNode> parent;
    double score = kNegInf;
};

bool better(const Beam &a, const Beam &b)
{
    if (a.score != b.score)
        return a.score > b.score;
    return a.prefix < b.prefix;
}

std::string csv_quote(const std::string &s)
{
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace

InsertionUnit parse_insertion_unit(std::string_view text)
{
    if (text == "char")
        return InsertionUnit::character;
    if (text == "word")
        return InsertionUnit::word;
    throw ConfigError("unknown insertion unit '" + std::string(text) + "' (expected char or word)");
}

void DecodeConfig::validate() const
{
    if (beam_width < 1)
        throw ConfigError("beam_width must be >= 1");
    if (!(width_prune >= 0.0 && width_prune < 1.0))
        throw ConfigError("width_prune must lie in [0,1)");
    if (!std::isfinite(lm_weight) || !std::isfinite(insertion_bonus))
        throw ConfigError("lm_weight and insertion_bonus must be finite");
    if (nbest < 1)
        throw ConfigError("nbest must be >= 1");
}

double Hypothesis::ctc_logp() const
{
    return log_add(log_p_blank, log_p_nonblank);
}

std::size_t insertion_units(std::span<const int> prefix, const Vocabulary &vocab, InsertionUnit unit)
{
    if (unit == InsertionUnit::character)
        return prefix.size();
    std::size_t words = 0;
    bool in_word = false;
    for (int id : prefix) {
        const bool b = vocab.is_boundary(id);
        if (!b && !in_word)
            ++words;
        in_word = !b;
    }
    return words;
}

double hypothesis_score(double ctc_logp, double lm_logp, std::span<const int> prefix, const Vocabulary &vocab,
                        const DecodeConfig &config)
{
    return ctc_logp + config.lm_weight * lm_logp +
           config.insertion_bonus * static_cast<double>(insertion_units(prefix, vocab, config.insertion_unit));
}

std::vector<Hypothesis> beam_search(const PosteriorMatrix &post, const Network &clm, const Vocabulary &vocab,
                                    const DecodeConfig &config)
{
    config.validate();
    post.validate();
    if (clm.spec.vocab_size != vocab.size())
        throw ConfigError("language model vocabulary size " + std::to_string(clm.spec.vocab_size) +
                          " does not match the vocabulary (" + std::to_string(vocab.size()) + ")");

    const int blank = post.blank_index();
    const std::size_t K = post.label_count();
    std::vector<int> label_to_id(K, -1);
    for (std::size_t k = 0; k < K; ++k) {
        if (static_cast<int>(k) == blank)
            continue;
        const auto id = vocab.find(post.labels[k]);
        if (!id)
            throw ConfigError("posterior label '" + post.labels[k] + "' is not in the language model vocabulary");
        label_to_id[k] = *id;
    }

    Beam root;
    root.lpb = 0.0;
    root.lm = make_node(clm, initial_state(clm.spec), vocab.sentence_boundary_id());
    root.score = 0.0;
    std::vector<Beam> beam{root};

    std::vector<double> logy(K);
    std::vector<std::size_t> extend_labels;
    for (std::size_t t = 0; t < post.frames; ++t) {
        const auto y = post.row(t);
        for (std::size_t k = 0; k < K; ++k)
            logy[k] = y[k] > 0.0 ? std::log(y[k]) : kNegInf;

        extend_labels.clear();
        for (std::size_t k = 0; k < K; ++k) {
            if (static_cast<int>(k) != blank && y[k] > 0.0 && y[k] >= config.width_prune)
                extend_labels.push_back(k);
        }
        if (config.depth_prune > 0 && extend_labels.size() > config.depth_prune) {
            std::stable_sort(extend_labels.begin(), extend_labels.end(),
                             [&](std::size_t a, std::size_t b) { return y[a] > y[b]; });
            extend_labels.resize(config.depth_prune);
            std::sort(extend_labels.begin(), extend_labels.end());
        }

        std::map<std::vector<int>, Beam> next;
        auto slot = [&](const std::vector<int> &prefix) -> Beam & {
            auto [it, inserted] = next.try_emplace(prefix);
            if (inserted)
                it->second.prefix = prefix;
            return it->second;
        };

        for (const Beam &h : beam) {
            const double total = log_add(h.lpb, h.lpnb);
            {
                Beam &same = slot(h.prefix);
                same.lm_logp = h.lm_logp;
                same.lm = h.lm;
                same.lpb = log_add(same.lpb, total + logy[blank]);
                if (!h.prefix.empty()) {
                    // The last label repeats without a blank in between.
                    const int last = h.prefix.back();
                    for (std::size_t k = 0; k < K; ++k) {
                        if (label_to_id[k] == last)
                            same.lpnb = log_add(same.lpnb, h.lpnb + logy[k]);
                    }
                }
            }
            for (std::size_t k : extend_labels) {
                const int id = label_to_id[k];
                std::vector<int> longer = h.prefix;
                longer.push_back(id);
                Beam &ext = slot(longer);
                const bool repeat = !h.prefix.empty() && h.prefix.back() == id;
                ext.lpnb = log_add(ext.lpnb, (repeat ? h.lpb : total) + logy[k]);
                if (!ext.lm) {
                    ext.lm_logp = h.lm_logp + h.lm->next_logp[id];
                    ext.parent = h.lm;
                }
            }
        }

        beam.clear();
        beam.reserve(next.size());
        for (auto &[prefix, b] : next) {
            b.score = hypothesis_score(log_add(b.lpb, b.lpnb), b.lm_logp, b.prefix, vocab, config);
            if (b.score != kNegInf)
                beam.push_back(std::move(b));
        }
        if (beam.size() > config.beam_width) {
            std::partial_sort(beam.begin(), beam.begin() + static_cast<std::ptrdiff_t>(config.beam_width),
                              beam.end(), better);
            beam.resize(config.beam_width);
        }
        for (Beam &b : beam) {
            if (!b.lm) {
                b.lm = make_node(clm, b.parent->state, b.prefix.back());
                b.parent.reset();
            }
        }
    }

    std::sort(beam.begin(), beam.end(), better);
    std::vector<Hypothesis> out;
    for (Beam &b : beam) {
        Hypothesis h;
        h.prefix = std::move(b.prefix);
        h.log_p_blank = b.lpb;
        h.log_p_nonblank = b.lpnb;
        h.lm_logp = b.lm_logp;
        h.lm_state = b.lm->state;
        h.score = b.score;
        out.push_back(std::move(h));
    }
    return out;
}

std::string transcript(const Hypothesis &hyp, const Vocabulary &vocab)
{
    std::string text = detokenize(hyp.prefix, vocab);
    while (!text.empty() && (text.back() == '\n' || text.back() == ' '))
        text.pop_back();
    return text;
}

std::string format_nbest_csv(std::span<const Hypothesis> hyps, const Vocabulary &vocab, const DecodeConfig &config)
{
    std::ostringstream out;
    out << "rank,transcript,score,ctc_logp,lm_logp,units\n";
    char buf[160];
    for (std::size_t r = 0; r < hyps.size(); ++r) {
        const Hypothesis &h = hyps[r];
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%zu\n", h.score, h.ctc_logp(), h.lm_logp,
                      insertion_units(h.prefix, vocab, config.insertion_unit));
        out << (r + 1) << ',' << csv_quote(transcript(h, vocab)) << buf;
    }
    return out.str();
}

std::vector<std::string> split_words(std::string_view text)
{
    std::vector<std::string> words;
    std::istringstream in{std::string(text)};
    std::string w;
    while (in >> w)
        words.push_back(w);
    return words;
}

double wer(std::span<const std::string> reference, std::span<const std::string> hypothesis)
{
    if (reference.empty())
        throw ArgumentError("WER is undefined for an empty reference");
    const std::size_t n = reference.size(), m = hypothesis.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[m]) / static_cast<double>(n);
}

} // namespace hclm

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

#include "hclm/eval.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "hclm/cells.hpp"
#include "hclm/error.hpp"

namespace hclm {

double LossTotals::bpc() const
{
    if (predictions == 0)
        return 0.0;
    return nats / (static_cast<double>(predictions) * std::numbers::ln2);
}

LossTotals sequence_log_loss(const Network &net, std::span<const int> ids, std::size_t window)
{
    LossTotals totals;
    if (ids.size() < 2)
        return totals;
    const std::size_t steps = ids.size() - 1;
    const std::size_t chunk = window == 0 ? steps : window;
    NetworkState state = initial_state(net.spec);
    for (std::size_t start = 0; start < steps; start += chunk) {
        const std::size_t len = std::min(chunk, steps - start);
        const auto inputs = ids.subspan(start, len);
        const ClockPlan clocks = derive_clocks(inputs, net.spec.clock_triggers, net.spec.levels);
        ForwardResult fwd = hrnn_forward(net, inputs, clocks, state);
        for (std::size_t t = 0; t < len; ++t) {
            const double p = fwd.probs[t][ids[start + t + 1]];
            totals.nats -= std::log(p);
        }
        totals.predictions += len;
        state = std::move(fwd.final_state);
    }
    return totals;
}

std::vector<int> with_sentence_start(const NetworkSpec &spec, std::span<const int> ids)
{
    std::vector<int> out;
    out.reserve(ids.size() + 1);
    out.push_back(spec.sentence_boundary_id);
    out.insert(out.end(), ids.begin(), ids.end());
    return out;
}

double bpc(const Network &net, const TokenSequence &seq)
{
    return sequence_log_loss(net, with_sentence_start(net.spec, seq.ids)).bpc();
}

double ppl_from_bpc(double bpc, std::size_t char_count, std::size_t word_count)
{
    if (word_count == 0)
        throw ArgumentError("word perplexity needs at least one word");
    return std::exp2(bpc * static_cast<double>(char_count) / static_cast<double>(word_count));
}

EvalReport evaluate(const Network &net, const TokenSequence &seq)
{
    return evaluate(net, std::vector<TokenSequence>{seq});
}

EvalReport evaluate(const Network &net, const std::vector<TokenSequence> &sequences)
{
    LossTotals totals;
    EvalReport report;
    for (const auto &seq : sequences) {
        totals += sequence_log_loss(net, with_sentence_start(net.spec, seq.ids));
        report.char_count += seq.char_count;
        report.word_count += seq.word_count;
    }
    report.bpc = totals.bpc();
    report.predictions = totals.predictions;
    report.word_ppl = ppl_from_bpc(report.bpc, report.char_count, report.word_count);
    return report;
}

std::string format_param_count(std::size_t count)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f M", static_cast<double>(count) / 1e6);
    return buf;
}

std::string format_report_table(const EvalReport &report, const Network &net)
{
    char buf[256];
    std::ostringstream out;
    std::snprintf(buf, sizeof buf, "%-10s %-10s %-10s %-10s %10s %10s\n", "Size", "# Params", "BPC", "Word PPL",
                  "N_c", "N_w");
    out << buf;
    std::snprintf(buf, sizeof buf, "%-10s %-10s %-10.4f %-10.2f %10zu %10zu\n", net.spec.size_label().c_str(),
                  format_param_count(net.params.parameter_count()).c_str(), report.bpc, report.word_ppl,
                  report.char_count, report.word_count);
    out << buf;
    return out.str();
}

std::string format_report_csv(const EvalReport &report, const Network &net, bool with_header)
{
    std::ostringstream out;
    if (with_header)
        out << "size,params,bpc,word_ppl\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.4f\n", net.spec.size_label().c_str(),
                  net.params.parameter_count(), report.bpc, report.word_ppl);
    out << buf;
    return out.str();
}

std::vector<int> sample(const Network &net, std::span<const int> prime, std::size_t length, double temperature,
                        std::uint64_t seed)
{
    if (!(temperature > 0.0))
        throw ArgumentError("sampling temperature must be > 0");
    std::mt19937_64 rng(seed);
    NetworkState state = initial_state(net.spec);
    Vector logits;
    logits = step_logits(net, state, net.spec.sentence_boundary_id);
    for (int id : prime)
        logits = step_logits(net, state, id);

    std::vector<int> out;
    out.reserve(length);
    for (std::size_t n = 0; n < length; ++n) {
        for (double &z : logits)
            z /= temperature;
        const Vector p = softmax(logits);
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        double cum = 0.0;
        int pick = static_cast<int>(p.size()) - 1;
        for (std::size_t k = 0; k < p.size(); ++k) {
            cum += p[k];
            if (u < cum) {
                pick = static_cast<int>(k);
                break;
            }
        }
        out.push_back(pick);
        logits = step_logits(net, state, pick);
    }
    return out;
}

std::string sample_text(const Network &net, const Vocabulary &vocab, std::string_view prime, std::size_t length,
                        double temperature, std::uint64_t seed)
{
    const std::vector<int> prime_ids = tokenize_fragment(prime, vocab);
    const std::vector<int> ids = sample(net, prime_ids, length, temperature, seed);
    return std::string(prime) + detokenize(ids, vocab);
}

} // namespace hclm

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

// Bits-per-character, word perplexity and sampling.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hclm/corpus.hpp"
#include "hclm/hierarchy.hpp"

namespace hclm {

struct LossTotals
{
    double nats = 0.0;
    std::size_t predictions = 0;

    double bpc() const;
    LossTotals &operator+=(const LossTotals &o)
    {
        nats += o.nats;
        predictions += o.predictions;
        return *this;
    }
};

// Next-token log loss over `ids` from a zero state with the state carried
// across the whole sequence. A non-zero `window` feeds the sequence in
// chunks of that many steps, carrying the state between chunks.
LossTotals sequence_log_loss(const Network &net, std::span<const int> ids, std::size_t window = 0);

// `ids` preceded by the sentence boundary. Every evaluated or trained
// sequence starts this way, so its first character is predicted from a zero
// state that has just read <s>.
std::vector<int> with_sentence_start(const NetworkSpec &spec, std::span<const int> ids);

// BPC of a sequence with the implicit leading <s>: N_c predictions.
double bpc(const Network &net, const TokenSequence &seq);

struct EvalReport
{
    double bpc = 0.0;
    std::size_t char_count = 0; // N_c
    std::size_t word_count = 0; // N_w
    std::size_t predictions = 0;
    double word_ppl = 0.0;
};

// PPL = 2^(bpc * N_c / N_w). Throws ArgumentError for N_w == 0.
double ppl_from_bpc(double bpc, std::size_t char_count, std::size_t word_count);

EvalReport evaluate(const Network &net, const TokenSequence &seq);

// Sequences are scored independently, each from a zero state and an
// implicit leading <s>.
EvalReport evaluate(const Network &net, const std::vector<TokenSequence> &sequences);

// Aligned "Size  # Params  BPC  Word PPL" table.
std::string format_report_table(const EvalReport &report, const Network &net);
std::string format_report_csv(const EvalReport &report, const Network &net, bool with_header);

// "3.23 M" style parameter count.
std::string format_param_count(std::size_t count);

// Autoregressive sampling at `temperature` (> 0). A zero state reads <s> and
// then the prime before the first draw. Returns only the generated ids.
std::vector<int> sample(const Network &net, std::span<const int> prime, std::size_t length, double temperature,
                        std::uint64_t seed);

std::string sample_text(const Network &net, const Vocabulary &vocab, std::string_view prime, std::size_t length,
                        double temperature, std::uint64_t seed);

} // namespace hclm

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

// CTC prefix beam search fused with a character-level language model.
//
// Each hypothesis is a collapsed label prefix with its CTC probability split
// into blank-ending and label-ending parts. It is ranked by
//
//     log(p_blank + p_nonblank) + lm_weight * lm_logp + insertion_bonus * |prefix|
//
// where lm_logp is the language-model log-probability of the prefix after an
// implicit <s>. The LM state of a prefix is advanced lazily, only once a new
// prefix survives pruning.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hclm/corpus.hpp"
#include "hclm/hierarchy.hpp"

namespace hclm {

inline constexpr std::string_view kBlankLabel = "<blank>";
inline constexpr char kPosteriorMagic[8] = {'H', 'C', 'L', 'M', 'P', 'O', 'S', 'T'};

// Frame-level label posteriors, frames x labels, row-major. Exactly one
// label is <blank>; the others name CLM vocabulary symbols.
struct PosteriorMatrix
{
    std::size_t frames = 0;
    std::vector<std::string> labels;
    std::vector<double> values;

    std::size_t label_count() const noexcept { return labels.size(); }
    std::span<const double> row(std::size_t t) const { return {values.data() + t * labels.size(), labels.size()}; }
    int blank_index() const;

    // Rows must sum to 1 within 1e-6 with entries in [0,1]; DataError otherwise.
    void validate() const;
};

// Text form: "T K label_1 ... label_K" then T rows of K probabilities.
PosteriorMatrix read_posteriors_text(std::istream &in);
void write_posteriors_text(std::ostream &out, const PosteriorMatrix &post);

// Binary form: magic "HCLMPOST", u32 T, u32 K, u64 length + space-separated
// labels, then T*K little-endian f32.
PosteriorMatrix read_posteriors_binary(std::istream &in);
void write_posteriors_binary(std::ostream &out, const PosteriorMatrix &post);

// Picks the format from the leading bytes.
PosteriorMatrix load_posteriors(const std::filesystem::path &path);

enum class InsertionUnit
{
    character,
    word,
};

InsertionUnit parse_insertion_unit(std::string_view text);

struct DecodeConfig
{
    std::size_t beam_width = 512;
    double lm_weight = 2.0;
    double insertion_bonus = 1.6;
    // Non-blank labels below this frame posterior are not used to extend prefixes.
    double width_prune = 1e-4;
    // At most this many labels (most probable first) extend prefixes per frame; 0 = all.
    std::size_t depth_prune = 0;
    InsertionUnit insertion_unit = InsertionUnit::character;
    std::size_t nbest = 1;

    void validate() const;
};

struct Hypothesis
{
    std::vector<int> prefix; // CLM vocabulary ids
    double log_p_blank = 0.0;
    double log_p_nonblank = 0.0;
    double lm_logp = 0.0;
    NetworkState lm_state; // after feeding <s> and then the prefix
    double score = 0.0;

    double ctc_logp() const;
};

// Number of insertion-bonus units in a prefix.
std::size_t insertion_units(std::span<const int> prefix, const Vocabulary &vocab, InsertionUnit unit);

double hypothesis_score(double ctc_logp, double lm_logp, std::span<const int> prefix, const Vocabulary &vocab,
                        const DecodeConfig &config);

// Returns the surviving hypotheses after the last frame, best first (score
// descending, ties by lexicographically smaller prefix).
std::vector<Hypothesis> beam_search(const PosteriorMatrix &post, const Network &clm, const Vocabulary &vocab,
                                    const DecodeConfig &config);

std::string transcript(const Hypothesis &hyp, const Vocabulary &vocab);

// rank,transcript,score,ctc_logp,lm_logp,units
std::string format_nbest_csv(std::span<const Hypothesis> hyps, const Vocabulary &vocab, const DecodeConfig &config);

std::vector<std::string> split_words(std::string_view text);

// Word-level Levenshtein distance over the reference length.
double wer(std::span<const std::string> reference, std::span<const std::string> hypothesis);

} // namespace hclm

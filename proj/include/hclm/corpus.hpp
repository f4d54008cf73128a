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

// Text ingestion: vocabularies, tokenization and held-out splitting.
//
// A line of text is one sentence. Whitespace runs inside a line become a
// single word-boundary token <w>; every line ends with one sentence-boundary
// token <s>. Character mode uses Unicode code points decoded from UTF-8 as
// symbols. Byte mode treats every byte as a symbol: ids 0..255 are the byte
// values (0x20 doubling as <w>) and id 256 is <s>.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hclm {

inline constexpr std::string_view kWordBoundary = "<w>";
inline constexpr std::string_view kSentenceBoundary = "<s>";

enum class TokenMode
{
    character,
    byte,
};

std::string_view to_string(TokenMode mode) noexcept;
TokenMode parse_token_mode(std::string_view text);

class Vocabulary
{
public:
    // Validates bijectivity and the presence of both boundary tokens.
    static Vocabulary from_symbols(std::vector<std::string> symbols);
    static Vocabulary bytes();

    std::size_t size() const noexcept { return symbols_.size(); }
    TokenMode mode() const noexcept { return mode_; }
    int word_boundary_id() const noexcept { return word_boundary_; }
    int sentence_boundary_id() const noexcept { return sentence_boundary_; }
    bool is_boundary(int id) const noexcept { return id == word_boundary_ || id == sentence_boundary_; }

    const std::string &symbol(int id) const;
    std::optional<int> find(std::string_view symbol) const;
    const std::vector<std::string> &symbols() const noexcept { return symbols_; }

    // One escaped symbol per line, in id order.
    std::string to_text() const;
    static Vocabulary from_text(std::string_view text);
    void save(const std::filesystem::path &path) const;
    static Vocabulary load(const std::filesystem::path &path);

    friend bool operator==(const Vocabulary &a, const Vocabulary &b) { return a.symbols_ == b.symbols_; }

private:
    std::vector<std::string> symbols_;
    std::unordered_map<std::string, int> index_;
    TokenMode mode_ = TokenMode::character;
    int word_boundary_ = -1;
    int sentence_boundary_ = -1;
};

struct TokenSequence
{
    std::vector<int> ids;
    std::size_t char_count = 0; // N_c, boundary tokens included
    std::size_t word_count = 0; // N_w, each <s> counted as a word

    friend bool operator==(const TokenSequence &, const TokenSequence &) = default;
};

Vocabulary build_vocab(std::string_view text, TokenMode mode);

// Whole text as one stream.
TokenSequence tokenize(std::string_view text, const Vocabulary &vocab);

// One sequence per line.
std::vector<TokenSequence> tokenize_lines(std::string_view text, const Vocabulary &vocab);

// Tokens of a text fragment without the trailing <s>; used for sampling primes.
std::vector<int> tokenize_fragment(std::string_view text, const Vocabulary &vocab);

// <w> becomes a single space and <s> a line break.
std::string detokenize(std::span<const int> ids, const Vocabulary &vocab);

// N_w for an id stream: maximal runs of non-boundary ids plus each <s>.
std::size_t count_words(std::span<const int> ids, const Vocabulary &vocab);

TokenSequence make_sequence(std::vector<int> ids, const Vocabulary &vocab);

// Deterministic stride split; heldout gets ceil(fraction * n) sequences.
std::pair<std::vector<TokenSequence>, std::vector<TokenSequence>>
split_heldout(const std::vector<TokenSequence> &sequences, double fraction);

std::string to_upper_ascii(std::string_view text);

// File representation of a symbol: backslash, control bytes and lone high
// bytes become \\ and \xHH escapes; <w> and <s> are written literally.
std::string escape_symbol(const std::string &symbol);
std::string unescape_symbol(std::string_view text);

std::string read_text_file(const std::filesystem::path &path);

} // namespace hclm

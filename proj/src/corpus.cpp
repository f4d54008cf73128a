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

#include "hclm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include "hclm/error.hpp"

namespace hclm {
namespace {

constexpr int kByteCount = 256;
constexpr unsigned char kSpaceByte = 0x20;

bool is_space_byte(unsigned char b) noexcept
{
    return b == ' ' || b == '\t' || b == '\r' || b == '\v' || b == '\f';
}

// Length of the UTF-8 sequence starting at text[pos]; throws on malformed input.
std::size_t utf8_length(std::string_view text, std::size_t pos)
{
    const auto lead = static_cast<unsigned char>(text[pos]);
    std::size_t len = 0;
    if (lead < 0x80)
        return 1;
    if ((lead & 0xE0) == 0xC0)
        len = 2;
    else if ((lead & 0xF0) == 0xE0)
        len = 3;
    else if ((lead & 0xF8) == 0xF0)
        len = 4;
    else
        throw DataError("invalid UTF-8 lead byte at offset " + std::to_string(pos));
    if (pos + len > text.size())
        throw DataError("truncated UTF-8 sequence at offset " + std::to_string(pos));
    for (std::size_t k = 1; k < len; ++k) {
        if ((static_cast<unsigned char>(text[pos + k]) & 0xC0) != 0x80)
            throw DataError("invalid UTF-8 continuation byte at offset " + std::to_string(pos + k));
    }
    return len;
}

std::string byte_symbol(int b)
{
    if (b == kSpaceByte)
        return std::string(kWordBoundary);
    return std::string(1, static_cast<char>(b));
}

std::string escape_symbol_impl(const std::string &symbol)
{
    if (symbol == kWordBoundary || symbol == kSentenceBoundary)
        return symbol;
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (char ch : symbol) {
        const auto b = static_cast<unsigned char>(ch);
        const bool lone_high = symbol.size() == 1 && b >= 0x80;
        if (b == '\\') {
            out += "\\\\";
        } else if (b < 0x20 || b == 0x7F || lone_high) {
            out += "\\x";
            out += hex[b >> 4];
            out += hex[b & 0xF];
        } else {
            out += ch;
        }
    }
    return out;
}

int hex_value(char c)
{
    if (c >= '0' && c <= '9')
        return c - '0';
    if (c >= 'a' && c <= 'f')
        return c - 'a' + 10;
    if (c >= 'A' && c <= 'F')
        return c - 'A' + 10;
    return -1;
}

std::string unescape_symbol_impl(std::string_view line, std::size_t line_no)
{
    std::string out;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] != '\\') {
            out += line[i];
            continue;
        }
        if (i + 1 < line.size() && line[i + 1] == '\\') {
            out += '\\';
            ++i;
        } else if (i + 3 < line.size() && line[i + 1] == 'x' && hex_value(line[i + 2]) >= 0 &&
                   hex_value(line[i + 3]) >= 0) {
            out += static_cast<char>(hex_value(line[i + 2]) * 16 + hex_value(line[i + 3]));
            i += 3;
        } else {
            throw DataError("bad escape sequence in symbol \"" + std::string(line) + "\"" +
                            (line_no ? " on line " + std::to_string(line_no) : std::string()));
        }
    }
    return out;
}

// Splits on '\n'; a trailing newline does not open an extra empty line.
std::vector<std::string_view> split_lines(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < text.size() || lines.empty())
                lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

// Appends the tokens of one line (no <s>). `base` is the line's byte offset
// in the original text, for error messages.
void tokenize_line(std::string_view line, std::size_t base, const Vocabulary &vocab, std::vector<int> &out)
{
    bool pending_space = false;
    bool any = false;
    std::size_t pos = 0;
    while (pos < line.size()) {
        const auto b = static_cast<unsigned char>(line[pos]);
        if (is_space_byte(b)) {
            pending_space = any;
            ++pos;
            continue;
        }
        if (pending_space) {
            out.push_back(vocab.word_boundary_id());
            pending_space = false;
        }
        any = true;
        if (vocab.mode() == TokenMode::byte) {
            out.push_back(b);
            ++pos;
            continue;
        }
        const std::size_t len = utf8_length(line, pos);
        const std::string_view ch = line.substr(pos, len);
        const auto id = vocab.find(ch);
        if (!id || vocab.is_boundary(*id))
            throw DataError("out-of-vocabulary character '" + std::string(ch) + "' at offset " +
                            std::to_string(base + pos));
        out.push_back(*id);
        pos += len;
    }
}

} // namespace

std::string_view to_string(TokenMode mode) noexcept
{
    return mode == TokenMode::byte ? "byte" : "char";
}

TokenMode parse_token_mode(std::string_view text)
{
    if (text == "char")
        return TokenMode::character;
    if (text == "byte")
        return TokenMode::byte;
    throw ConfigError("unknown token mode '" + std::string(text) + "' (expected char or byte)");
}

Vocabulary Vocabulary::from_symbols(std::vector<std::string> symbols)
{
    Vocabulary v;
    v.symbols_ = std::move(symbols);
    for (std::size_t i = 0; i < v.symbols_.size(); ++i) {
        if (v.symbols_[i].empty())
            throw DataError("empty vocabulary symbol at id " + std::to_string(i));
        if (!v.index_.emplace(v.symbols_[i], static_cast<int>(i)).second)
            throw DataError("duplicate vocabulary symbol '" + v.symbols_[i] + "'");
    }
    const auto w = v.find(kWordBoundary);
    const auto s = v.find(kSentenceBoundary);
    if (!w || !s)
        throw DataError("vocabulary lacks the <w> or <s> boundary token");
    v.word_boundary_ = *w;
    v.sentence_boundary_ = *s;

    bool byte_layout = v.symbols_.size() == kByteCount + 1 && *s == kByteCount;
    for (int b = 0; byte_layout && b < kByteCount; ++b)
        byte_layout = v.symbols_[b] == byte_symbol(b);
    v.mode_ = byte_layout ? TokenMode::byte : TokenMode::character;
    return v;
}

Vocabulary Vocabulary::bytes()
{
    std::vector<std::string> symbols;
    symbols.reserve(kByteCount + 1);
    for (int b = 0; b < kByteCount; ++b)
        symbols.push_back(byte_symbol(b));
    symbols.emplace_back(kSentenceBoundary);
    return from_symbols(std::move(symbols));
}

const std::string &Vocabulary::symbol(int id) const
{
    if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size())
        throw ArgumentError("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(symbols_.size()));
    return symbols_[id];
}

std::optional<int> Vocabulary::find(std::string_view symbol) const
{
    const auto it = index_.find(std::string(symbol));
    if (it == index_.end())
        return std::nullopt;
    return it->second;
}

std::string Vocabulary::to_text() const
{
    std::string out;
    for (const auto &s : symbols_) {
        out += escape_symbol_impl(s);
        out += '\n';
    }
    return out;
}

Vocabulary Vocabulary::from_text(std::string_view text)
{
    std::vector<std::string> symbols;
    std::size_t line_no = 0;
    for (std::string_view line : split_lines(text)) {
        ++line_no;
        if (line.empty())
            continue;
        symbols.push_back(unescape_symbol_impl(line, line_no));
    }
    return from_symbols(std::move(symbols));
}

void Vocabulary::save(const std::filesystem::path &path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write vocabulary file " + path.string());
    out << to_text();
}

Vocabulary Vocabulary::load(const std::filesystem::path &path)
{
    return from_text(read_text_file(path));
}

Vocabulary build_vocab(std::string_view text, TokenMode mode)
{
    if (text.empty())
        throw DataError("empty corpus: cannot build a vocabulary from no text");
    if (mode == TokenMode::byte)
        return Vocabulary::bytes();

    std::set<std::string> chars;
    for (std::size_t pos = 0; pos < text.size();) {
        const auto b = static_cast<unsigned char>(text[pos]);
        if (b == '\n' || is_space_byte(b)) {
            ++pos;
            continue;
        }
        const std::size_t len = utf8_length(text, pos);
        chars.emplace(text.substr(pos, len));
        pos += len;
    }
    // std::set orders UTF-8 strings by code point.
    std::vector<std::string> symbols(chars.begin(), chars.end());
    symbols.emplace_back(kWordBoundary);
    symbols.emplace_back(kSentenceBoundary);
    return Vocabulary::from_symbols(std::move(symbols));
}

std::size_t count_words(std::span<const int> ids, const Vocabulary &vocab)
{
    std::size_t words = 0;
    bool in_word = false;
    for (int id : ids) {
        if (vocab.is_boundary(id)) {
            in_word = false;
            if (id == vocab.sentence_boundary_id())
                ++words;
        } else if (!in_word) {
            in_word = true;
            ++words;
        }
    }
    return words;
}

TokenSequence make_sequence(std::vector<int> ids, const Vocabulary &vocab)
{
    TokenSequence seq;
    seq.char_count = ids.size();
    seq.word_count = count_words(ids, vocab);
    seq.ids = std::move(ids);
    return seq;
}

TokenSequence tokenize(std::string_view text, const Vocabulary &vocab)
{
    std::vector<int> ids;
    ids.reserve(text.size() + 1);
    std::size_t base = 0;
    for (std::string_view line : split_lines(text)) {
        tokenize_line(line, base, vocab, ids);
        ids.push_back(vocab.sentence_boundary_id());
        base += line.size() + 1;
    }
    return make_sequence(std::move(ids), vocab);
}

std::vector<TokenSequence> tokenize_lines(std::string_view text, const Vocabulary &vocab)
{
    std::vector<TokenSequence> out;
    std::size_t base = 0;
    for (std::string_view line : split_lines(text)) {
        std::vector<int> ids;
        tokenize_line(line, base, vocab, ids);
        ids.push_back(vocab.sentence_boundary_id());
        out.push_back(make_sequence(std::move(ids), vocab));
        base += line.size() + 1;
    }
    return out;
}

std::vector<int> tokenize_fragment(std::string_view text, const Vocabulary &vocab)
{
    std::vector<int> ids;
    const auto lines = split_lines(text);
    std::size_t base = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        tokenize_line(lines[i], base, vocab, ids);
        if (i + 1 < lines.size()) {
            ids.push_back(vocab.sentence_boundary_id());
        } else if (!lines[i].empty() && is_space_byte(static_cast<unsigned char>(lines[i].back())) && !ids.empty() &&
                   !vocab.is_boundary(ids.back())) {
            // A prime ending in whitespace continues with a new word.
            ids.push_back(vocab.word_boundary_id());
        }
        base += lines[i].size() + 1;
    }
    return ids;
}

std::string detokenize(std::span<const int> ids, const Vocabulary &vocab)
{
    std::string out;
    for (int id : ids) {
        if (id == vocab.word_boundary_id())
            out += ' ';
        else if (id == vocab.sentence_boundary_id())
            out += '\n';
        else
            out += vocab.symbol(id);
    }
    return out;
}

std::pair<std::vector<TokenSequence>, std::vector<TokenSequence>>
split_heldout(const std::vector<TokenSequence> &sequences, double fraction)
{
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ArgumentError("held-out fraction must lie in (0,1), got " + std::to_string(fraction));
    const std::size_t n = sequences.size();
    if (n < 2)
        throw ArgumentError("need at least 2 sequences to split, got " + std::to_string(n));

    // The epsilon absorbs representation error such as 0.01 * 100 > 1.
    auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n - 1);

    std::vector<bool> held(n, false);
    for (std::size_t j = 0; j < k; ++j)
        held[j * n / k] = true;

    std::pair<std::vector<TokenSequence>, std::vector<TokenSequence>> out;
    for (std::size_t i = 0; i < n; ++i)
        (held[i] ? out.second : out.first).push_back(sequences[i]);
    return out;
}

std::string to_upper_ascii(std::string_view text)
{
    std::string out(text);
    for (char &c : out) {
        if (c >= 'a' && c <= 'z')
            c = static_cast<char>(c - 'a' + 'A');
    }
    return out;
}

std::string escape_symbol(const std::string &symbol)
{
    return escape_symbol_impl(symbol);
}

std::string unescape_symbol(std::string_view text)
{
    return unescape_symbol_impl(text, 0);
}

std::string read_text_file(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace hclm

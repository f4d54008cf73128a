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

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "hclm/decode.hpp"
#include "hclm/error.hpp"

namespace hclm {
namespace {

constexpr double kRowSumTolerance = 1e-6;
constexpr std::uint64_t kMaxLabelText = 1ULL << 20;

std::vector<std::string> parse_labels(std::istream &in, std::size_t count)
{
    std::vector<std::string> labels;
    std::string tok;
    for (std::size_t k = 0; k < count; ++k) {
        if (!(in >> tok))
            throw DataError("posterior header lists fewer labels than declared");
        labels.push_back(tok == kBlankLabel ? tok : unescape_symbol(tok));
    }
    return labels;
}

std::string label_text(const std::vector<std::string> &labels)
{
    std::string out;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (k)
            out += ' ';
        out += labels[k] == kBlankLabel ? labels[k] : escape_symbol(labels[k]);
    }
    return out;
}

template <class U>
U get_le(std::istream &in)
{
    unsigned char buf[sizeof(U)];
    if (!in.read(reinterpret_cast<char *>(buf), sizeof buf))
        throw DataError("posterior file truncated");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
}

template <class U>
void put_le(std::ostream &out, U v)
{
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i)
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(buf, sizeof buf);
}

} // namespace

int PosteriorMatrix::blank_index() const
{
    int found = -1;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k] == kBlankLabel) {
            if (found >= 0)
                throw DataError("posterior labels contain more than one <blank>");
            found = static_cast<int>(k);
        }
    }
    if (found < 0)
        throw DataError("posterior labels contain no <blank>");
    return found;
}

void PosteriorMatrix::validate() const
{
    if (labels.size() < 2)
        throw DataError("posteriors need a blank and at least one label");
    if (values.size() != frames * labels.size())
        throw DataError("posterior matrix holds " + std::to_string(values.size()) + " values, expected " +
                        std::to_string(frames * labels.size()));
    blank_index();
    for (std::size_t t = 0; t < frames; ++t) {
        double sum = 0.0;
        for (double v : row(t)) {
            if (!(v >= 0.0 && v <= 1.0))
                throw DataError("posterior value outside [0,1] in frame " + std::to_string(t));
            sum += v;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance)
            throw DataError("posterior frame " + std::to_string(t) + " sums to " + std::to_string(sum) +
                            ", not 1");
    }
}

PosteriorMatrix read_posteriors_text(std::istream &in)
{
    std::string header;
    if (!std::getline(in, header))
        throw DataError("empty posterior file");
    std::istringstream hs(header);
    long long frames = -1, count = -1;
    if (!(hs >> frames >> count) || frames < 0 || count < 2)
        throw DataError("posterior header must start with frame and label counts");
    PosteriorMatrix post;
    post.frames = static_cast<std::size_t>(frames);
    post.labels = parse_labels(hs, static_cast<std::size_t>(count));
    std::string extra;
    if (hs >> extra)
        throw DataError("posterior header lists more labels than declared");
    post.values.resize(post.frames * post.labels.size());
    for (double &v : post.values) {
        if (!(in >> v))
            throw DataError("posterior file has fewer values than T x K");
    }
    if (in >> extra)
        throw DataError("posterior file has more values than T x K");
    post.validate();
    return post;
}

void write_posteriors_text(std::ostream &out, const PosteriorMatrix &post)
{
    out << post.frames << ' ' << post.labels.size() << ' ' << label_text(post.labels) << '\n';
    char buf[40];
    for (std::size_t t = 0; t < post.frames; ++t) {
        const auto r = post.row(t);
        for (std::size_t k = 0; k < r.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", r[k]);
            out << (k ? " " : "") << buf;
        }
        out << '\n';
    }
}

PosteriorMatrix read_posteriors_binary(std::istream &in)
{
    char magic[sizeof kPosteriorMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kPosteriorMagic, sizeof magic) != 0)
        throw DataError("not a binary posterior file (bad magic)");
    PosteriorMatrix post;
    post.frames = get_le<std::uint32_t>(in);
    const auto count = get_le<std::uint32_t>(in);
    const auto text_len = get_le<std::uint64_t>(in);
    if (text_len > kMaxLabelText)
        throw DataError("posterior label list is implausibly long");
    std::string text(text_len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(text_len)))
        throw DataError("posterior file truncated");
    std::istringstream ls(text);
    post.labels = parse_labels(ls, count);
    post.values.resize(post.frames * post.labels.size());
    for (double &v : post.values)
        v = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in)));
    post.validate();
    return post;
}

void write_posteriors_binary(std::ostream &out, const PosteriorMatrix &post)
{
    out.write(kPosteriorMagic, sizeof kPosteriorMagic);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(post.frames));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(post.labels.size()));
    const std::string text = label_text(post.labels);
    put_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (double v : post.values)
        put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

PosteriorMatrix load_posteriors(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open posterior file " + path.string());
    char head[sizeof kPosteriorMagic] = {};
    in.read(head, sizeof head);
    const bool binary = in.gcount() == sizeof head && std::memcmp(head, kPosteriorMagic, sizeof head) == 0;
    in.clear();
    in.seekg(0);
    return binary ? read_posteriors_binary(in) : read_posteriors_text(in);
}

} // namespace hclm

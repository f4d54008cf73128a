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

#include "hclm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "hclm/error.hpp"

namespace hclm {
namespace {

// Caps guard against allocating absurd sizes from a corrupt header.
constexpr std::uint64_t kMaxTextBytes = 1ULL << 26;
constexpr std::uint64_t kMaxBlockValues = 1ULL << 32;

template <class U>
void put_le(std::ostream &out, U v)
{
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i)
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(buf, sizeof buf);
}

template <class U>
U get_le(std::istream &in, const char *what)
{
    unsigned char buf[sizeof(U)];
    if (!in.read(reinterpret_cast<char *>(buf), sizeof buf))
        throw DataError(std::string("checkpoint truncated while reading ") + what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
}

void put_string(std::ostream &out, const std::string &s)
{
    put_le<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream &in, const char *what, std::uint64_t max_len)
{
    const auto len = get_le<std::uint64_t>(in, what);
    if (len > max_len)
        throw DataError(std::string("checkpoint ") + what + " length is implausible");
    std::string s(len, '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(len)))
        throw DataError(std::string("checkpoint truncated while reading ") + what);
    return s;
}

} // namespace

void write_checkpoint(std::ostream &out, const Network &net, const Vocabulary &vocab)
{
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_string(out, net.spec.to_text());
    put_string(out, vocab.to_text());

    std::vector<ConstParamBlock> blocks;
    net.params.visit(std::function<void(ConstParamBlock)>([&](ConstParamBlock b) { blocks.push_back(b); }));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(blocks.size()));
    for (const auto &b : blocks) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b.name.size()));
        out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
        put_le<std::uint64_t>(out, b.rows);
        put_le<std::uint64_t>(out, b.cols);
        for (double v : b.values)
            put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out)
        throw DataError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream &in)
{
    char magic[sizeof kCheckpointMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
        throw DataError("not a checkpoint file (bad magic)");
    const auto version = get_le<std::uint32_t>(in, "version");
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ck;
    ck.network.spec = NetworkSpec::from_text(get_string(in, "network spec", kMaxTextBytes));
    ck.vocab = Vocabulary::from_text(get_string(in, "vocabulary", kMaxTextBytes));
    if (ck.vocab.size() != ck.network.spec.vocab_size)
        throw DataError("checkpoint vocabulary size does not match its network spec");

    ck.network.params = zero_params(ck.network.spec);
    std::vector<ParamBlock> blocks;
    ck.network.params.visit(std::function<void(ParamBlock)>([&](ParamBlock b) { blocks.push_back(b); }));
    const auto count = get_le<std::uint32_t>(in, "block count");
    if (count != blocks.size())
        throw DataError("checkpoint holds " + std::to_string(count) + " parameter blocks, spec expects " +
                        std::to_string(blocks.size()));
    for (auto &b : blocks) {
        const auto name_len = get_le<std::uint32_t>(in, "block name");
        if (name_len > 4096)
            throw DataError("checkpoint block name length is implausible");
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len))
            throw DataError("checkpoint truncated while reading block name");
        const auto rows = get_le<std::uint64_t>(in, "block rows");
        const auto cols = get_le<std::uint64_t>(in, "block cols");
        if (name != b.name || rows != b.rows || cols != b.cols)
            throw DataError("checkpoint block '" + name + "' " + shape_string(rows, cols) + " does not match '" +
                            b.name + "' " + shape_string(b.rows, b.cols));
        if (rows * cols > kMaxBlockValues)
            throw DataError("checkpoint block '" + name + "' is implausibly large");
        for (double &v : b.values)
            v = std::bit_cast<double>(get_le<std::uint64_t>(in, "block values"));
    }
    return ck;
}

void save_checkpoint(const std::filesystem::path &path, const Network &net, const Vocabulary &vocab)
{
    // Write then rename so an interrupted save never clobbers the last good file.
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot write checkpoint " + tmp.string());
        write_checkpoint(out, net, vocab);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

} // namespace hclm

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

// Checkpoint container (all integers and floats little-endian):
//
//   magic      8 bytes  "HCLMCKPT"
//   version    u32      1
//   spec       u64 length + NetworkSpec::to_text()
//   vocab      u64 length + Vocabulary::to_text()
//   blocks     u32 count, then per block:
//                u32 name length, name, u64 rows, u64 cols, rows*cols f64

#include <filesystem>
#include <iosfwd>
#include <string>

#include "hclm/corpus.hpp"
#include "hclm/hierarchy.hpp"

namespace hclm {

inline constexpr char kCheckpointMagic[8] = {'H', 'C', 'L', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint
{
    Network network;
    Vocabulary vocab;
};

void write_checkpoint(std::ostream &out, const Network &net, const Vocabulary &vocab);
Checkpoint read_checkpoint(std::istream &in);

void save_checkpoint(const std::filesystem::path &path, const Network &net, const Vocabulary &vocab);
Checkpoint load_checkpoint(const std::filesystem::path &path);

} // namespace hclm

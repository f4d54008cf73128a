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

#include <cstdlib>
#include <cstring>

#include "hclm/error.hpp"
#include "kernels_impl.hpp"

namespace hclm::kernels {
namespace {

bool cpu_has_avx2() noexcept
{
#if defined(HCLM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable &select() noexcept
{
    const char *forced = std::getenv("HCLM_SIMD");
    if (forced != nullptr && std::strcmp(forced, "scalar") == 0)
        return detail::scalar_table;
#if defined(HCLM_HAVE_AVX2)
    if (cpu_has_avx2())
        return detail::avx2_table;
#endif
#if defined(HCLM_HAVE_NEON)
    return detail::neon_table;
#else
    return detail::scalar_table;
#endif
}

} // namespace

std::string_view isa_name(Isa isa) noexcept
{
    switch (isa) {
    case Isa::scalar:
        return "scalar";
    case Isa::avx2:
        return "avx2";
    case Isa::neon:
        return "neon";
    }
    return "unknown";
}

const KernelTable &active() noexcept
{
    static const KernelTable &chosen = select();
    return chosen;
}

bool available(Isa isa) noexcept
{
    switch (isa) {
    case Isa::scalar:
        return true;
    case Isa::avx2:
        return cpu_has_avx2();
    case Isa::neon:
#if defined(HCLM_HAVE_NEON)
        return true;
#else
        return false;
#endif
    }
    return false;
}

const KernelTable &table(Isa isa)
{
    if (!available(isa))
        throw ArgumentError("kernel ISA '" + std::string(isa_name(isa)) + "' is not available on this machine");
    switch (isa) {
#if defined(HCLM_HAVE_AVX2)
    case Isa::avx2:
        return detail::avx2_table;
#endif
#if defined(HCLM_HAVE_NEON)
    case Isa::neon:
        return detail::neon_table;
#endif
    default:
        return detail::scalar_table;
    }
}

} // namespace hclm::kernels

#pragma once

#include <cstdint>
#include <string_view>

namespace fiberlink
{
// Counter-based sub-seed derivation. A sub-seed depends only on
// (seed, stream, index), never on the order in which streams are drawn.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

std::uint64_t stable_hash(std::string_view text) noexcept;

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index) noexcept;
}

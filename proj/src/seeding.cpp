#include "fiberlink/seeding.hpp"

namespace fiberlink
{
std::uint64_t splitmix64(std::uint64_t x) noexcept
{
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
}

std::uint64_t stable_hash(std::string_view text) noexcept
{
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const unsigned char c : text)
        {
                h ^= c;
                h *= 0x100000001b3ULL;
        }
        return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index) noexcept
{
        return splitmix64(splitmix64(seed ^ stable_hash(stream)) + splitmix64(index));
}
}

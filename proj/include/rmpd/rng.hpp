#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rmpd {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a root seed and a tuple of
/// stream coordinates, e.g. (seed, scale, region).
constexpr std::uint64_t derive_seed(std::uint64_t root,
                                    std::initializer_list<std::uint64_t> coords) noexcept {
    std::uint64_t h = mix64(root);
    for (auto c : coords) h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ull));
    return h;
}

// Stream tags keep sub-streams of one seed apart.
enum class StreamTag : std::uint64_t {
    segmentation = 0x5345,
    background = 0x4247,
    exclusion = 0x4558,
    pixelwise = 0x5057,
};

constexpr std::uint64_t tag(StreamTag t) noexcept { return static_cast<std::uint64_t>(t); }

}  // namespace rmpd

#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace covlat {

/// FNV-1a 64-bit, used for config hashes and state identity tokens.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

template <class T>
std::uint64_t fnv1a64_span(std::span<const T> v, std::uint64_t h) {
    return fnv1a64(v.data(), v.size() * sizeof(T), h);
}

/// SplitMix64; seeds derived generator keys.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace covlat

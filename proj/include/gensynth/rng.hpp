// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace gensynth {

// Counter-based mixing. Every random stream in the library is keyed by an
// explicit seed plus a path of integers, so results never depend on call order.

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t tag(std::string_view name) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

/// Derives an independent 64-bit key from a root seed and a path of components.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = mix64(root);
    for (auto p : path) h = mix64(h ^ mix64(p));
    return h;
}

/// Uniform double in [0, 1) from 53 high bits of a key.
constexpr double to_unit(std::uint64_t key) noexcept {
    return static_cast<double>(key >> 11) * 0x1.0p-53;
}

/// Element `index` of the uniform stream identified by `seed`.
constexpr double stream_uniform(std::uint64_t seed, std::uint64_t index) noexcept {
    return to_unit(mix64(mix64(seed) ^ mix64(index ^ 0xD1B54A32D192ED03ull)));
}

}  // namespace gensynth

// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace normq {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// All randomness in an experiment flows from one master seed; each consumer
/// derives its own stream from (master, purpose, index) so adding a consumer
/// never perturbs the others.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                                    std::uint64_t index = 0) {
    return splitmix64(splitmix64(master ^ fnv1a64(purpose)) + index);
}

/// mt19937_64 wrapper with portable draws. std::uniform_real_distribution is
/// implementation-defined, so uniform doubles are built from raw bits instead.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1), 53-bit resolution
    double next_double() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Draw an index from an (approximately normalized) probability vector by
    /// inverse-CDF scan. Falls back to the last positive entry when floating
    /// point drift leaves the draw above the accumulated mass.
    std::size_t categorical(std::span<const double> probs) {
        const double u = next_double();
        double cum = 0.0;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (probs[i] > 0.0) last_positive = i;
            cum += probs[i];
            if (u < cum) return i;
        }
        return last_positive;
    }

  private:
    std::mt19937_64 gen_;
};

}  // namespace normq

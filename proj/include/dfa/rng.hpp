#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>

namespace dfa {

namespace detail {
// SplitMix64 finalizer, used only to derive well-separated child seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

/// Seeded random source. All sampling is hand-rolled on top of the
/// standard-specified mt19937_64 stream, so sequences are identical across
/// platforms and standard-library implementations (std::*_distribution make
/// no such guarantee). Rollouts and annotators take this by reference;
/// parallel work gets independent child streams via child().
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Uniform in [0, 1) with 53 random mantissa bits.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
        return static_cast<int>(uniform01() * static_cast<double>(n));
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via Box-Muller (two uniforms per draw, no caching).
    double normal() {
        double u1 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Index sampled from an (unnormalized is not allowed) probability vector.
    int categorical(std::span<const double> probs) {
        const double u = uniform01();
        double cum = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            cum += probs[i];
            if (u < cum) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;  // guard against rounding
    }

    /// Independent stream derived deterministically from this seed and a tag.
    Rng child(std::uint64_t tag) const {
        return Rng(detail::mix64(seed_ ^ detail::mix64(tag)));
    }

  private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

}  // namespace dfa

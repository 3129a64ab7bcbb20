#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace dro {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}
}  // namespace detail

// Named, seedable random stream. fork() derives an independent child stream
// from (seed, name, spawn index) without consuming parent draws, so replays
// are deterministic as long as fork/draw call orders are deterministic.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(detail::splitmix64(seed)) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on (0, 1].
    double uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

    // Standard normal via Box-Muller (portable across standard libraries).
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Number of failures before the first success: P(J=j) = (1-p)^j p, j >= 0.
    int geometric_failures(double success_p) {
        const double u = uniform_pos();
        const double j = std::floor(std::log(u) / std::log1p(-success_p));
        return j < 0.0 ? 0 : static_cast<int>(j);
    }

    // Trials until first success: P(J=j) = 2^{-j}, j >= 1 (the Geom(1/2) of
    // the Moreau gradient estimator).
    int geometric_half_trials() {
        const double u = uniform_pos();
        const int j = static_cast<int>(std::ceil(-std::log2(u)));
        return j < 1 ? 1 : j;
    }

    Rng fork(std::string_view name) {
        return Rng(detail::splitmix64(seed_ ^ detail::fnv1a(name)) + (++spawn_count_));
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t spawn_count_ = 0;
    std::mt19937_64 gen_;
};

}  // namespace dro

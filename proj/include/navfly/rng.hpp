#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace navfly {

// Portable seeded generator. The standard distributions are implementation
// defined, so every draw used by the pipeline goes through these helpers to
// keep runs identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). `n` must be positive.
    std::uint64_t below(std::uint64_t n) noexcept { return next() % n; }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    double normal(double mean = 0.0, double stddev = 1.0) noexcept {
        // Box-Muller; the second variate is discarded to keep the stream
        // position a simple function of the number of calls.
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return mean + stddev * std::sqrt(-2.0 * std::log(u1)) *
                          std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

/// Mixes two values into a new seed (splitmix finalizer).
[[nodiscard]] inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
    Rng r(a ^ (b * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull));
    r.next();
    return r.next();
}

/// FNV-1a over a string, used to derive per-entity streams from ids.
[[nodiscard]] inline std::uint64_t hash_string(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Fisher-Yates shuffle driven by `Rng`.
template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        using std::swap;
        swap(v[i - 1], v[j]);
    }
}

}  // namespace navfly

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace crbig {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed for sub-stream `stream` of a run seeded with `seed`.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// Versioned generator "crbig-rng-v1": mt19937_64 seeded through splitmix64,
// 53-bit uniforms, Box-Muller normals (cosine branch first). Unlike the
// std distributions, every step is specified, so streams are identical
// across standard libraries.
class Rng {
public:
    static constexpr const char* kName = "crbig-rng-v1";

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : engine_(stream_seed(seed, stream)) {}

    // Uniform in [0, 1).
    double uniform() noexcept {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    double laplace() noexcept {
        // Unit variance: scale 1/sqrt(2).
        const double mag = -std::log(1.0 - uniform());
        const bool negative = uniform() < 0.5;
        return (negative ? -mag : mag) / std::numbers::sqrt2;
    }

    // Uniform integer in [0, n), n > 0, by rejection.
    std::uint64_t index(std::uint64_t n) noexcept {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    template <class T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    void fill_normal(std::span<double> out) noexcept {
        for (double& v : out) v = normal();
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace crbig

#pragma once

// Seeded random streams. The engine is std::mt19937_64; the variate
// transforms are spelled out here rather than taken from <random> so that
// sample sequences are identical across standard library implementations.

#include "drq/error.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace drq {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Folds a list of keys into a seed; distinct key tuples give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = splitmix64(master);
    for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on (0, 1), never exactly 0 or 1.
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    /// Marsaglia polar method.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    /// Marsaglia-Tsang; shapes below 1 use Gamma(k + 1) * U^(1/k).
    double gamma(double shape) {
        require(shape > 0.0 && std::isfinite(shape), "gamma shape must be positive");
        if (shape < 1.0) {
            const double g = gamma(shape + 1.0);
            return g * std::pow(uniform(), 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Beta(p, q) as G_p / (G_p + G_q).
    double beta(double p, double q) {
        const double x = gamma(p);
        const double y = gamma(q);
        if (x + y == 0.0) return uniform() < p / (p + q) ? 1.0 : 0.0;
        return x / (x + y);
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// rho = scale * Beta(p, q).
struct BetaLaw {
    double p = 0.1;
    double q = 0.5;
    double scale = 2.0;

    double mean() const { return scale * p / (p + q); }
};

inline std::vector<double> sample_traffic(const BetaLaw& law, std::size_t count, std::uint64_t seed) {
    require(law.p > 0.0 && law.q > 0.0 && law.scale > 0.0, "Beta law needs positive shapes and scale");
    Rng rng(seed);
    std::vector<double> out(count);
    for (double& x : out) x = law.scale * rng.beta(law.p, law.q);
    return out;
}

} // namespace drq

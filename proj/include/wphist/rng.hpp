#pragma once

#include <cstdint>
#include <random>

namespace wphist {

/// splitmix64 mixing step; used to derive well-separated substream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for an independent substream identified by (stream, step) under a
/// master seed. Serial and parallel executions that address work by the
/// same (stream, step) pairs therefore draw identical variates.
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t stream,
                             std::uint64_t step);

/// Random generator wrapping a 64-bit Mersenne Twister.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    }

    double normal() {
        return std::normal_distribution<double>(0.0, 1.0)(engine_);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Gamma(shape, scale); mean = shape * scale.
    double gamma(double shape, double scale) {
        return std::gamma_distribution<double>(shape, scale)(engine_);
    }

    /// Inverse gamma with shape a and scale b: density x^{-a-1} e^{-b/x}.
    double inverse_gamma(double shape, double scale) {
        return 1.0 / gamma(shape, 1.0 / scale);
    }

    double beta(double a, double b) {
        const double x = gamma(a, 1.0);
        const double y = gamma(b, 1.0);
        return x / (x + y);
    }

    /// Normal(mean, sd) conditioned on being > 0, sampled by rejection.
    /// Callers keep mean > 0, so the acceptance rate is at least 1/2.
    double truncated_normal_positive(double mean, double sd) {
        for (;;) {
            const double x = normal(mean, sd);
            if (x > 0.0) return x;
        }
    }

    std::uint64_t raw() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace wphist

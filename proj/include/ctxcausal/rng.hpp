#pragma once

#include <cstdint>

namespace ctxcausal {

// Self-contained counter-seedable generator (xoshiro256++). We avoid the
// standard-library distributions because their consumption patterns are
// implementation-defined and the simulators must be reproducible bit-for-bit.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform on [0, 1) with 53 bits of precision.
    double uniform01();

    // Uniform strictly inside (0, 1).
    double uniform_open();

    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Gamma(shape, 1) via Marsaglia-Tsang squeeze; shape > 0.
    double gamma(double shape);

    int uniform_int(int n);  // 0..n-1

    // Derives an independent stream keyed by (tags...); used for
    // per-(node, unit) exogenous noise so replays are exact.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b);
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
        return mix(mix(a, b), c);
    }

private:
    std::uint64_t state_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace ctxcausal

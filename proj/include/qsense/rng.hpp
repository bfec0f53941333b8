#pragma once

#include <cstdint>
#include <random>

#include "qsense/common.hpp"

namespace qsense {

/// Deterministic random stream. Wraps mt19937_64 but does its own
/// uniform->double and inverse-CDF exponential conversion so that output
/// is bit-identical across platforms (std::*_distribution is
/// implementation-defined).
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}
    RngStream(std::uint64_t seed, std::uint64_t stream_tag)
        : gen_(mix(seed, stream_tag)) {}

    /// Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // modulo bias is irrelevant at simulation scale but cheap to remove
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    /// Exponential(rate) via inverse CDF.
    double exponential(double rate);

private:
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t tag) {
        // splitmix64 finalizer over (seed, tag)
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 gen_;
};

/// Named sub-streams so toggling one feature does not perturb the others.
enum class Stream : std::uint64_t {
    ReadArrivals = 1,
    WriteArrivals = 2,
    RepairArrivals = 3,
    Services = 4,
    Routing = 5,
    Workload = 6,
    Footprint = 7,
};

inline RngStream make_stream(std::uint64_t seed, Stream s) {
    return RngStream(seed, static_cast<std::uint64_t>(s));
}

} // namespace qsense

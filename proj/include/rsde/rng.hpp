#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace rsde {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// A block cipher view of random number generation: output = philox(counter, key).
/// Streams never share state, so replicas can be generated in any order and on
/// any number of threads with bit-identical results.
struct Philox4x32 {
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }
};

/// Deterministic stream of N(0,1) variates addressed by index. Keyed by
/// (seed, replica, stream); any variate can be read independently of the
/// others, which is what makes parallel Monte Carlo reproducible.
class GaussianStream {
public:
    GaussianStream(std::uint64_t seed, std::uint64_t replica, std::uint32_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          replica_lo_(static_cast<std::uint32_t>(replica)),
          replica_hi_(static_cast<std::uint32_t>(replica >> 32) ^ (stream * 0x85EBCA6Bu + 0x1B873593u)) {}

    /// i-th Gaussian of the stream. Two variates per Philox block via Box-Muller.
    double operator()(std::uint64_t i) const {
        const std::uint64_t blk = i >> 1;
        const auto r = Philox4x32::block(
            {static_cast<std::uint32_t>(blk), static_cast<std::uint32_t>(blk >> 32),
             replica_lo_, replica_hi_},
            key_);
        const double u1 = to_unit(r[0], r[1]);
        const double u2 = to_unit(r[2], r[3]);
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        return (i & 1u) ? rad * std::sin(ang) : rad * std::cos(ang);
    }

    /// Fill out[0..count) with consecutive variates starting at index `first`.
    void fill(double* out, std::uint64_t count, std::uint64_t first = 0) const {
        std::uint64_t i = first;
        std::uint64_t written = 0;
        // Compute whole blocks where possible; odd edges fall back to operator().
        while (written < count) {
            if ((i & 1u) == 0 && count - written >= 2) {
                const std::uint64_t blk = i >> 1;
                const auto r = Philox4x32::block(
                    {static_cast<std::uint32_t>(blk), static_cast<std::uint32_t>(blk >> 32),
                     replica_lo_, replica_hi_},
                    key_);
                const double u1 = to_unit(r[0], r[1]);
                const double u2 = to_unit(r[2], r[3]);
                const double rad = std::sqrt(-2.0 * std::log(u1));
                const double ang = 2.0 * std::numbers::pi * u2;
                out[written] = rad * std::cos(ang);
                out[written + 1] = rad * std::sin(ang);
                i += 2;
                written += 2;
            } else {
                out[written] = (*this)(i);
                ++i;
                ++written;
            }
        }
    }

private:
    // 53-bit uniform in (0,1); never returns 0, so log() above is safe.
    static double to_unit(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t u = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
        return (static_cast<double>(u) + 0.5) * 0x1.0p-53;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t replica_lo_;
    std::uint32_t replica_hi_;
};

} // namespace rsde

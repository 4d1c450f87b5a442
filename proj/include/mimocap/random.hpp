#pragma once

// Counter-based random numbers (Philox4x32-10).
//
// Every random quantity in the library is a pure function of a key and a
// counter, so Monte-Carlo trials can run on any number of threads and still
// draw exactly the same numbers.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>

namespace mimocap {

class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter apply(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Identifies one independent random stream: (seed, trial, path).
struct StreamId {
    std::uint64_t seed = 0;
    std::uint64_t trial = 0;
    std::uint32_t path = 0;
};

/// Sequential view of a single stream. Block `n` of stream `id` is
/// Philox(counter = {n, path, trial_lo, trial_hi}, key = seed).
///
/// Satisfies UniformRandomBitGenerator so it can also drive <random>
/// distributions in tests.
class CounterStream {
public:
    using result_type = std::uint64_t;

    explicit CounterStream(StreamId id) : id_(id) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    /// Raw 128-bit block number `n` of this stream.
    Philox4x32::Counter block(std::uint32_t n) const {
        return Philox4x32::apply(
            {n, id_.path, static_cast<std::uint32_t>(id_.trial), static_cast<std::uint32_t>(id_.trial >> 32)},
            {static_cast<std::uint32_t>(id_.seed), static_cast<std::uint32_t>(id_.seed >> 32)});
    }

    result_type operator()() {
        if (lane_ == 0) {
            buffer_ = block(next_block_++);
        }
        const result_type out = (result_type{buffer_[lane_ + 1]} << 32) | buffer_[lane_];
        lane_ = (lane_ + 2) % 4;
        return out;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Circular complex Gaussian, E|z|^2 = 1 (real and imaginary parts N(0, 1/2)).
    ///
    /// Box-Muller on one 128-bit block: |z|^2 = -log(u1) is Exp(1).
    std::complex<double> complex_gaussian() {
        const Philox4x32::Counter b = block(next_block_++);
        const std::uint64_t w0 = (std::uint64_t{b[1]} << 32) | b[0];
        const std::uint64_t w1 = (std::uint64_t{b[3]} << 32) | b[2];
        // u1 in (0, 1], u2 in [0, 1)
        const double u1 = static_cast<double>((w0 >> 11) + 1) * 0x1.0p-53;
        const double u2 = static_cast<double>(w1 >> 11) * 0x1.0p-53;
        const double radius = std::sqrt(-std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

private:
    StreamId id_;
    std::uint32_t next_block_ = 0;
    int lane_ = 0;
    Philox4x32::Counter buffer_{};
};

}  // namespace mimocap

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace gazeread {

// Counter-based generator built on the splitmix64 finalizer. Output k of
// stream (seed, stream_id) is a pure function of those three integers, so
// sequences are reproducible, seekable, and safe to hand out per clip /
// per epoch / per example without sharing state.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : base_(mix(seed ^ mix(stream * 0x9E3779B97F4A7C15ULL + 0x5851F42D4C957F2DULL))) {}

    std::uint64_t next_u64() { return mix(base_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

    // uniform in [0,1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo,hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // integer in [0,n)
    std::uint64_t next_below(std::uint64_t n) {
        // 128-bit multiply keeps the mapping unbiased enough for simulation use
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // standard normal via Box-Muller; consumes two draws per call so the
    // stream position never depends on caller history
    double normal() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

  private:
    std::uint64_t base_;
    std::uint64_t counter_ = 0;
};

// Named sub-streams, so independent consumers (shuffle, dropout, noise, ...)
// never collide even when derived from one user-facing seed.
enum class RngStream : std::uint64_t {
    init = 1,
    shuffle = 2,
    modality_dropout = 3,
    rotate_augment = 4,
    gaze_noise = 5,
    flip_augment = 6,
    sim_clip = 7,
    sim_segment = 8,
    sim_patch = 9,
};

inline CounterRng make_rng(std::uint64_t seed, RngStream stream, std::uint64_t salt = 0) {
    return CounterRng(seed, static_cast<std::uint64_t>(stream) * 0x100000001B3ULL + salt);
}

} // namespace gazeread

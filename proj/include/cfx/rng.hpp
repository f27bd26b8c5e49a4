// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random number generation. One master seed; every consumer
// (cell, band, pair, ...) derives its own stream through a splitmix-based
// key path, so generation order and thread count never change the draws.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>

namespace cfx {

inline uint64_t splitmix64(uint64_t &state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Folds one component into a derivation key.
inline uint64_t mix_key(uint64_t key, uint64_t component) {
    uint64_t s = key ^ (component + 0x9e3779b97f4a7c15ull);
    return splitmix64(s);
}

// Derives a stream seed from a master seed and a path of indices, e.g.
// derive_seed(master, {kStreamCell, row, col}).
inline uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> path) {
    uint64_t k = splitmix64(master);
    for (uint64_t c : path)
        k = mix_key(k, c);
    return k;
}

// Stream tags keep independently consumed streams from colliding.
enum : uint64_t {
    kStreamBs = 1,
    kStreamCell = 2,
    kStreamPhase = 3,
    kStreamInit = 4,
    kStreamShuffle = 5,
    kStreamDraw = 6,
    kStreamScene = 7,
    kStreamUsers = 8,
};

// xoshiro256++ with splitmix-expanded seeding. Small, fast, and the state is
// four words, which makes checkpointing trivial.
class Rng {
  public:
    using State = std::array<uint64_t, 4>;

    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto &w : s_)
            w = splitmix64(sm);
    }

    uint64_t next() {
        uint64_t r = rotl(s_[0] + s_[3], 23) + s_[0];
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return r;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] inclusive, multiply-shift bounded draw.
    int uniform_int(int lo, int hi) {
        uint64_t span = uint64_t(hi - lo) + 1;
        return lo + int((unsigned __int128)(next()) * span >> 64);
    }

    // Box-Muller pair of independent standard normals.
    std::pair<double, double> normal_pair() {
        double u1 = 1.0 - uniform(); // (0, 1], keeps log() finite
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

    // Single normal; draws a fresh pair each call so the consumption pattern
    // stays independent of call history.
    double normal() { return normal_pair().first; }

    State state() const { return s_; }
    void set_state(const State &s) { s_ = s; }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    State s_;
};

} // namespace cfx

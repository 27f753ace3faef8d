#pragma once

#include <cstdint>
#include <vector>

#include "resetfree/errors.hpp"

namespace resetfree {

// Counter-based pseudo-random streams.
//
// Every draw is a pure function of (seed, stream labels, draw counter), so
// replaying a run with the same seed reproduces the byte-identical sequence
// regardless of how the surrounding code is refactored, and independent
// streams can be handed out without sharing mutable state.
//
// Stream layout used by the simulation code:
//   run stream      = Rng(seed)                   generator construction, misc
//   episode stream  = Rng(seed).substream(k)      all draws inside episode k
// Within an episode the draws are consumed in a fixed documented order:
// one categorical draw for the initial state (episode 1 and post-reset
// starts), then per step h one action draw followed by one transition draw.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(splitmix64(seed ^ 0x6a09e667f3bcc908ULL)), counter_(0) {}

    // Derived stream independent of this one; does not advance this stream.
    Rng substream(std::uint64_t label) const {
        Rng child(0);
        child.key_ = splitmix64(key_ ^ splitmix64(label ^ 0xbb67ae8584caa73bULL));
        child.counter_ = 0;
        return child;
    }

    std::uint64_t next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }

    // Uniform draw in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Inverse-CDF sample from an unnormalised nonnegative weight vector.
    // Weights must sum to something positive; trailing floating-point slack
    // falls through to the last positive-weight index.
    int categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw ContractViolation("categorical: negative weight");
            total += w;
        }
        if (total <= 0.0) throw ContractViolation("categorical: all weights zero");
        const double u = uniform() * total;
        double acc = 0.0;
        int last_positive = -1;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] > 0.0) {
                acc += weights[i];
                last_positive = static_cast<int>(i);
                if (u < acc) return last_positive;
            }
        }
        return last_positive;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

} // namespace resetfree

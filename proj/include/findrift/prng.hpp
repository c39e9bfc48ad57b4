#pragma once

#include <cstdint>
#include <vector>

namespace findrift {

// xorshift64* — a tiny, fully-specified generator used wherever the harness
// needs reproducible pseudo-randomness that must be identical across
// platforms and re-implementations (mock providers, fixture generation,
// jitter draws, test shuffles). std::mt19937 would work on one platform but
// its distributions are not bit-portable; this one is defined to the bit.
//
//   state ^= state >> 12; state ^= state << 25; state ^= state >> 27;
//   output = state * 0x2545F4914F6CDD1D
//
// The all-zero state is invalid for xorshift, so seed 0 is remapped to the
// fixed odd constant 0x9E3779B97F4A7C15.
class Xorshift64Star {
public:
    explicit Xorshift64Star(std::uint64_t seed)
        : state_(seed != 0 ? seed : 0x9E3779B97F4A7C15ULL) {}

    std::uint64_t next() {
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545F4914F6CDD1DULL;
    }

    // Uniform double in [0,1) with 53 random bits.
    double u01() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, bound). Modulo bias is < 2^-40 for bound < 2^24,
    // acceptable for mock schedules and fixture data.
    std::uint64_t bounded(std::uint64_t bound) {
        return bound == 0 ? 0 : next() % bound;
    }

    // In-place Fisher-Yates shuffle, iterating from the back.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace findrift

#ifndef TWRB_RNG_HPP
#define TWRB_RNG_HPP

#include <cstdint>

#include "twrb/matrix.hpp"

namespace twrb {

// Counter-based splittable generator. Every draw is a pure function of
// (seed, stream, index), so Monte Carlo results do not depend on thread
// scheduling or call order: stream identifies the (trial, purpose,
// resample) tuple and index walks the draws inside it.
class RandomStream {
public:
    // Purposes keep the sub-streams of one trial from overlapping.
    enum Purpose : std::uint64_t { kChannels = 0, kSymbols = 1, kNoise = 2, kGeneric = 3 };

    RandomStream(std::uint64_t seed, std::uint64_t trial, Purpose purpose, std::uint64_t resample = 0);

    std::uint64_t bits(std::uint64_t index) const;
    // Uniform on (0, 1), never exactly 0 or 1.
    double uniform01(std::uint64_t index) const;
    // Circularly symmetric complex Gaussian CN(0, 1); consumes indices
    // 2*index and 2*index + 1 of the underlying uniform stream.
    cplx cgaussian(std::uint64_t index) const;

private:
    std::uint64_t key_;
};

}  // namespace twrb

#endif

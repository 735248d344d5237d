#include "twrb/rng.hpp"

#include <cmath>

namespace twrb {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer; the jump-ahead form makes the whole stream
// addressable by index.
std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t trial, Purpose purpose,
                           std::uint64_t resample) {
    std::uint64_t k = mix(seed + kGolden);
    k = mix(k ^ (trial + kGolden));
    k = mix(k ^ (static_cast<std::uint64_t>(purpose) + 1));
    if (resample != 0) k = mix(k ^ (resample * kGolden));
    key_ = k;
}

std::uint64_t RandomStream::bits(std::uint64_t index) const {
    return mix(key_ + kGolden * (index + 1));
}

double RandomStream::uniform01(std::uint64_t index) const {
    return (static_cast<double>(bits(index) >> 11) + 0.5) * 0x1.0p-53;
}

cplx RandomStream::cgaussian(std::uint64_t index) const {
    // Polar Box-Muller in one step: |z|^2 ~ Exp(1), phase uniform.
    double u1 = uniform01(2 * index);
    double u2 = uniform01(2 * index + 1);
    double r = std::sqrt(-std::log(u1));
    double th = 2.0 * M_PI * u2;
    return cplx(r * std::cos(th), r * std::sin(th));
}

}  // namespace twrb

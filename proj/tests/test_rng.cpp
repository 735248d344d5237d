#include <doctest.h>

#include <cmath>

#include "twrb/rng.hpp"

using namespace twrb;

TEST_SUITE_BEGIN("rng");

TEST_CASE("streams are pure functions of their coordinates") {
    RandomStream a(42, 7, RandomStream::kChannels);
    RandomStream b(42, 7, RandomStream::kChannels);
    for (std::uint64_t i = 0; i < 32; ++i) {
        CHECK(a.bits(i) == b.bits(i));
        CHECK(a.cgaussian(i) == b.cgaussian(i));
    }
    // order of evaluation does not matter
    CHECK(a.bits(31) == b.bits(31));
    CHECK(a.bits(0) == b.bits(0));

    RandomStream c(42, 8, RandomStream::kChannels);
    RandomStream d(43, 7, RandomStream::kChannels);
    RandomStream e(42, 7, RandomStream::kNoise);
    bool differs_c = false, differs_d = false, differs_e = false;
    for (std::uint64_t i = 0; i < 8; ++i) {
        differs_c |= a.bits(i) != c.bits(i);
        differs_d |= a.bits(i) != d.bits(i);
        differs_e |= a.bits(i) != e.bits(i);
    }
    CHECK(differs_c);
    CHECK(differs_d);
    CHECK(differs_e);
}

TEST_CASE("uniforms stay inside the open interval") {
    RandomStream rs(1, 0, RandomStream::kGeneric);
    for (std::uint64_t i = 0; i < 10000; ++i) {
        double u = rs.uniform01(i);
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("complex gaussians have the right moments") {
    RandomStream rs(2024, 5, RandomStream::kGeneric);
    const int n = 100000;
    double sum_re = 0.0, sum_im = 0.0, sum_abs2 = 0.0;
    for (int i = 0; i < n; ++i) {
        cplx z = rs.cgaussian(static_cast<std::uint64_t>(i));
        sum_re += z.real();
        sum_im += z.imag();
        sum_abs2 += std::norm(z);
    }
    CHECK(std::abs(sum_re / n) < 0.02);
    CHECK(std::abs(sum_im / n) < 0.02);
    CHECK(sum_abs2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_SUITE_END();

#ifndef TWRB_TEST_SUPPORT_HPP
#define TWRB_TEST_SUPPORT_HPP

#include "twrb/factor.hpp"
#include "twrb/matrix.hpp"
#include "twrb/rng.hpp"

namespace twrb::test {

inline Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
    RandomStream rs(seed, 0, RandomStream::kGeneric);
    Matrix a(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) a(i, j) = rs.cgaussian(static_cast<std::uint64_t>(i * cols + j));
    return a;
}

inline Matrix random_hpd(int n, std::uint64_t seed) {
    Matrix g = random_matrix(n, n, seed);
    return g.adjoint() * g + Matrix::identity(n);
}

inline Matrix random_unitary(int n, std::uint64_t seed) {
    return qr_decompose(random_matrix(n, n, seed)).q;
}

inline Matrix random_lower_triangular(int n, std::uint64_t seed) {
    Matrix a = random_matrix(n, n, seed);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) a(i, j) = 0.0;
    return a;
}

}  // namespace twrb::test

#endif

#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "twrb/factor.hpp"

using namespace twrb;

TEST_SUITE_BEGIN("factor");

namespace {

void check_ql(const Matrix& a, double tol = 1e-10) {
    QlFactorization f = ql_decompose(a);
    const int n = a.rows(), m = a.cols();
    CHECK(f.q.rows() == n);
    CHECK(f.q.cols() == n);
    CHECK(f.l.rows() == n);
    CHECK(f.l.cols() == m);
    CHECK(distance_fro(f.q.adjoint() * f.q, Matrix::identity(n)) < tol);
    CHECK(distance_fro(f.q * f.l, a) < tol * std::max(1.0, a.norm_fro()));
    // zeros above the bottom-block triangle: l(i, j) = 0 for j > i + m - n
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            if (j > i + m - n) CHECK(std::abs(f.l(i, j)) < tol);
    for (double d : f.block_diag()) CHECK(d >= 0.0);
}

void check_qr(const Matrix& a, double tol = 1e-10) {
    QrFactorization f = qr_decompose(a);
    const int n = a.rows(), m = a.cols();
    CHECK(f.q.rows() == n);
    CHECK(f.q.cols() == m);
    CHECK(f.r.rows() == m);
    CHECK(distance_fro(f.q.adjoint() * f.q, Matrix::identity(m)) < tol);
    CHECK(distance_fro(f.q * f.r, a) < tol * std::max(1.0, a.norm_fro()));
    CHECK(is_upper_triangular(f.r, tol));
    for (double d : f.diag_real()) CHECK(d >= 0.0);
}

}  // namespace

TEST_CASE("ql identity and swap") {
    Matrix id = Matrix::identity(2);
    QlFactorization f = ql_decompose(id);
    CHECK(distance_fro(f.q, id) < 1e-12);
    CHECK(distance_fro(f.l, id) < 1e-12);

    Matrix swap = {{0.0, 1.0}, {1.0, 0.0}};
    QlFactorization g = ql_decompose(swap);
    CHECK(distance_fro(g.q * g.l, swap) < 1e-12);
    CHECK(is_lower_triangular(g.l, 1e-12));
    CHECK(std::abs(std::abs(determinant(g.l)) - 1.0) < 1e-12);
}

TEST_CASE("ql random tall") {
    check_ql(test::random_matrix(4, 2, 11));
    check_ql(test::random_matrix(6, 3, 12));
    check_ql(test::random_matrix(5, 5, 13));
    CHECK_THROWS_AS(ql_decompose(test::random_matrix(2, 4, 14)), std::invalid_argument);
}

TEST_CASE("qr identity and known column") {
    Matrix id = Matrix::identity(2);
    QrFactorization f = qr_decompose(id);
    CHECK(distance_fro(f.q, id) < 1e-12);
    CHECK(distance_fro(f.r, id) < 1e-12);

    Matrix col = {{3.0}, {4.0}};
    QrFactorization g = qr_decompose(col);
    CHECK(g.r(0, 0).real() == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(std::abs(g.q(0, 0) - cplx(0.6, 0.0)) < 1e-12);
    CHECK(std::abs(g.q(1, 0) - cplx(0.8, 0.0)) < 1e-12);
}

TEST_CASE("qr random tall") {
    check_qr(test::random_matrix(4, 2, 21));
    check_qr(test::random_matrix(7, 4, 22));
    check_qr(test::random_matrix(3, 3, 23));
}

TEST_CASE("ql from qr of the reversed input") {
    // Reversing rows and columns of the QL factors yields a valid full QR
    // of the column-reversed input; checked through reconstruction.
    Matrix a = test::random_matrix(5, 3, 31);
    QlFactorization f = ql_decompose(a);
    Matrix ar(5, 3);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 3; ++j) ar(i, j) = a(i, 2 - j);
    Matrix qrev(5, 5), lrev(5, 3);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) qrev(i, j) = f.q(i, 4 - j);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 3; ++j) lrev(i, j) = f.l(4 - i, 2 - j);
    CHECK(is_upper_triangular(lrev, 1e-12));
    CHECK(distance_fro(qrev * lrev, ar) < 1e-10);
}

TEST_CASE("cholesky trivial and diagonal") {
    CholeskyFactor f = cholesky(Matrix::identity(3));
    CHECK(distance_fro(f.xi, Matrix::identity(3)) < 1e-13);

    Matrix d = {{4.0, 0.0}, {0.0, 9.0}};
    CholeskyFactor g = cholesky(d);
    CHECK(std::abs(g.xi(0, 0) - cplx(2.0, 0.0)) < 1e-13);
    CHECK(std::abs(g.xi(1, 1) - cplx(3.0, 0.0)) < 1e-13);
}

TEST_CASE("cholesky random hpd") {
    for (int n = 1; n <= 6; ++n) {
        Matrix c = test::random_hpd(n, 200u + static_cast<std::uint64_t>(n));
        CholeskyFactor f = cholesky(c);
        CHECK(is_lower_triangular(f.xi, 1e-12));
        for (int i = 0; i < n; ++i) {
            CHECK(f.xi(i, i).imag() == 0.0);
            CHECK(f.xi(i, i).real() > 0.0);
        }
        CHECK(distance_fro(f.xi.adjoint() * f.xi, c) < 1e-10 * c.norm_fro());
    }
}

TEST_CASE("cholesky rejects indefinite input") {
    Matrix bad = {{1.0, 0.0}, {0.0, -1.0}};
    CHECK_THROWS_AS(cholesky(bad), NotPositiveDefinite);
    Matrix singular = {{1.0, 1.0}, {1.0, 1.0}};
    CHECK_THROWS_AS(cholesky(singular), NotPositiveDefinite);
    CHECK_THROWS_AS(cholesky(test::random_matrix(3, 3, 7)), std::invalid_argument);
}

TEST_CASE("hermitian eigendecomposition") {
    for (int n = 1; n <= 6; ++n) {
        Matrix a = test::random_hpd(n, 300u + static_cast<std::uint64_t>(n));
        HermitianEigen e = hermitian_eig(a);
        CHECK(distance_fro(e.vectors * Matrix::diagonal(e.values) * e.vectors.adjoint(), a) <
              1e-11 * a.norm_fro());
        CHECK(distance_fro(e.vectors.adjoint() * e.vectors, Matrix::identity(n)) < 1e-11);
        for (size_t i = 1; i < e.values.size(); ++i) CHECK(e.values[i - 1] >= e.values[i]);
    }
}

TEST_CASE("hermitian sqrt") {
    CHECK(distance_fro(hermitian_sqrt(Matrix::identity(2)), Matrix::identity(2)) < 1e-12);
    Matrix d = {{4.0, 0.0}, {0.0, 9.0}};
    Matrix s = hermitian_sqrt(d);
    CHECK(std::abs(s(0, 0) - cplx(2.0, 0.0)) < 1e-12);
    CHECK(std::abs(s(1, 1) - cplx(3.0, 0.0)) < 1e-12);

    Matrix g = test::random_matrix(4, 4, 41);
    Matrix psd = g.adjoint() * g;
    Matrix r = hermitian_sqrt(psd);
    CHECK(distance_fro(r * r, psd) < 1e-9 * std::max(1.0, psd.norm_fro()));

    Matrix neg = {{-1.0, 0.0}, {0.0, 1.0}};
    CHECK_THROWS_AS(hermitian_sqrt(neg), NotPositiveDefinite);
}

TEST_CASE("svd trivial cases") {
    SvdFactorization f = svd(Matrix::identity(3));
    for (double s : f.sigma) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));

    Matrix d = {{3.0, 0.0}, {0.0, -4.0}};
    SvdFactorization g = svd(d);
    CHECK(g.sigma[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(g.sigma[1] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(distance_fro(g.u * g.sigma_matrix() * g.v.adjoint(), d) < 1e-12);
}

TEST_CASE("svd random shapes") {
    for (auto [r, c] : {std::pair{4, 2}, {2, 4}, {5, 5}, {6, 1}}) {
        Matrix a = test::random_matrix(r, c, 400u + static_cast<std::uint64_t>(r * 7 + c));
        SvdFactorization f = svd(a);
        CHECK(distance_fro(f.u * f.sigma_matrix() * f.v.adjoint(), a) < 1e-9);
        CHECK(distance_fro(f.u.adjoint() * f.u, Matrix::identity(f.u.cols())) < 1e-9);
        CHECK(distance_fro(f.v.adjoint() * f.v, Matrix::identity(f.v.cols())) < 1e-9);
        for (size_t i = 1; i < f.sigma.size(); ++i) CHECK(f.sigma[i - 1] >= f.sigma[i]);
    }

    // product of singular values equals sqrt(det(a^H a)) for a tall matrix
    Matrix a = test::random_matrix(4, 2, 55);
    SvdFactorization f = svd(a);
    double prod = f.sigma[0] * f.sigma[1];
    double ref = std::sqrt(determinant(a.adjoint() * a).real());
    CHECK(prod == doctest::Approx(ref).epsilon(1e-9));
}

TEST_CASE("svd rank deficient") {
    Matrix a(4, 2);
    a(0, 0) = 1.0;
    a(1, 0) = 2.0;  // second column zero
    SvdFactorization f = svd(a);
    CHECK(f.sigma[1] == 0.0);
    CHECK(distance_fro(f.u.adjoint() * f.u, Matrix::identity(2)) < 1e-10);
    CHECK(distance_fro(f.u * f.sigma_matrix() * f.v.adjoint(), a) < 1e-10);
}

TEST_CASE("det of triangular sum") {
    Matrix i2 = Matrix::identity(2);
    CHECK(std::abs(det_triangular_sum(i2, i2) - cplx(4.0, 0.0)) < 1e-14);

    Matrix a = Matrix::diagonal(std::vector<double>{1.0, 2.0});
    Matrix b = Matrix::diagonal(std::vector<double>{3.0, 4.0});
    CHECK(std::abs(det_triangular_sum(a, b) - cplx(24.0, 0.0)) < 1e-14);

    Matrix l1 = test::random_lower_triangular(4, 61);
    Matrix l2 = test::random_lower_triangular(4, 62);
    cplx viaprod = det_triangular_sum(l1, l2);
    cplx dense = determinant(l1 + l2);
    CHECK(std::abs(viaprod - dense) < 1e-10 * std::max(1.0, std::abs(dense)));

    CHECK_THROWS_AS(det_triangular_sum(l1, test::random_lower_triangular(3, 63)),
                    std::invalid_argument);
    CHECK_THROWS_AS(det_triangular_sum(l1, l2.transpose()), std::invalid_argument);
}

TEST_CASE("push-through inverse identity") {
    // (I + X X^H)^-1 X = X (I + X^H X)^-1
    for (int n = 1; n <= 6; ++n) {
        Matrix x = test::random_matrix(n, std::max(1, n - 1), 500u + static_cast<std::uint64_t>(n));
        Matrix lhs = inverse(Matrix::identity(n) + x * x.adjoint()) * x;
        Matrix rhs = x * inverse(Matrix::identity(x.cols()) + x.adjoint() * x);
        CHECK(distance_fro(lhs, rhs) < 1e-10);
    }
}

TEST_CASE("unitary factor leaves determinant modulus unchanged") {
    for (int n = 2; n <= 5; ++n) {
        Matrix t = test::random_unitary(n, 600u + static_cast<std::uint64_t>(n));
        Matrix f = test::random_matrix(n, n, 700u + static_cast<std::uint64_t>(n));
        CHECK(std::abs(determinant(t * f)) ==
              doctest::Approx(std::abs(determinant(f))).epsilon(1e-10));
    }
}

TEST_CASE("seeded residual battery across sizes") {
    // Smaller version of the acceptance battery; full counts run there.
    int idx = 0;
    for (int n = 1; n <= 8; ++n)
        for (int m = 1; m <= n; ++m) {
            Matrix a = test::random_matrix(n, m, 800u + static_cast<std::uint64_t>(++idx));
            check_ql(a);
            check_qr(a);
        }
}

TEST_SUITE_END();

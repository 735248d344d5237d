#ifndef TWRB_FACTOR_HPP
#define TWRB_FACTOR_HPP

#include <stdexcept>
#include <vector>

#include "twrb/matrix.hpp"

namespace twrb {

// Raised when a matrix that must be Hermitian positive definite is not,
// e.g. a covariance that lost definiteness.
class NotPositiveDefinite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// a = q * l with q unitary N x N and l lower triangular N x M (N >= M).
// Rectangular convention: the M x M lower triangle sits in the bottom M
// rows of l, the N-M rows above it are zero. Diagonal entries of that
// block are real and nonnegative.
struct QlFactorization {
    Matrix q;
    Matrix l;
    // Diagonal of the bottom M x M block, real by construction.
    std::vector<double> block_diag() const;
};

// a = q * r with q N x M (orthonormal columns) and r M x M upper
// triangular with real nonnegative diagonal.
struct QrFactorization {
    Matrix q;
    Matrix r;
    std::vector<double> diag_real() const;
};

// c = xi^H * xi with xi lower triangular, real positive diagonal.
struct CholeskyFactor {
    Matrix xi;
};

// a = u * diag(sigma) * v^H; u is m x k, v is n x k with orthonormal
// columns, k = min(m, n), sigma nonnegative and nonincreasing.
struct SvdFactorization {
    Matrix u;
    std::vector<double> sigma;
    Matrix v;
    Matrix sigma_matrix() const;
};

// a = vectors * diag(values) * vectors^H for Hermitian a; values sorted
// descending.
struct HermitianEigen {
    std::vector<double> values;
    Matrix vectors;
};

// Full QR via Householder reflections: a (N x M, N >= M) = q (N x N
// unitary) * r (N x M, upper triangular top block). Shared kernel behind
// ql_decompose and qr_decompose.
void householder_qr_full(const Matrix& a, Matrix& q, Matrix& r);

QlFactorization ql_decompose(const Matrix& a);
QrFactorization qr_decompose(const Matrix& a);
CholeskyFactor cholesky(const Matrix& c);
HermitianEigen hermitian_eig(const Matrix& a);
Matrix hermitian_sqrt(const Matrix& a);
SvdFactorization svd(const Matrix& a);

// Product formula det(a + b) = prod_i (a_ii + b_ii) for two triangular
// matrices of the same orientation.
cplx det_triangular_sum(const Matrix& a, const Matrix& b);

}  // namespace twrb

#endif

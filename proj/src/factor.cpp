#include "twrb/factor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace twrb {

namespace {

Matrix reverse_rows(const Matrix& a) {
    Matrix b(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) b(i, j) = a(a.rows() - 1 - i, j);
    return b;
}

Matrix reverse_cols(const Matrix& a) {
    Matrix b(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) b(i, j) = a(i, a.cols() - 1 - j);
    return b;
}

// Unit-modulus phase of z, 1 for z ~ 0.
cplx phase_of(cplx z) {
    double m = std::abs(z);
    return m > 0.0 ? z / m : cplx(1.0, 0.0);
}

// 2x2 Hermitian Jacobi rotation zeroing the off-diagonal of
// [[app, apq], [conj(apq), aqq]]. Returns c (real) and s (complex) such
// that G = [[c, s], [-conj(s), c]] satisfies G^H A G diagonal.
void jacobi_rotation(double app, double aqq, cplx apq, double& c, cplx& s) {
    double m = std::abs(apq);
    if (m == 0.0) {
        c = 1.0;
        s = 0.0;
        return;
    }
    cplx ph = apq / m;
    double tau = (aqq - app) / (2.0 * m);
    double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
    c = 1.0 / std::sqrt(1.0 + t * t);
    s = ph * (t * c);
}

}  // namespace

std::vector<double> QlFactorization::block_diag() const {
    int m = l.cols();
    int off = l.rows() - m;
    std::vector<double> d(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) d[static_cast<size_t>(k)] = l(off + k, k).real();
    return d;
}

std::vector<double> QrFactorization::diag_real() const {
    std::vector<double> d(static_cast<size_t>(r.rows()));
    for (int k = 0; k < r.rows(); ++k) d[static_cast<size_t>(k)] = r(k, k).real();
    return d;
}

Matrix SvdFactorization::sigma_matrix() const {
    return Matrix::diagonal(sigma);
}

void householder_qr_full(const Matrix& a, Matrix& q, Matrix& r) {
    const int n = a.rows();
    const int m = a.cols();
    if (n < m) throw std::invalid_argument("householder_qr_full requires rows >= cols");
    if (!a.is_finite()) throw std::invalid_argument("non-finite input to QR");
    r = a;
    q = Matrix::identity(n);
    std::vector<cplx> v(static_cast<size_t>(n));
    for (int k = 0; k < m; ++k) {
        double normx = 0.0;
        for (int i = k; i < n; ++i) normx += std::norm(r(i, k));
        normx = std::sqrt(normx);
        if (normx < 1e-300) continue;  // column already zero below the pivot
        cplx alpha = -phase_of(r(k, k)) * normx;
        double vnorm2 = 0.0;
        for (int i = k; i < n; ++i) {
            v[static_cast<size_t>(i)] = r(i, k) - (i == k ? alpha : cplx(0.0, 0.0));
            vnorm2 += std::norm(v[static_cast<size_t>(i)]);
        }
        if (vnorm2 < 1e-300) continue;
        // r <- (I - 2 v v^H / v^H v) r on the trailing block
        for (int j = k; j < m; ++j) {
            cplx dot = 0.0;
            for (int i = k; i < n; ++i) dot += std::conj(v[static_cast<size_t>(i)]) * r(i, j);
            dot *= 2.0 / vnorm2;
            for (int i = k; i < n; ++i) r(i, j) -= dot * v[static_cast<size_t>(i)];
        }
        // q <- q (I - 2 v v^H / v^H v)
        for (int i = 0; i < n; ++i) {
            cplx dot = 0.0;
            for (int j = k; j < n; ++j) dot += q(i, j) * v[static_cast<size_t>(j)];
            dot *= 2.0 / vnorm2;
            for (int j = k; j < n; ++j) q(i, j) -= dot * std::conj(v[static_cast<size_t>(j)]);
        }
        r(k, k) = alpha;
        for (int i = k + 1; i < n; ++i) r(i, k) = 0.0;
    }
    // Absorb unit phases into q so every diagonal entry of r is real >= 0.
    for (int k = 0; k < m; ++k) {
        cplx ph = phase_of(r(k, k));
        cplx phc = std::conj(ph);
        for (int j = k; j < m; ++j) r(k, j) *= phc;
        for (int i = 0; i < n; ++i) q(i, k) *= ph;
        r(k, k) = cplx(std::abs(r(k, k).real()) < 1e-300 ? 0.0 : r(k, k).real(), 0.0);
    }
}

QlFactorization ql_decompose(const Matrix& a) {
    if (a.rows() < a.cols())
        throw std::invalid_argument("ql_decompose requires rows >= cols");
    // QL by reduction to QR: reverse the input columns, take a full
    // Householder QR, then reverse the columns of Q and both the rows and
    // columns of R.
    Matrix q, r;
    householder_qr_full(reverse_cols(a), q, r);
    QlFactorization f;
    f.q = reverse_cols(q);
    f.l = reverse_rows(reverse_cols(r));
    return f;
}

QrFactorization qr_decompose(const Matrix& a) {
    if (a.rows() < a.cols())
        throw std::invalid_argument("qr_decompose requires rows >= cols");
    Matrix q, r;
    householder_qr_full(a, q, r);
    QrFactorization f;
    f.q = q.block(0, 0, a.rows(), a.cols());
    f.r = r.block(0, 0, a.cols(), a.cols());
    return f;
}

CholeskyFactor cholesky(const Matrix& c) {
    if (!c.square()) throw std::invalid_argument("cholesky of non-square matrix");
    const int n = c.rows();
    if (!is_hermitian(c, 1e-10 * std::max(1.0, c.max_abs())))
        throw std::invalid_argument("cholesky input is not Hermitian");
    // c = xi^H xi with xi lower triangular. Equivalent to a standard
    // L L^H factorization of the row/column-reversed matrix.
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale = std::max(scale, c(i, i).real());
    const double pivot_tol = 1e-12 * std::max(1.0, scale);
    Matrix cr = reverse_rows(reverse_cols(c));
    Matrix g(n, n);
    for (int j = 0; j < n; ++j) {
        double d = cr(j, j).real();
        for (int k = 0; k < j; ++k) d -= std::norm(g(j, k));
        if (d <= pivot_tol)
            throw NotPositiveDefinite("cholesky pivot " + std::to_string(j) +
                                      " not positive: " + std::to_string(d));
        double ljj = std::sqrt(d);
        g(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            cplx s = cr(i, j);
            for (int k = 0; k < j; ++k) s -= g(i, k) * std::conj(g(j, k));
            g(i, j) = s / ljj;
        }
    }
    CholeskyFactor f;
    f.xi = reverse_rows(reverse_cols(g.adjoint()));
    return f;
}

HermitianEigen hermitian_eig(const Matrix& a) {
    if (!a.square()) throw std::invalid_argument("hermitian_eig of non-square matrix");
    const int n = a.rows();
    if (!is_hermitian(a, 1e-8 * std::max(1.0, a.max_abs())))
        throw std::invalid_argument("hermitian_eig input is not Hermitian");
    Matrix w = a;
    // Symmetrize exactly so rounding in the input cannot bias the sweep.
    for (int i = 0; i < n; ++i) {
        w(i, i) = cplx(w(i, i).real(), 0.0);
        for (int j = i + 1; j < n; ++j) {
            cplx avg = 0.5 * (w(i, j) + std::conj(w(j, i)));
            w(i, j) = avg;
            w(j, i) = std::conj(avg);
        }
    }
    Matrix vecs = Matrix::identity(n);
    const double eps = 1e-15 * std::max(1.0, w.max_abs());
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += std::norm(w(p, q));
        if (std::sqrt(off) <= eps * n) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(w(p, q)) <= eps) continue;
                double c;
                cplx s;
                jacobi_rotation(w(p, p).real(), w(q, q).real(), w(p, q), c, s);
                // w <- G^H w G, vecs <- vecs G with G = [[c, s], [-conj(s), c]]
                for (int i = 0; i < n; ++i) {
                    cplx wip = w(i, p), wiq = w(i, q);
                    w(i, p) = c * wip - std::conj(s) * wiq;
                    w(i, q) = s * wip + c * wiq;
                }
                for (int j = 0; j < n; ++j) {
                    cplx wpj = w(p, j), wqj = w(q, j);
                    w(p, j) = c * wpj - s * wqj;
                    w(q, j) = std::conj(s) * wpj + c * wqj;
                }
                for (int i = 0; i < n; ++i) {
                    cplx vip = vecs(i, p), viq = vecs(i, q);
                    vecs(i, p) = c * vip - std::conj(s) * viq;
                    vecs(i, q) = s * vip + c * viq;
                }
                w(p, q) = 0.0;
                w(q, p) = 0.0;
            }
    }
    HermitianEigen e;
    e.values.resize(static_cast<size_t>(n));
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return w(i, i).real() > w(j, j).real(); });
    e.vectors = Matrix(n, n);
    for (int j = 0; j < n; ++j) {
        e.values[static_cast<size_t>(j)] = w(order[static_cast<size_t>(j)], order[static_cast<size_t>(j)]).real();
        for (int i = 0; i < n; ++i) e.vectors(i, j) = vecs(i, order[static_cast<size_t>(j)]);
    }
    return e;
}

Matrix hermitian_sqrt(const Matrix& a) {
    HermitianEigen e = hermitian_eig(a);
    double most_negative = e.values.empty() ? 0.0 : e.values.back();
    if (most_negative < -1e-6)
        throw NotPositiveDefinite("hermitian_sqrt: eigenvalue " + std::to_string(most_negative) +
                                  " below tolerance");
    std::vector<double> s(e.values.size());
    for (size_t i = 0; i < e.values.size(); ++i) s[i] = std::sqrt(std::max(0.0, e.values[i]));
    return e.vectors * Matrix::diagonal(s) * e.vectors.adjoint();
}

SvdFactorization svd(const Matrix& a) {
    if (!a.is_finite()) throw std::invalid_argument("non-finite input to svd");
    const int m = a.rows();
    const int n = a.cols();
    if (m < n) {
        SvdFactorization t = svd(a.adjoint());
        return SvdFactorization{t.v, t.sigma, t.u};
    }
    // One-sided Jacobi: rotate column pairs of w until mutually orthogonal,
    // accumulating the rotations into v.
    Matrix w = a;
    Matrix v = Matrix::identity(n);
    const double tol = 1e-14;
    for (int sweep = 0; sweep < 100; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0;
                cplx gamma = 0.0;
                for (int i = 0; i < m; ++i) {
                    alpha += std::norm(w(i, p));
                    beta += std::norm(w(i, q));
                    gamma += std::conj(w(i, p)) * w(i, q);
                }
                if (std::abs(gamma) <= tol * std::sqrt(alpha * beta) || std::abs(gamma) < 1e-300)
                    continue;
                rotated = true;
                double c;
                cplx s;
                jacobi_rotation(alpha, beta, gamma, c, s);
                for (int i = 0; i < m; ++i) {
                    cplx wip = w(i, p), wiq = w(i, q);
                    w(i, p) = c * wip - std::conj(s) * wiq;
                    w(i, q) = s * wip + c * wiq;
                }
                for (int i = 0; i < n; ++i) {
                    cplx vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - std::conj(s) * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        if (!rotated) break;
    }
    std::vector<double> sig(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += std::norm(w(i, j));
        sig[static_cast<size_t>(j)] = std::sqrt(s);
    }
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return sig[static_cast<size_t>(i)] > sig[static_cast<size_t>(j)]; });
    SvdFactorization f;
    f.sigma.resize(static_cast<size_t>(n));
    f.u = Matrix(m, n);
    f.v = Matrix(n, n);
    const double rank_tol = 1e-13 * (sig.empty() ? 1.0 : std::max(1.0, sig[static_cast<size_t>(order[0])]));
    for (int j = 0; j < n; ++j) {
        int src = order[static_cast<size_t>(j)];
        double s = sig[static_cast<size_t>(src)];
        f.sigma[static_cast<size_t>(j)] = s;
        for (int i = 0; i < n; ++i) f.v(i, j) = v(i, src);
        if (s > rank_tol) {
            for (int i = 0; i < m; ++i) f.u(i, j) = w(i, src) / s;
        }
    }
    // Complete U columns for zero singular values by Gram-Schmidt against
    // the standard basis; pick the basis vector with the largest residual.
    for (int j = 0; j < n; ++j) {
        if (f.sigma[static_cast<size_t>(j)] > rank_tol) continue;
        std::vector<cplx> best(static_cast<size_t>(m), cplx(0.0, 0.0));
        double best_norm = -1.0;
        for (int cand = 0; cand < m; ++cand) {
            std::vector<cplx> col(static_cast<size_t>(m), cplx(0.0, 0.0));
            col[static_cast<size_t>(cand)] = 1.0;
            for (int k = 0; k < n; ++k) {
                if (k == j) continue;
                cplx dot = 0.0;
                for (int i = 0; i < m; ++i) dot += std::conj(f.u(i, k)) * col[static_cast<size_t>(i)];
                for (int i = 0; i < m; ++i) col[static_cast<size_t>(i)] -= dot * f.u(i, k);
            }
            double nrm = 0.0;
            for (const cplx& z : col) nrm += std::norm(z);
            nrm = std::sqrt(nrm);
            if (nrm > best_norm) {
                best_norm = nrm;
                best = col;
            }
        }
        if (best_norm > 1e-8)
            for (int i = 0; i < m; ++i) f.u(i, j) = best[static_cast<size_t>(i)] / best_norm;
    }
    return f;
}

cplx det_triangular_sum(const Matrix& a, const Matrix& b) {
    if (!a.square() || !b.square() || a.rows() != b.rows())
        throw std::invalid_argument("det_triangular_sum: dimension mismatch");
    const double tol = 1e-12 * std::max(1.0, std::max(a.max_abs(), b.max_abs()));
    bool lower = is_lower_triangular(a, tol) && is_lower_triangular(b, tol);
    bool upper = is_upper_triangular(a, tol) && is_upper_triangular(b, tol);
    if (!lower && !upper)
        throw std::invalid_argument("det_triangular_sum: inputs must share a triangular orientation");
    cplx p = 1.0;
    for (int i = 0; i < a.rows(); ++i) p *= a(i, i) + b(i, i);
    return p;
}

}  // namespace twrb

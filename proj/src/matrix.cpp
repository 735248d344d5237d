#include "twrb/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace twrb {

namespace {

void check_dims(int rows, int cols) {
    if (rows <= 0 || cols <= 0)
        throw std::invalid_argument("matrix dimensions must be positive, got " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
}

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
    check_dims(rows, cols);
    e_.assign(static_cast<size_t>(rows) * cols, cplx(0.0, 0.0));
}

Matrix::Matrix(int rows, int cols, std::vector<cplx> entries) : rows_(rows), cols_(cols), e_(std::move(entries)) {
    check_dims(rows, cols);
    if (e_.size() != static_cast<size_t>(rows) * cols)
        throw std::invalid_argument("entry count does not match dimensions");
    for (const cplx& z : e_)
        if (!finite(z)) throw std::invalid_argument("matrix entries must be finite");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<cplx>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    check_dims(rows_, cols_);
    e_.reserve(static_cast<size_t>(rows_) * cols_);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != cols_)
            throw std::invalid_argument("ragged initializer");
        for (cplx z : r) {
            if (!finite(z)) throw std::invalid_argument("matrix entries must be finite");
            e_.push_back(z);
        }
    }
}

Matrix Matrix::zeros(int rows, int cols) { return Matrix(rows, cols); }

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(const std::vector<cplx>& d) {
    Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
    return m;
}

Matrix Matrix::diagonal(const std::vector<double>& d) {
    std::vector<cplx> c(d.begin(), d.end());
    return diagonal(c);
}

Matrix Matrix::column(const std::vector<cplx>& v) {
    return Matrix(static_cast<int>(v.size()), 1, v);
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix Matrix::conjugate() const {
    Matrix c = *this;
    for (cplx& z : c.e_) z = std::conj(z);
    return c;
}

Matrix Matrix::adjoint() const {
    Matrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) t(j, i) = std::conj((*this)(i, j));
    return t;
}

cplx Matrix::trace() const {
    if (!square()) throw std::invalid_argument("trace of non-square matrix");
    cplx s = 0.0;
    for (int i = 0; i < rows_; ++i) s += (*this)(i, i);
    return s;
}

double Matrix::norm_fro() const {
    double s = 0.0;
    for (const cplx& z : e_) s += std::norm(z);
    return std::sqrt(s);
}

double Matrix::max_abs() const {
    double s = 0.0;
    for (const cplx& z : e_) s = std::max(s, std::abs(z));
    return s;
}

bool Matrix::is_finite() const {
    for (const cplx& z : e_)
        if (!finite(z)) return false;
    return true;
}

Matrix Matrix::block(int row0, int col0, int nrows, int ncols) const {
    if (row0 < 0 || col0 < 0 || row0 + nrows > rows_ || col0 + ncols > cols_)
        throw std::invalid_argument("block out of range");
    Matrix b(nrows, ncols);
    for (int i = 0; i < nrows; ++i)
        for (int j = 0; j < ncols; ++j) b(i, j) = (*this)(row0 + i, col0 + j);
    return b;
}

void Matrix::set_block(int row0, int col0, const Matrix& b) {
    if (row0 < 0 || col0 < 0 || row0 + b.rows() > rows_ || col0 + b.cols() > cols_)
        throw std::invalid_argument("block out of range");
    for (int i = 0; i < b.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) (*this)(row0 + i, col0 + j) = b(i, j);
}

std::vector<cplx> Matrix::diag() const {
    int n = std::min(rows_, cols_);
    std::vector<cplx> d(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) d[static_cast<size_t>(i)] = (*this)(i, i);
    return d;
}

Matrix& Matrix::operator+=(const Matrix& o) {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw std::invalid_argument("shape mismatch in +");
    for (size_t i = 0; i < e_.size(); ++i) e_[i] += o.e_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw std::invalid_argument("shape mismatch in -");
    for (size_t i = 0; i < e_.size(); ++i) e_[i] -= o.e_[i];
    return *this;
}

Matrix& Matrix::operator*=(cplx s) {
    for (cplx& z : e_) z *= s;
    return *this;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("shape mismatch in *: " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " times " + std::to_string(b.rows()) +
                                    "x" + std::to_string(b.cols()));
    Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int k = 0; k < a.cols(); ++k) {
            cplx aik = a(i, k);
            if (aik == cplx(0.0, 0.0)) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

double distance_fro(const Matrix& a, const Matrix& b) { return (a - b).norm_fro(); }

bool is_hermitian(const Matrix& a, double tol) {
    if (!a.square()) return false;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = i; j < a.cols(); ++j)
            if (std::abs(a(i, j) - std::conj(a(j, i))) > tol) return false;
    return true;
}

bool is_lower_triangular(const Matrix& a, double tol) {
    for (int i = 0; i < a.rows(); ++i)
        for (int j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j)) > tol) return false;
    return true;
}

bool is_upper_triangular(const Matrix& a, double tol) {
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < std::min(i, a.cols()); ++j)
            if (std::abs(a(i, j)) > tol) return false;
    return true;
}

cplx determinant(const Matrix& a) {
    if (!a.square()) throw std::invalid_argument("determinant of non-square matrix");
    int n = a.rows();
    Matrix lu = a;
    cplx det = 1.0;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(lu(k, k));
        for (int i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > best) {
                best = std::abs(lu(i, k));
                piv = i;
            }
        if (best == 0.0) return 0.0;
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
            det = -det;
        }
        det *= lu(k, k);
        for (int i = k + 1; i < n; ++i) {
            cplx f = lu(i, k) / lu(k, k);
            for (int j = k; j < n; ++j) lu(i, j) -= f * lu(k, j);
        }
    }
    return det;
}

Matrix inverse(const Matrix& a) {
    if (!a.square()) throw std::invalid_argument("inverse of non-square matrix");
    int n = a.rows();
    Matrix w = a;
    Matrix inv = Matrix::identity(n);
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(w(k, k));
        for (int i = k + 1; i < n; ++i)
            if (std::abs(w(i, k)) > best) {
                best = std::abs(w(i, k));
                piv = i;
            }
        if (best < 1e-300) throw std::runtime_error("singular matrix in inverse()");
        if (piv != k)
            for (int j = 0; j < n; ++j) {
                std::swap(w(k, j), w(piv, j));
                std::swap(inv(k, j), inv(piv, j));
            }
        cplx d = w(k, k);
        for (int j = 0; j < n; ++j) {
            w(k, j) /= d;
            inv(k, j) /= d;
        }
        for (int i = 0; i < n; ++i) {
            if (i == k) continue;
            cplx f = w(i, k);
            if (f == cplx(0.0, 0.0)) continue;
            for (int j = 0; j < n; ++j) {
                w(i, j) -= f * w(k, j);
                inv(i, j) -= f * inv(k, j);
            }
        }
    }
    return inv;
}

Matrix solve_lower_triangular(const Matrix& a, const Matrix& b) {
    if (!a.square() || a.rows() != b.rows())
        throw std::invalid_argument("shape mismatch in triangular solve");
    int n = a.rows();
    Matrix x = b;
    for (int j = 0; j < x.cols(); ++j)
        for (int i = 0; i < n; ++i) {
            cplx s = x(i, j);
            for (int k = 0; k < i; ++k) s -= a(i, k) * x(k, j);
            if (std::abs(a(i, i)) < 1e-300) throw std::runtime_error("singular triangular solve");
            x(i, j) = s / a(i, i);
        }
    return x;
}

}  // namespace twrb

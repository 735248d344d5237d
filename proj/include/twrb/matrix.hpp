#ifndef TWRB_MATRIX_HPP
#define TWRB_MATRIX_HPP

#include <complex>
#include <initializer_list>
#include <vector>

namespace twrb {

using cplx = std::complex<double>;

// Dense complex matrix, row-major. Sized for the small systems in this
// project (dimensions <= 16), so everything is plain O(n^3) with no
// blocking or views.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols);  // zero-initialized
    Matrix(int rows, int cols, std::vector<cplx> entries);
    Matrix(std::initializer_list<std::initializer_list<cplx>> rows);

    static Matrix zeros(int rows, int cols);
    static Matrix identity(int n);
    static Matrix diagonal(const std::vector<cplx>& d);
    static Matrix diagonal(const std::vector<double>& d);
    static Matrix column(const std::vector<cplx>& v);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }
    bool square() const { return rows_ == cols_; }

    cplx& operator()(int i, int j) { return e_[static_cast<size_t>(i) * cols_ + j]; }
    const cplx& operator()(int i, int j) const { return e_[static_cast<size_t>(i) * cols_ + j]; }

    Matrix transpose() const;
    Matrix conjugate() const;
    Matrix adjoint() const;  // conjugate transpose

    cplx trace() const;
    double norm_fro() const;
    double max_abs() const;
    bool is_finite() const;

    Matrix block(int row0, int col0, int nrows, int ncols) const;
    void set_block(int row0, int col0, const Matrix& b);
    std::vector<cplx> diag() const;

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(cplx s);

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, cplx s) { return a *= s; }
    friend Matrix operator*(cplx s, Matrix a) { return a *= s; }
    friend Matrix operator*(Matrix a, double s) { return a *= cplx(s, 0.0); }
    friend Matrix operator*(double s, Matrix a) { return a *= cplx(s, 0.0); }
    friend Matrix operator*(const Matrix& a, const Matrix& b);

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<cplx> e_;
};

// Frobenius distance ||a - b||_F.
double distance_fro(const Matrix& a, const Matrix& b);

bool is_hermitian(const Matrix& a, double tol);
// True if entries above (strictly) the main diagonal are below tol.
bool is_lower_triangular(const Matrix& a, double tol);
bool is_upper_triangular(const Matrix& a, double tol);

// Determinant by LU with partial pivoting.
cplx determinant(const Matrix& a);
// Inverse by Gauss-Jordan with partial pivoting; throws std::runtime_error
// on (numerical) singularity.
Matrix inverse(const Matrix& a);
// Solve a x = b where a is lower triangular (forward substitution).
Matrix solve_lower_triangular(const Matrix& a, const Matrix& b);

}  // namespace twrb

#endif

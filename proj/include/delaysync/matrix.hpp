#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <vector>

#include "delaysync/errors.hpp"

namespace delaysync {

/// Dense row-major matrix over double or std::complex<double>.
///
/// Dimensions are runtime values; all arithmetic checks conformability and
/// throws DimensionError on mismatch. A Vec is a Matrix with one column.
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    /// Construct from nested initializer lists: Matrix<double>{{1,2},{3,4}}.
    Matrix(std::initializer_list<std::initializer_list<T>> rows) {
        rows_ = rows.size();
        cols_ = rows.begin() == rows.end() ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw DimensionError("ragged initializer list");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
        return m;
    }

    static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }

    static Matrix column(const std::vector<T>& v) {
        Matrix m(v.size(), 1);
        m.data_ = v;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool square() const { return rows_ == cols_; }

    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    /// Linear access for vectors (single column or single row).
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    const std::vector<T>& data() const { return data_; }
    std::vector<T>& data() { return data_; }

    Matrix operator+(const Matrix& o) const {
        require_same_shape(o, "+");
        Matrix r = *this;
        for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] += o.data_[i];
        return r;
    }

    Matrix operator-(const Matrix& o) const {
        require_same_shape(o, "-");
        Matrix r = *this;
        for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] -= o.data_[i];
        return r;
    }

    Matrix operator-() const {
        Matrix r = *this;
        for (auto& v : r.data_) v = -v;
        return r;
    }

    Matrix operator*(const Matrix& o) const {
        if (cols_ != o.rows_)
            throw DimensionError("matrix product: " + shape_str() + " * " + o.shape_str());
        Matrix r(rows_, o.cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < cols_; ++k) {
                const T a = (*this)(i, k);
                if (a == T{}) continue;
                for (std::size_t j = 0; j < o.cols_; ++j) r(i, j) += a * o(k, j);
            }
        return r;
    }

    Matrix operator*(T s) const {
        Matrix r = *this;
        for (auto& v : r.data_) v *= s;
        return r;
    }

    friend Matrix operator*(T s, const Matrix& m) { return m * s; }

    Matrix transpose() const {
        Matrix r(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
        return r;
    }

    bool all_finite() const {
        for (const auto& v : data_)
            if (!is_finite(v)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    /// Euclidean norm of the flattened entries (vector 2-norm / Frobenius).
    double norm() const {
        double s = 0.0;
        for (const auto& v : data_) s += std::norm(std::complex<double>(v));
        return std::sqrt(s);
    }

    /// Copy a block into this matrix with top-left corner (i, j).
    void set_block(std::size_t i, std::size_t j, const Matrix& b) {
        if (i + b.rows_ > rows_ || j + b.cols_ > cols_)
            throw DimensionError("set_block out of range");
        for (std::size_t r = 0; r < b.rows_; ++r)
            for (std::size_t c = 0; c < b.cols_; ++c) (*this)(i + r, j + c) = b(r, c);
    }

    Matrix block(std::size_t i, std::size_t j, std::size_t nr, std::size_t nc) const {
        if (i + nr > rows_ || j + nc > cols_) throw DimensionError("block out of range");
        Matrix r(nr, nc);
        for (std::size_t rr = 0; rr < nr; ++rr)
            for (std::size_t cc = 0; cc < nc; ++cc) r(rr, cc) = (*this)(i + rr, j + cc);
        return r;
    }

    Matrix row(std::size_t i) const { return block(i, 0, 1, cols_); }
    Matrix col(std::size_t j) const { return block(0, j, rows_, 1); }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

private:
    static bool is_finite(double v) { return std::isfinite(v); }
    static bool is_finite(const std::complex<double>& v) {
        return std::isfinite(v.real()) && std::isfinite(v.imag());
    }

    void require_same_shape(const Matrix& o, const char* op) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw DimensionError(std::string("shape mismatch in ") + op + ": " + shape_str() +
                                 " vs " + o.shape_str());
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<std::complex<double>>;
using Vec = RealMatrix; // n x 1 by convention

inline ComplexMatrix to_complex(const RealMatrix& m) {
    ComplexMatrix r(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) r[i] = m[i];
    return r;
}

/// Kronecker product; block (i,j) of the result is a(i,j) * b.
template <typename T>
Matrix<T> kron(const Matrix<T>& a, const Matrix<T>& b) {
    Matrix<T> r(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const T s = a(i, j);
            if (s == T{}) continue;
            for (std::size_t bi = 0; bi < b.rows(); ++bi)
                for (std::size_t bj = 0; bj < b.cols(); ++bj)
                    r(i * b.rows() + bi, j * b.cols() + bj) = s * b(bi, bj);
        }
    return r;
}

/// Solve A X = B by LU with partial pivoting. A must be square.
template <typename T>
Matrix<T> solve(Matrix<T> a, Matrix<T> b) {
    if (!a.square()) throw DimensionError("solve: A not square");
    if (a.rows() != b.rows()) throw DimensionError("solve: rhs row mismatch");
    const std::size_t n = a.rows();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > best) { best = std::abs(a(i, k)); piv = i; }
        if (best == 0.0) throw ConvergenceError("solve: singular matrix");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            for (std::size_t j = 0; j < b.cols(); ++j) std::swap(b(k, j), b(piv, j));
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const T f = a(i, k) / a(k, k);
            if (f == T{}) continue;
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
            for (std::size_t j = 0; j < b.cols(); ++j) b(i, j) -= f * b(k, j);
        }
    }
    Matrix<T> x(n, b.cols());
    for (std::size_t jc = 0; jc < b.cols(); ++jc)
        for (std::size_t ii = n; ii-- > 0;) {
            T s = b(ii, jc);
            for (std::size_t j = ii + 1; j < n; ++j) s -= a(ii, j) * x(j, jc);
            x(ii, jc) = s / a(ii, ii);
        }
    return x;
}

template <typename T>
Matrix<T> inverse(const Matrix<T>& a) {
    return solve(a, Matrix<T>::identity(a.rows()));
}

/// Least-squares solution of A x = b via normal equations with Tikhonov
/// fallback; adequate for the small, well-scaled systems used here.
inline RealMatrix lstsq(const RealMatrix& a, const RealMatrix& b) {
    const RealMatrix at = a.transpose();
    const RealMatrix ata = at * a;
    const RealMatrix atb = at * b;
    try {
        return solve(ata, atb);
    } catch (const ConvergenceError&) {
        // Rank-deficient: fall back to a ridge-regularized solve.
        RealMatrix reg = ata;
        const double eps = 1e-12 * std::max(1.0, ata.max_abs());
        for (std::size_t i = 0; i < reg.rows(); ++i) reg(i, i) += eps;
        return solve(reg, atb);
    }
}

/// Numeric rank via Gaussian elimination with full pivoting.
template <typename T>
std::size_t numeric_rank(Matrix<T> m, double tol = 1e-8) {
    const std::size_t rows = m.rows(), cols = m.cols();
    const double scale = std::max(1.0, m.max_abs());
    std::size_t rank = 0;
    std::size_t r = 0;
    for (std::size_t c = 0; r < rows && c < cols; ++c) {
        std::size_t pr = r, pc = c;
        double best = 0.0;
        for (std::size_t i = r; i < rows; ++i)
            for (std::size_t j = c; j < cols; ++j)
                if (std::abs(m(i, j)) > best) { best = std::abs(m(i, j)); pr = i; pc = j; }
        if (best <= tol * scale) break;
        for (std::size_t j = 0; j < cols; ++j) std::swap(m(r, j), m(pr, j));
        for (std::size_t i = 0; i < rows; ++i) std::swap(m(i, c), m(i, pc));
        for (std::size_t i = r + 1; i < rows; ++i) {
            const T f = m(i, c) / m(r, c);
            for (std::size_t j = c; j < cols; ++j) m(i, j) -= f * m(r, j);
        }
        ++rank;
        ++r;
    }
    return rank;
}

inline RealMatrix matrix_power(const RealMatrix& a, unsigned p) {
    RealMatrix r = RealMatrix::identity(a.rows());
    for (unsigned i = 0; i < p; ++i) r = r * a;
    return r;
}

} // namespace delaysync

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kb2text/error.hpp"

namespace kb2text {

// Runtime precision is a build-time switch; tests and gradient checks
// always build with 64-bit.
#ifdef KB2TEXT_REAL_FLOAT
using real = float;
#else
using real = double;
#endif

// Dense row-major matrix. Column vectors are n x 1.
class Matrix {
public:
    Matrix() = default;
    Matrix(size_t rows, size_t cols, real fill = real(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix column(const std::vector<real>& v) {
        Matrix m(v.size(), 1);
        m.data_ = v;
        return m;
    }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    real& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
    real operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }
    real& operator[](size_t i) { return data_[i]; }
    real operator[](size_t i) const { return data_[i]; }

    real* data() { return data_.data(); }
    const real* data() const { return data_.data(); }
    real* row(size_t r) { return data_.data() + r * cols_; }
    const real* row(size_t r) const { return data_.data() + r * cols_; }

    void fill(real v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(real(0)); }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<real> data_;
};

using Vector = std::vector<real>;

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

// y = M x for a column vector x (length m.cols()).
Vector matvec(const Matrix& m, const Vector& x);
// y = M^T x, used in backward passes.
Vector matvec_transposed(const Matrix& m, const Vector& x);
// acc += a * b^T (outer product of column vectors).
void add_outer(Matrix& acc, const Vector& a, const Vector& b);

void axpy(Vector& y, real alpha, const Vector& x);  // y += alpha * x
real dot(const Vector& a, const Vector& b);
real norm(const Vector& v);

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

}  // namespace kb2text

#include "kb2text/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace kb2text {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " * " + b.shape_str());
    }
    Matrix out(a.rows(), b.cols());
    for (size_t i = 0; i < a.rows(); ++i) {
        const real* arow = a.row(i);
        real* orow = out.row(i);
        for (size_t k = 0; k < a.cols(); ++k) {
            const real aik = arow[k];
            if (aik == real(0)) continue;
            const real* brow = b.row(k);
            for (size_t j = 0; j < b.cols(); ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (size_t i = 0; i < m.rows(); ++i) {
        for (size_t j = 0; j < m.cols(); ++j) {
            out(j, i) = m(i, j);
        }
    }
    return out;
}

Vector matvec(const Matrix& m, const Vector& x) {
    if (m.cols() != x.size()) {
        throw ShapeError("matvec: " + m.shape_str() + " * vector of length " +
                         std::to_string(x.size()));
    }
    Vector y(m.rows(), real(0));
    for (size_t i = 0; i < m.rows(); ++i) {
        const real* row = m.row(i);
        real acc = real(0);
        for (size_t j = 0; j < m.cols(); ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
    return y;
}

Vector matvec_transposed(const Matrix& m, const Vector& x) {
    if (m.rows() != x.size()) {
        throw ShapeError("matvec_transposed: " + m.shape_str() + "^T * vector of length " +
                         std::to_string(x.size()));
    }
    Vector y(m.cols(), real(0));
    for (size_t i = 0; i < m.rows(); ++i) {
        const real xi = x[i];
        if (xi == real(0)) continue;
        const real* row = m.row(i);
        for (size_t j = 0; j < m.cols(); ++j) y[j] += xi * row[j];
    }
    return y;
}

void add_outer(Matrix& acc, const Vector& a, const Vector& b) {
    if (acc.rows() != a.size() || acc.cols() != b.size()) {
        throw ShapeError("add_outer: " + acc.shape_str() + " += outer(" +
                         std::to_string(a.size()) + ", " + std::to_string(b.size()) + ")");
    }
    for (size_t i = 0; i < a.size(); ++i) {
        const real ai = a[i];
        if (ai == real(0)) continue;
        real* row = acc.row(i);
        for (size_t j = 0; j < b.size(); ++j) row[j] += ai * b[j];
    }
}

void axpy(Vector& y, real alpha, const Vector& x) {
    if (y.size() != x.size()) {
        throw ShapeError("axpy: length mismatch " + std::to_string(y.size()) + " vs " +
                         std::to_string(x.size()));
    }
    for (size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

real dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    real acc = real(0);
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

real norm(const Vector& v) { return std::sqrt(dot(v, v)); }

bool all_finite(const Matrix& m) {
    for (size_t i = 0; i < m.size(); ++i) {
        if (!std::isfinite(m[i])) return false;
    }
    return true;
}

bool all_finite(const Vector& v) {
    for (real x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace kb2text

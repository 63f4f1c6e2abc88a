#ifndef MTE_MATRIX_HPP
#define MTE_MATRIX_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "mte/error.hpp"

namespace mte {

// Dense row-major real64 matrix. A 1xN matrix doubles as a row vector.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    std::size_t size() const { return data.size(); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// C = A * B. A is n x k, B is k x m. The k-major loop keeps both B rows and C
// rows contiguous so the inner loop vectorizes.
inline void matmul_into(Matrix& out, const Matrix& a, const Matrix& b) {
    require(a.cols == b.rows, ErrKind::dimension, "matmul: inner dimensions differ");
    out.rows = a.rows;
    out.cols = b.cols;
    out.data.assign(a.rows * b.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
        }
    }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix out;
    matmul_into(out, a, b);
    return out;
}

// out += A^T * B where A is n x k, B is n x m, out is k x m.
inline void matmul_at_b_accum(Matrix& out, const Matrix& a, const Matrix& b) {
    require(a.rows == b.rows, ErrKind::dimension, "matmul_at_b: row counts differ");
    require(out.rows == a.cols && out.cols == b.cols, ErrKind::dimension, "matmul_at_b: bad out shape");
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        const double* brow = b.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            double* orow = out.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
        }
    }
}

// out = A * B^T where A is n x m, B is k x m, out is n x k.
inline void matmul_a_bt_into(Matrix& out, const Matrix& a, const Matrix& b) {
    require(a.cols == b.cols, ErrKind::dimension, "matmul_a_bt: column counts differ");
    out.rows = a.rows;
    out.cols = b.rows;
    out.data.assign(a.rows * b.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t k = 0; k < b.rows; ++k) {
            const double* brow = b.row(k);
            double s = 0.0;
            for (std::size_t j = 0; j < a.cols; ++j) s += arow[j] * brow[j];
            orow[k] = s;
        }
    }
}

}  // namespace mte

#endif

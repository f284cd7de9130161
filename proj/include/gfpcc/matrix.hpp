#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace gfpcc {

// Dense row-major matrix of doubles. Rows are embeddings, so most access goes
// through row().
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> flat() { return data_; }
    std::span<const double> flat() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

// out = W * x  (W is d x d, x and out are column vectors stored as rows)
inline void matvec(const Matrix& w, std::span<const double> x, std::span<double> out) {
    for (std::size_t a = 0; a < w.rows(); ++a) out[a] = dot(w.row(a), x);
}

// out += W^T * x
inline void matvec_transposed_add(const Matrix& w, std::span<const double> x, std::span<double> out) {
    for (std::size_t a = 0; a < w.rows(); ++a) axpy(x[a], w.row(a), out);
}

inline bool is_identity(const Matrix& w) {
    if (w.rows() != w.cols()) return false;
    for (std::size_t r = 0; r < w.rows(); ++r) {
        for (std::size_t c = 0; c < w.cols(); ++c) {
            if (w(r, c) != (r == c ? 1.0 : 0.0)) return false;
        }
    }
    return true;
}

inline double squared_norm(std::span<const double> x) { return dot(x, x); }

}  // namespace gfpcc

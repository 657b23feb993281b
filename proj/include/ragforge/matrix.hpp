#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace ragforge {

// Dense row-major matrix. Deliberately minimal: the training math wants
// explicit loops with a fixed summation order, not a BLAS wrapper.
template <typename T>
class Mat {
public:
    Mat() = default;
    Mat(size_t rows, size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* row(size_t r) { return data_.data() + r * cols_; }
    const T* row(size_t r) const { return data_.data() + r * cols_; }

    std::span<T> row_span(size_t r) { return {row(r), cols_}; }
    std::span<const T> row_span(size_t r) const { return {row(r), cols_}; }

    T& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool same_shape(const Mat& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    friend bool operator==(const Mat& a, const Mat& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<T> data_;
};

using MatD = Mat<double>;
using MatF = Mat<float>;

// y = M x, accumulated in double regardless of T.
template <typename T>
inline void matvec(const Mat<T>& m, std::span<const double> x, std::span<double> y) {
    if (x.size() != m.cols() || y.size() != m.rows())
        throw std::invalid_argument("matvec: shape mismatch");
    for (size_t r = 0; r < m.rows(); ++r) {
        const T* row = m.row(r);
        double acc = 0.0;
        for (size_t c = 0; c < m.cols(); ++c) acc += static_cast<double>(row[c]) * x[c];
        y[r] = acc;
    }
}

// y = M^T x.
template <typename T>
inline void matvec_t(const Mat<T>& m, std::span<const double> x, std::span<double> y) {
    if (x.size() != m.rows() || y.size() != m.cols())
        throw std::invalid_argument("matvec_t: shape mismatch");
    for (size_t c = 0; c < m.cols(); ++c) y[c] = 0.0;
    for (size_t r = 0; r < m.rows(); ++r) {
        const T* row = m.row(r);
        const double xr = x[r];
        for (size_t c = 0; c < m.cols(); ++c) y[c] += static_cast<double>(row[c]) * xr;
    }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double dot(std::span<const double> a, std::span<const float> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * static_cast<double>(b[i]);
    return acc;
}

inline double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

}  // namespace ragforge

/// @file tensor.hpp
/// @brief Dense row-major double tensor with runtime rank.
///
/// All fields in this library (densities, fluxes, dual variables) are small
/// dense arrays laid out row-major over (t, x1, ..., xD). Reductions (dot,
/// norms) always run in flat index order so results are independent of any
/// internal parallelism and reproducible bit-for-bit.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfp {

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, double value = 0.0)
        : shape_(std::move(shape)) {
        std::size_t n = 1;
        for (int s : shape_) {
            if (s < 0) throw std::invalid_argument("Tensor: negative axis extent");
            n *= static_cast<std::size_t>(s);
        }
        data_.assign(n, value);  // n may be 0 (e.g. a face array of a 1-cell axis)
    }

    bool empty() const { return data_.empty(); }
    int rank() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Multi-index access (slow path, used by tests and setup code).
    double& at(std::initializer_list<int> idx) { return data_[offset(idx)]; }
    double at(std::initializer_list<int> idx) const { return data_[offset(idx)]; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    std::size_t offset(std::initializer_list<int> idx) const {
        if (static_cast<int>(idx.size()) != rank())
            throw std::invalid_argument("Tensor::at: wrong index rank");
        std::size_t off = 0;
        int a = 0;
        for (int i : idx) {
            off = off * static_cast<std::size_t>(shape_[a]) + static_cast<std::size_t>(i);
            ++a;
        }
        return off;
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

/// Loop decomposition for per-axis stencils: flat = (o*n + j)*inner + r.
struct AxisSpan {
    std::size_t outer = 1;
    std::size_t n = 1;
    std::size_t inner = 1;
};

inline AxisSpan axis_span(const std::vector<int>& shape, int axis) {
    AxisSpan s;
    for (int a = 0; a < static_cast<int>(shape.size()); ++a) {
        const auto e = static_cast<std::size_t>(shape[static_cast<std::size_t>(a)]);
        if (a < axis) s.outer *= e;
        else if (a == axis) s.n = e;
        else s.inner *= e;
    }
    return s;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(where) + ": shape mismatch");
}

// ---------------------------------------------------------------------------
// Reductions and elementwise helpers. Flat order, no reordering.
// ---------------------------------------------------------------------------

inline double dot(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "dot");
    double s = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) s += pa[i] * pb[i];
    return s;
}

inline double sum(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
    return s;
}

inline double sum_squares(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * a[i];
    return s;
}

inline double max_abs(const Tensor& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

inline double min_value(const Tensor& a) {
    double m = a.size() ? a[0] : 0.0;
    for (std::size_t i = 1; i < a.size(); ++i) m = std::min(m, a[i]);
    return m;
}

inline double max_value(const Tensor& a) {
    double m = a.size() ? a[0] : 0.0;
    for (std::size_t i = 1; i < a.size(); ++i) m = std::max(m, a[i]);
    return m;
}

/// y += alpha * x
inline void axpy(double alpha, const Tensor& x, Tensor& y) {
    check_same_shape(x, y, "axpy");
    double* py = y.data();
    const double* px = x.data();
    for (std::size_t i = 0; i < x.size(); ++i) py[i] += alpha * px[i];
}

/// y = a*u + b*v (shapes must agree)
inline Tensor linear_combination(double a, const Tensor& u, double b, const Tensor& v) {
    check_same_shape(u, v, "linear_combination");
    Tensor out(u.shape());
    double* po = out.data();
    const double* pu = u.data();
    const double* pv = v.data();
    for (std::size_t i = 0; i < u.size(); ++i) po[i] = a * pu[i] + b * pv[i];
    return out;
}

}  // namespace mfp

/// @file dense.hpp
/// @brief Minimal dense linear algebra for the small reference solvers.

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mfp::detail {

/// Solve A x = b by Gaussian elimination with partial pivoting.
/// A is row-major n x n and is destroyed; b is overwritten with x.
inline void dense_solve(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
    if (a.size() != n * n || b.size() != n)
        throw std::invalid_argument("dense_solve: dimension mismatch");
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::abs(a[col * n + col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double v = std::abs(a[r * n + col]);
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best == 0.0) throw std::runtime_error("dense_solve: singular matrix");
        if (piv != col) {
            for (std::size_t c = col; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
            std::swap(b[piv], b[col]);
        }
        const double d = a[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / d;
            if (f == 0.0) continue;
            a[r * n + col] = 0.0;
            for (std::size_t c = col + 1; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t ri = n; ri-- > 0;) {
        double acc = b[ri];
        for (std::size_t c = ri + 1; c < n; ++c) acc -= a[ri * n + c] * b[c];
        b[ri] = acc / a[ri * n + ri];
    }
}

}  // namespace mfp::detail

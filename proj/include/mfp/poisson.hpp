/// @file poisson.hpp
/// @brief Exact spectral solvers for the projection-step Poisson systems.
///
/// Both projection variants diagonalize in a separable cosine basis:
///
///   planning:  Lap Psi^i = lambda^i Psi^i with
///              lambda^i = -4 sum_d n_d^2 sin^2((i_d-1) pi / (2 n_d)),
///              per-axis factors sqrt(1/n) (constant mode) or sqrt(2/n) times
///              cos((j-1/2)(i-1) pi / n). lambda^(1,..,1) = 0: the system is
///              singular with the constants as null space and is solved by the
///              zero-mean pseudo-inverse.
///
///   game:      the time axis uses quarter-shifted frequencies,
///              factor sqrt(4/(2 n0+1)) * cos((j-1/2)(i-1/2) pi / (n0+1/2)),
///              time eigenvalue part -4 n0^2 sin^2((i-1/2) pi / (2 (n0+1/2))).
///              Every lambda^i is strictly negative; the assembled operator
///              D0 D0^T + sum_d Dd Dd^T acts as -lambda^i on mode i and is
///              invertible.
///
/// Per-axis transforms run through a recursive O(n log n) split when n is a
/// power of two and through the explicit orthonormal cosine matrix otherwise
/// (the quarter-shifted time basis always uses the matrix path). The two
/// paths agree to machine precision and can be forced for testing.

#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>

#include "mfp/grid.hpp"
#include "mfp/tensor.hpp"

namespace mfp {

enum class PoissonVariant { Mfp, Mfg };
enum class TransformPath { Auto, Direct, Fast };

namespace detail {

constexpr double kPi = 3.14159265358979323846;

inline bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

/// Recursive split tables: half_sec[l][j] = 1 / (2 cos(pi (2j+1) / (2 m)))
/// for the level-l sub-size m = n >> l.
struct FastDctTables {
    int n = 0;
    std::vector<std::vector<double>> half_sec;

    explicit FastDctTables(int size) : n(size) {
        for (int m = n; m >= 2; m /= 2) {
            std::vector<double> t(static_cast<std::size_t>(m / 2));
            for (int j = 0; j < m / 2; ++j)
                t[static_cast<std::size_t>(j)] = 0.5 / std::cos(kPi * (2 * j + 1) / (2.0 * m));
            half_sec.push_back(std::move(t));
        }
    }
};

/// Unnormalized DCT-II in place: x_k <- sum_j x_j cos(pi (2j+1) k / (2n)).
inline void fast_dct2(double* x, double* tmp, int n, const FastDctTables& t, int level) {
    if (n == 1) return;
    const int m = n / 2;
    const std::vector<double>& hs = t.half_sec[static_cast<std::size_t>(level)];
    for (int j = 0; j < m; ++j) {
        tmp[j] = x[j] + x[n - 1 - j];
        tmp[m + j] = (x[j] - x[n - 1 - j]) * hs[static_cast<std::size_t>(j)];
    }
    fast_dct2(tmp, x, m, t, level + 1);
    fast_dct2(tmp + m, x, m, t, level + 1);
    for (int k = 0; k < m; ++k) {
        x[2 * k] = tmp[k];
        x[2 * k + 1] = tmp[m + k] + (k + 1 < m ? tmp[m + k + 1] : 0.0);
    }
}

/// Unnormalized DCT-III in place with the halved first coefficient:
/// x_j <- x_0/2 + sum_{k>=1} x_k cos(pi (2j+1) k / (2n)).
inline void fast_dct3(double* x, double* tmp, int n, const FastDctTables& t, int level) {
    if (n == 1) {
        x[0] *= 0.5;
        return;
    }
    const int m = n / 2;
    const std::vector<double>& hs = t.half_sec[static_cast<std::size_t>(level)];
    tmp[m] = 2.0 * x[1];
    for (int r = 1; r < m; ++r) tmp[m + r] = x[2 * r + 1] + x[2 * r - 1];
    for (int k = 0; k < m; ++k) tmp[k] = x[2 * k];
    fast_dct3(tmp, x, m, t, level + 1);
    fast_dct3(tmp + m, x, m, t, level + 1);
    for (int j = 0; j < m; ++j) {
        const double o = tmp[m + j] * hs[static_cast<std::size_t>(j)];
        x[j] = tmp[j] + o;
        x[n - 1 - j] = tmp[j] - o;
    }
}

/// One axis of the separable transform. Analysis maps grid values to basis
/// coefficients; synthesis is its transpose (the basis is orthonormal).
class AxisTransform {
public:
    AxisTransform(int n, bool quarter_shift, TransformPath path) : n_(n) {
        if (quarter_shift || path == TransformPath::Direct ||
            (path == TransformPath::Auto && !is_pow2(n))) {
            build_matrix(quarter_shift);
        } else {
            if (!is_pow2(n))
                throw std::invalid_argument("AxisTransform: fast path needs a power-of-two size");
            tables_ = std::make_unique<FastDctTables>(n);
            s0_ = std::sqrt(1.0 / n);
            s1_ = std::sqrt(2.0 / n);
        }
    }

    int size() const { return n_; }

    void analyze(double* x, double* tmp) const {
        if (tables_) {
            fast_dct2(x, tmp, n_, *tables_, 0);
            x[0] *= s0_;
            for (int k = 1; k < n_; ++k) x[k] *= s1_;
        } else {
            matvec(fwd_, x, tmp);
        }
    }

    void synthesize(double* x, double* tmp) const {
        if (tables_) {
            x[0] *= 2.0 * s0_;
            for (int k = 1; k < n_; ++k) x[k] *= s1_;
            fast_dct3(x, tmp, n_, *tables_, 0);
        } else {
            matvec(inv_, x, tmp);
        }
    }

private:
    void build_matrix(bool quarter_shift) {
        fwd_.assign(static_cast<std::size_t>(n_) * n_, 0.0);
        inv_.assign(static_cast<std::size_t>(n_) * n_, 0.0);
        for (int i = 1; i <= n_; ++i) {
            double scale, freq;
            if (quarter_shift) {
                scale = std::sqrt(4.0 / (2.0 * n_ + 1.0));
                freq = (i - 0.5) * kPi / (n_ + 0.5);
            } else {
                scale = std::sqrt((i == 1 ? 1.0 : 2.0) / n_);
                freq = (i - 1.0) * kPi / n_;
            }
            for (int j = 1; j <= n_; ++j) {
                const double v = scale * std::cos((j - 0.5) * freq);
                fwd_[static_cast<std::size_t>(i - 1) * n_ + (j - 1)] = v;
                inv_[static_cast<std::size_t>(j - 1) * n_ + (i - 1)] = v;
            }
        }
    }

    void matvec(const std::vector<double>& mat, double* x, double* tmp) const {
        for (int i = 0; i < n_; ++i) {
            const double* row = mat.data() + static_cast<std::size_t>(i) * n_;
            double acc = 0.0;
            for (int j = 0; j < n_; ++j) acc += row[j] * x[j];
            tmp[i] = acc;
        }
        for (int i = 0; i < n_; ++i) x[i] = tmp[i];
    }

    int n_;
    std::unique_ptr<FastDctTables> tables_;
    double s0_ = 0.0, s1_ = 0.0;
    std::vector<double> fwd_, inv_;  // matrix path only
};

}  // namespace detail

// ---------------------------------------------------------------------------
// SpectralPlan
// ---------------------------------------------------------------------------

class SpectralPlan {
public:
    SpectralPlan(const GridShape& shape, PoissonVariant variant,
                 TransformPath path = TransformPath::Auto)
        : shape_(shape), variant_(variant) {
        for (int a = 0; a < shape.axes(); ++a) {
            const bool quarter = variant == PoissonVariant::Mfg && a == 0;
            axes_.emplace_back(shape.n(a), quarter, path);
        }
        build_eigenvalues();
    }

    const GridShape& shape() const { return shape_; }
    PoissonVariant variant() const { return variant_; }
    const Tensor& eigenvalues() const { return eigenvalues_; }

    /// Basis coefficients of a central field (orthonormal analysis).
    Tensor analyze(const CentralField& u) const { return apply(u, true); }

    /// Central field from basis coefficients (orthonormal synthesis).
    CentralField synthesize(const Tensor& coeffs) const { return apply(coeffs, false); }

private:
    Tensor apply(const Tensor& in, bool forward) const {
        if (in.shape() != shape_.central_shape())
            throw std::invalid_argument("SpectralPlan: central shape mismatch");
        Tensor out = in;
        std::vector<double> pencil, tmp;
        for (int axis = 0; axis < shape_.axes(); ++axis) {
            const detail::AxisTransform& tr = axes_[static_cast<std::size_t>(axis)];
            const AxisSpan s = axis_span(out.shape(), axis);
            pencil.resize(s.n);
            tmp.resize(s.n);
            double* base = out.data();
            for (std::size_t o = 0; o < s.outer; ++o) {
                for (std::size_t r = 0; r < s.inner; ++r) {
                    double* p = base + o * s.n * s.inner + r;
                    if (s.inner == 1) {
                        if (forward) tr.analyze(p, tmp.data());
                        else tr.synthesize(p, tmp.data());
                    } else {
                        for (std::size_t j = 0; j < s.n; ++j) pencil[j] = p[j * s.inner];
                        if (forward) tr.analyze(pencil.data(), tmp.data());
                        else tr.synthesize(pencil.data(), tmp.data());
                        for (std::size_t j = 0; j < s.n; ++j) p[j * s.inner] = pencil[j];
                    }
                }
            }
        }
        return out;
    }

    void build_eigenvalues() {
        eigenvalues_ = Tensor(shape_.central_shape());
        const int axes = shape_.axes();
        std::vector<std::vector<double>> per_axis(static_cast<std::size_t>(axes));
        for (int a = 0; a < axes; ++a) {
            const int n = shape_.n(a);
            per_axis[static_cast<std::size_t>(a)].resize(static_cast<std::size_t>(n));
            for (int i = 1; i <= n; ++i) {
                double s;
                if (variant_ == PoissonVariant::Mfg && a == 0)
                    s = std::sin((i - 0.5) * detail::kPi / (2.0 * (n + 0.5)));
                else
                    s = std::sin((i - 1.0) * detail::kPi / (2.0 * n));
                per_axis[static_cast<std::size_t>(a)][static_cast<std::size_t>(i - 1)] =
                    -4.0 * static_cast<double>(n) * n * s * s;
            }
        }
        std::vector<int> idx(static_cast<std::size_t>(axes), 0);
        for (std::size_t flat = 0; flat < eigenvalues_.size(); ++flat) {
            double lam = 0.0;
            for (int a = 0; a < axes; ++a)
                lam += per_axis[static_cast<std::size_t>(a)][static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
            eigenvalues_[flat] = lam;
            for (int a = axes - 1; a >= 0; --a) {
                if (++idx[static_cast<std::size_t>(a)] < shape_.n(a)) break;
                idx[static_cast<std::size_t>(a)] = 0;
            }
        }
    }

    GridShape shape_;
    PoissonVariant variant_;
    std::vector<detail::AxisTransform> axes_;
    Tensor eigenvalues_;
};

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

/// Zero-mean solution of -Lap(phi) = rhs (planning variant). The constant
/// mode of rhs is projected out; if its coefficient exceeds
/// 1e-8 * ||rhs||_F the optional warning counter is incremented (this is a
/// rounding-level compatibility residue, never a hard failure).
inline CentralField solve_neumann(const CentralField& rhs, const SpectralPlan& plan,
                                  long* compat_warnings = nullptr) {
    if (plan.variant() != PoissonVariant::Mfp)
        throw std::invalid_argument("solve_neumann: needs a planning-variant plan");
    Tensor coeffs = plan.analyze(rhs);
    if (compat_warnings) {
        const double norm = std::sqrt(sum_squares(rhs));
        if (std::abs(coeffs[0]) > 1e-8 * norm) ++*compat_warnings;
    }
    coeffs[0] = 0.0;  // mode (1,...,1): lambda = 0, zero-mean pseudo-inverse
    const Tensor& lam = plan.eigenvalues();
    for (std::size_t i = 1; i < coeffs.size(); ++i) coeffs[i] /= -lam[i];
    return plan.synthesize(coeffs);
}

/// Unique solution of (D0 D0^T + sum_d Dd Dd^T) phi = rhs (game variant);
/// the operator acts as -lambda^i > 0 on every mode.
inline CentralField solve_mfg(const CentralField& rhs, const SpectralPlan& plan) {
    if (plan.variant() != PoissonVariant::Mfg)
        throw std::invalid_argument("solve_mfg: needs a game-variant plan");
    Tensor coeffs = plan.analyze(rhs);
    const Tensor& lam = plan.eigenvalues();
    for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] /= -lam[i];
    return plan.synthesize(coeffs);
}

// ---------------------------------------------------------------------------
// Closed-form operator-norm sweep
// ---------------------------------------------------------------------------

struct OperatorNormEstimates {
    double norm_grad_lapinv_div = 0.0;  ///< max_{d,i} sqrt(sigma_{d,i}^2 / |lambda^i|)
    double norm_grad_lapinv = 0.0;      ///< max_{i != 1} 1 / |lambda^i|
};

/// Exhaustive sweep over the planning eigenmodes evaluating the closed-form
/// per-mode ratios sigma^{d,i} = -2 n_d sin((i_d-1) pi / (2 n_d)),
/// |lambda^i| = sum_d sigma^2. The first value is the spectral norm of
/// Grad o Lap^-1 o Div (attained when a single axis is active, where it
/// equals one); the second is the per-mode amplification bound used for
/// Grad o Lap^-1 in the step-shrinkage analysis.
inline OperatorNormEstimates operator_norm_checks(const GridShape& shape) {
    for (int a = 0; a < shape.axes(); ++a)
        if (shape.n(a) < 2)
            throw std::invalid_argument("operator_norm_checks: every n_d must exceed 1");
    const int axes = shape.axes();
    std::vector<std::vector<double>> sig2(static_cast<std::size_t>(axes));
    for (int a = 0; a < axes; ++a) {
        const int n = shape.n(a);
        for (int i = 1; i <= n; ++i) {
            const double s = 2.0 * n * std::sin((i - 1.0) * detail::kPi / (2.0 * n));
            sig2[static_cast<std::size_t>(a)].push_back(s * s);
        }
    }
    OperatorNormEstimates out;
    std::vector<int> idx(static_cast<std::size_t>(axes), 0);
    const std::size_t total = shape.central_size();
    for (std::size_t flat = 0; flat < total; ++flat) {
        double lam_abs = 0.0;
        for (int a = 0; a < axes; ++a)
            lam_abs += sig2[static_cast<std::size_t>(a)][static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
        if (lam_abs > 0.0) {
            out.norm_grad_lapinv = std::max(out.norm_grad_lapinv, 1.0 / lam_abs);
            for (int a = 0; a < axes; ++a) {
                const double s2 = sig2[static_cast<std::size_t>(a)][static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
                if (s2 > 0.0)
                    out.norm_grad_lapinv_div =
                        std::max(out.norm_grad_lapinv_div, std::sqrt(s2 / lam_abs));
            }
        }
        for (int a = axes - 1; a >= 0; --a) {
            if (++idx[static_cast<std::size_t>(a)] < shape.n(a)) break;
            idx[static_cast<std::size_t>(a)] = 0;
        }
    }
    return out;
}

}  // namespace mfp

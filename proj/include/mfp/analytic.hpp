/// @file analytic.hpp
/// @brief Closed-form 1D transport reference solution and small reference
///        solvers used as independent cross-checks throughout the test suite.
///
/// The reference problem moves rho0(x) = x + 1/2 to rho1(x) = 1 on [0,1].
/// Its optimal density/flux pair is known in closed form and the squared
/// Wasserstein-2 distance is exactly 1/120. Note the kinetic functional
/// integral(|m*|^2 / (2 rho*)) evaluates to 1/240 = W2^2 / 2; reported W2^2
/// estimates therefore double the kinetic objective.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mfp/detail/dense.hpp"
#include "mfp/grid.hpp"

namespace mfp::analytic {

namespace detail {
inline void check_domain(double t, double x) {
    if (!(t >= 0.0 && t <= 1.0 && x >= 0.0 && x <= 1.0))
        throw std::domain_error("analytic: (t, x) outside [0,1]^2");
}
}  // namespace detail

/// rho*(t, x). The printed t > 0 branch is 0/0 at t = 0; below t = 1e-6 the
/// endpoint form x + 1/2 is used instead (the limit matches to that accuracy).
inline double exact_density(double t, double x) {
    detail::check_domain(t, x);
    if (t < 1e-6) return x + 0.5;
    const double s = std::sqrt(2.0 * t * x + (0.5 * t - 1.0) * (0.5 * t - 1.0));
    return (s + t - 1.0) / (t * s);
}

/// m*(t, x); zero at both spatial walls for every t.
inline double exact_flux(double t, double x) {
    detail::check_domain(t, x);
    if (t < 1e-6) return 0.25 * x * (x - 1.0) * (2.0 * x + 1.0);
    const double s = std::sqrt(2.0 * t * x + (0.5 * t - 1.0) * (0.5 * t - 1.0));
    const double t3 = t * t * t;
    return x / (t * t) - (3.0 - t) / (2.0 * t3) * s -
           (t - 1.0) * (t * t - 4.0) / (8.0 * t3) / s - (3.0 * t - 4.0) / (2.0 * t3);
}

/// Squared Wasserstein-2 distance between the reference endpoints.
inline double exact_w2sq() { return 1.0 / 120.0; }

// ---------------------------------------------------------------------------
// Reference solvers
// ---------------------------------------------------------------------------

inline std::vector<double> flatten(const StaggeredFieldSet& f) {
    std::vector<double> x;
    x.reserve(f.total_size());
    x.insert(x.end(), f.P.data(), f.P.data() + f.P.size());
    for (const Tensor& m : f.M) x.insert(x.end(), m.data(), m.data() + m.size());
    return x;
}

inline StaggeredFieldSet unflatten(const std::vector<double>& x, const GridShape& g,
                                   FieldLayout layout) {
    StaggeredFieldSet f = StaggeredFieldSet::zeros(g, layout);
    std::size_t off = 0;
    for (std::size_t i = 0; i < f.P.size(); ++i) f.P[i] = x[off++];
    for (Tensor& m : f.M)
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = x[off++];
    return f;
}

/// Euclidean projection onto the discrete continuity constraint, computed by
/// assembling the constraint matrix and solving the KKT system
/// [[I, A^T], [A, 0]] [x; nu] = [x0; b] densely. Reference path for the
/// spectral projection; capped at 2000 unknowns.
inline StaggeredFieldSet dense_projection_oracle(const StaggeredFieldSet& f,
                                                 const BoundaryData& bnd) {
    const GridShape& g = f.shape;
    const std::size_t nu = f.total_size();
    if (nu > 2000) throw std::invalid_argument("dense_projection_oracle: more than 2000 unknowns");
    // The planning constraint rows sum to zero (flux columns telescope), so
    // one row is redundant and must go or the KKT matrix is singular. The
    // dropped row is implied by the others because the right-hand side sums
    // to zero for balanced endpoint masses.
    const std::size_t nc = g.central_size() - (f.layout == FieldLayout::Mfp ? 1 : 0);
    const std::size_t dim = nu + nc;

    // Constraint rows: divergence applied to unit fields, b = -div_term.
    std::vector<double> kkt(dim * dim, 0.0);
    for (std::size_t i = 0; i < nu; ++i) kkt[i * dim + i] = 1.0;
    std::vector<double> unit(nu, 0.0);
    for (std::size_t col = 0; col < nu; ++col) {
        unit[col] = 1.0;
        const CentralField dcol = divergence(unflatten(unit, g, f.layout));
        unit[col] = 0.0;
        for (std::size_t row = 0; row < nc; ++row) {
            kkt[(nu + row) * dim + col] = dcol[row];
            kkt[col * dim + (nu + row)] = dcol[row];
        }
    }

    const CentralField rd = bnd.div_term();
    std::vector<double> rhs = flatten(f);
    rhs.resize(dim);
    for (std::size_t row = 0; row < nc; ++row) rhs[nu + row] = -rd[row];

    mfp::detail::dense_solve(kkt, rhs, dim);
    rhs.resize(nu);
    return unflatten(rhs, g, f.layout);
}

/// Central finite differences of a scalar field functional, coordinate by
/// coordinate. Exact for linear functionals; O(h^2) otherwise.
inline StaggeredFieldSet finite_diff_gradient_oracle(
    const std::function<double(const StaggeredFieldSet&)>& f, const StaggeredFieldSet& at,
    double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_gradient_oracle: h must be > 0");
    StaggeredFieldSet grad = StaggeredFieldSet::zeros(at.shape, at.layout);
    StaggeredFieldSet probe = at;
    auto diff_entry = [&](Tensor& pt, Tensor& gt, std::size_t i) {
        const double saved = pt[i];
        pt[i] = saved + h;
        const double fp = f(probe);
        pt[i] = saved - h;
        const double fm = f(probe);
        pt[i] = saved;
        gt[i] = (fp - fm) / (2.0 * h);
    };
    for (std::size_t i = 0; i < probe.P.size(); ++i) diff_entry(probe.P, grad.P, i);
    for (std::size_t d = 0; d < probe.M.size(); ++d)
        for (std::size_t i = 0; i < probe.M[d].size(); ++i)
            diff_entry(probe.M[d], grad.M[d], i);
    return grad;
}

// ---------------------------------------------------------------------------
// Sampling helpers for the reference solution
// ---------------------------------------------------------------------------

/// Exact fields sampled at the staggered points of `g` (1D space only):
/// density at interior time faces, flux at interior space faces.
inline StaggeredFieldSet sample_exact_fields(const GridShape& g) {
    if (g.dim() != 1) throw std::invalid_argument("sample_exact_fields: 1D space only");
    StaggeredFieldSet f = StaggeredFieldSet::zeros(g);
    const int n0 = g.n(0), n1 = g.n(1);
    for (int k = 1; k < n0; ++k)
        for (int j = 1; j <= n1; ++j)
            f.P.at({k - 1, j - 1}) = exact_density(k * g.delta(0), (j - 0.5) * g.delta(1));
    for (int i = 1; i <= n0; ++i)
        for (int k = 1; k < n1; ++k)
            f.M[0].at({i - 1, k - 1}) = exact_flux((i - 0.5) * g.delta(0), k * g.delta(1));
    return f;
}

/// Endpoint samples of the reference problem at spatial cell centers.
inline SpatialField sample_rho0(const GridShape& g) {
    SpatialField v(g.spatial_shape());
    for (int j = 1; j <= g.n(1); ++j) v[static_cast<std::size_t>(j - 1)] = (j - 0.5) * g.delta(1) + 0.5;
    return v;
}

inline SpatialField sample_rho1(const GridShape& g) {
    return SpatialField(g.spatial_shape(), 1.0);
}

}  // namespace mfp::analytic

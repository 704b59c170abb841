/// @file multiscale.hpp
/// @brief Grid-transfer operators and the multilevel / multigrid drivers.
///
/// Levels halve every axis: level l has n_d / 2^(l-1) segments. Transfers act
/// per axis and are uniform averages over the nearest coarse points of each
/// fine point (in physical coordinates):
///
///   staggered axis: an even fine face coincides with a coarse face and
///     copies it; an odd fine face sits halfway between two coarse faces
///     (possibly a pinned boundary face) and takes their mean. Restriction is
///     the normalized transpose, the classic (1/4, 1/2, 1/4) full weighting.
///   central axis: each fine cell has a unique nearest coarse parent (copy);
///     restriction is the two-child mean.
///
/// Pinned boundary faces carry the endpoint densities (time axis of P) or
/// zero (flux axes). Both transfers preserve constants and satisfy the max
/// principle. They do not preserve the discrete continuity equation, so the
/// multilevel driver always ends each level with a full solve; the multigrid
/// driver's final additive correction inherits the prolongation residual
/// (its mass per slice is still exact when every level carries equal mass,
/// which the drivers arrange by rescaling coarse-level endpoint data).

#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mfp/solver.hpp"

namespace mfp {

struct LevelHierarchy {
    std::vector<GridShape> shapes;  ///< [0] = finest

    int levels() const { return static_cast<int>(shapes.size()); }

    /// Builds `levels` grids, halving every axis per level. Requires every
    /// n_d divisible by 2^(levels-1) with coarsest extents >= 2.
    static LevelHierarchy build(const GridShape& finest, int levels) {
        if (levels < 1) throw std::invalid_argument("LevelHierarchy: need >= 1 level");
        LevelHierarchy h;
        h.shapes.push_back(finest);
        for (int l = 1; l < levels; ++l) {
            std::vector<int> n = h.shapes.back().segments();
            for (int& v : n) {
                if (v % 2 != 0 || v / 2 < 2)
                    throw std::invalid_argument(
                        "LevelHierarchy: axes must halve down to >= 2 segments at the coarsest level");
                v /= 2;
            }
            h.shapes.emplace_back(n);
        }
        return h;
    }
};

namespace detail {

/// Staggered-axis prolongation via the extended array (pinned slots at both
/// ends). `pin_lo`/`pin_hi` have the outer*inner layout of the non-axis
/// dims; null means zero.
inline Tensor prolong_staggered(const Tensor& in, int axis, const double* pin_lo,
                                const double* pin_hi) {
    const int n_c = in.extent(axis) + 1;
    std::vector<int> out_shape = in.shape();
    out_shape[static_cast<std::size_t>(axis)] = 2 * n_c - 1;
    Tensor out(out_shape);
    const AxisSpan si = axis_span(in.shape(), axis);
    const AxisSpan so = axis_span(out.shape(), axis);
    const double* pi = in.data();
    double* po = out.data();
    auto ext = [&](int e, std::size_t o, std::size_t r) -> double {  // slot e in 0..n_c
        if (e == 0) return pin_lo ? pin_lo[o * si.inner + r] : 0.0;
        if (e == n_c) return pin_hi ? pin_hi[o * si.inner + r] : 0.0;
        return pi[(o * si.n + static_cast<std::size_t>(e - 1)) * si.inner + r];
    };
    for (std::size_t o = 0; o < so.outer; ++o)
        for (std::size_t k = 0; k < so.n; ++k) {
            const int fine = static_cast<int>(k) + 1;  // 1-based fine face
            double* row = po + (o * so.n + k) * so.inner;
            if (fine % 2 == 0)
                for (std::size_t r = 0; r < so.inner; ++r) row[r] = ext(fine / 2, o, r);
            else
                for (std::size_t r = 0; r < so.inner; ++r)
                    row[r] = 0.5 * (ext((fine - 1) / 2, o, r) + ext((fine + 1) / 2, o, r));
        }
    return out;
}

/// Central-axis prolongation: copy the unique nearest coarse parent.
inline Tensor prolong_central(const Tensor& in, int axis) {
    std::vector<int> out_shape = in.shape();
    out_shape[static_cast<std::size_t>(axis)] *= 2;
    Tensor out(out_shape);
    const AxisSpan si = axis_span(in.shape(), axis);
    const AxisSpan so = axis_span(out.shape(), axis);
    const double* pi = in.data();
    double* po = out.data();
    for (std::size_t o = 0; o < so.outer; ++o)
        for (std::size_t j = 0; j < so.n; ++j) {
            const double* src = pi + (o * si.n + j / 2) * si.inner;
            double* row = po + (o * so.n + j) * so.inner;
            for (std::size_t r = 0; r < so.inner; ++r) row[r] = src[r];
        }
    return out;
}

/// Staggered-axis restriction: coarse face = (f_{2k-1}/2 + f_{2k} + f_{2k+1}/2) / 2.
/// Odd fine faces also feed the pinned boundary slots; those halves are
/// simply dropped, which is what the index range below does.
inline Tensor restrict_staggered(const Tensor& in, int axis) {
    const int n_f = in.extent(axis) + 1;
    std::vector<int> out_shape = in.shape();
    out_shape[static_cast<std::size_t>(axis)] = n_f / 2 - 1;
    Tensor out(out_shape);
    const AxisSpan si = axis_span(in.shape(), axis);
    const AxisSpan so = axis_span(out.shape(), axis);
    const double* pi = in.data();
    double* po = out.data();
    for (std::size_t o = 0; o < so.outer; ++o)
        for (std::size_t k = 0; k < so.n; ++k) {
            const std::size_t f0 = (o * si.n + 2 * k) * si.inner;  // fine face 2(k+1)-1
            double* row = po + (o * so.n + k) * so.inner;
            for (std::size_t r = 0; r < so.inner; ++r)
                row[r] = (0.5 * pi[f0 + r] + pi[f0 + si.inner + r] +
                          0.5 * pi[f0 + 2 * si.inner + r]) /
                         2.0;
        }
    return out;
}

/// Central-axis restriction: two-child mean.
inline Tensor restrict_central(const Tensor& in, int axis) {
    std::vector<int> out_shape = in.shape();
    out_shape[static_cast<std::size_t>(axis)] /= 2;
    Tensor out(out_shape);
    const AxisSpan si = axis_span(in.shape(), axis);
    const AxisSpan so = axis_span(out.shape(), axis);
    const double* pi = in.data();
    double* po = out.data();
    for (std::size_t o = 0; o < so.outer; ++o)
        for (std::size_t j = 0; j < so.n; ++j) {
            const double* a = pi + (o * si.n + 2 * j) * si.inner;
            const double* b = pi + (o * si.n + 2 * j + 1) * si.inner;
            double* row = po + (o * so.n + j) * so.inner;
            for (std::size_t r = 0; r < so.inner; ++r) row[r] = 0.5 * (a[r] + b[r]);
        }
    return out;
}

}  // namespace detail

/// Prolongate planning-layout fields one level up (every axis doubles).
/// Coarse boundary slots carry the pinned endpoint densities / zero flux.
inline StaggeredFieldSet prolong(const StaggeredFieldSet& coarse, const BoundaryData& coarse_bnd,
                                 const GridShape& fine_shape) {
    if (coarse.layout != FieldLayout::Mfp)
        throw std::invalid_argument("prolong: planning layout only");
    if (coarse.shape != coarse_bnd.shape)
        throw std::invalid_argument("prolong: boundary data on wrong grid");
    for (int a = 0; a < fine_shape.axes(); ++a)
        if (fine_shape.n(a) != 2 * coarse.shape.n(a))
            throw std::invalid_argument("prolong: fine shape must double every axis");

    StaggeredFieldSet out;
    out.shape = fine_shape;
    out.layout = FieldLayout::Mfp;
    Tensor p = detail::prolong_staggered(coarse.P, 0, coarse_bnd.rho0.data(),
                                         coarse_bnd.rho1.data());
    for (int a = 1; a < fine_shape.axes(); ++a) p = detail::prolong_central(p, a);
    out.P = std::move(p);
    for (int d = 1; d <= fine_shape.dim(); ++d) {
        Tensor m = coarse.M[static_cast<std::size_t>(d - 1)];
        for (int a = 0; a < fine_shape.axes(); ++a)
            m = a == d ? detail::prolong_staggered(m, a, nullptr, nullptr)
                       : detail::prolong_central(m, a);
        out.M.push_back(std::move(m));
    }
    return out;
}

/// Restrict planning-layout fields one level down (every axis halves).
inline StaggeredFieldSet restrict(const StaggeredFieldSet& fine) {
    if (fine.layout != FieldLayout::Mfp)
        throw std::invalid_argument("restrict: planning layout only");
    std::vector<int> n = fine.shape.segments();
    for (int& v : n) {
        if (v % 2 != 0) throw std::invalid_argument("restrict: every axis must be even");
        v /= 2;
    }
    StaggeredFieldSet out;
    out.shape = GridShape(n);
    out.layout = FieldLayout::Mfp;
    Tensor p = fine.P;
    p = detail::restrict_staggered(p, 0);
    for (int a = 1; a < out.shape.axes(); ++a) p = detail::restrict_central(p, a);
    out.P = std::move(p);
    for (int d = 1; d <= out.shape.dim(); ++d) {
        Tensor m = fine.M[static_cast<std::size_t>(d - 1)];
        for (int a = 0; a < out.shape.axes(); ++a)
            m = a == d ? detail::restrict_staggered(m, a) : detail::restrict_central(m, a);
        out.M.push_back(std::move(m));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

/// Produces the planning problem on a given grid (densities and preference
/// fields resampled per level).
using ProblemMaterializer = std::function<ProblemSpec(const GridShape&)>;

namespace detail {

/// Rescale both endpoint densities to the target discrete mass so every
/// level of a hierarchy transports exactly the same mass (keeps warm starts
/// slice-mass-exact across levels). The finest level is left untouched.
inline void rescale_to_mass(ProblemSpec& prob, double target_mass) {
    const double vol = prob.shape.spatial_cell_volume();
    const double m0 = vol * sum(prob.rho0);
    const double m1 = vol * sum(prob.rho1);
    if (m0 <= 0.0 || m1 <= 0.0)
        throw std::invalid_argument("hierarchy: endpoint density with nonpositive mass");
    const double s0 = target_mass / m0;
    const double s1 = target_mass / m1;
    for (std::size_t i = 0; i < prob.rho0.size(); ++i) prob.rho0[i] *= s0;
    for (std::size_t i = 0; i < prob.rho1.size(); ++i) prob.rho1[i] *= s1;
}

inline void append_level_trace(SolveReport& total, const SolveReport& part, int level) {
    const long base = total.iterations;
    for (std::size_t i = 0; i < part.trace_iter.size(); ++i) {
        total.trace_iter.push_back(base + part.trace_iter[i]);
        total.trace_level.push_back(level);
        total.trace_objective.push_back(part.trace_objective[i]);
        total.trace_stationarity.push_back(part.trace_stationarity[i]);
        total.trace_feasibility.push_back(part.trace_feasibility[i]);
        total.trace_mass.push_back(part.trace_mass[i]);
        total.trace_min_density.push_back(part.trace_min_density[i]);
        total.trace_seconds.push_back(part.trace_seconds[i]);
    }
    total.iterations += part.iterations;
    total.clamp_events += part.clamp_events;
    total.compat_warnings += part.compat_warnings;
    total.max_feasibility = std::max(total.max_feasibility, part.max_feasibility);
    total.max_mass = std::max(total.max_mass, part.max_mass);
}

inline std::vector<ProblemSpec> materialize_levels(const ProblemMaterializer& make_problem,
                                                   const LevelHierarchy& h) {
    std::vector<ProblemSpec> probs;
    for (const GridShape& g : h.shapes) probs.push_back(make_problem(g));
    const double target = probs.front().shape.spatial_cell_volume() * sum(probs.front().rho0);
    for (std::size_t l = 1; l < probs.size(); ++l) rescale_to_mass(probs[l], target);
    return probs;
}

}  // namespace detail

/// Multilevel schedule: solve the coarsest level from the flat start, then
/// prolongate each solution as the warm start of the next finer level. With
/// a single level this is exactly solve_mfp.
inline SolveReport ml_fista(const ProblemMaterializer& make_problem, const SolverConfig& cfg,
                            const LevelHierarchy& h) {
    if (h.levels() == 1) return solve_mfp(make_problem(h.shapes[0]), cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<ProblemSpec> probs = detail::materialize_levels(make_problem, h);

    SolveReport total;
    StaggeredFieldSet warm;
    for (int l = h.levels() - 1; l >= 0; --l) {
        const ProblemSpec& prob = probs[static_cast<std::size_t>(l)];
        SolveReport part = solve_mfp(prob, cfg, l == h.levels() - 1 ? nullptr : &warm);
        const bool finest = l == 0;
        if (!finest)
            warm = prolong(part.fields, prob.boundary(),
                           probs[static_cast<std::size_t>(l - 1)].shape);
        detail::append_level_trace(total, part, l + 1);
        if (finest) {
            total.fields = std::move(part.fields);
            total.converged = part.converged;
            total.abort_reason = part.abort_reason;
            total.final_objective = part.final_objective;
            total.final_delta = part.final_delta;
        }
    }
    total.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return total;
}

/// Multigrid schedule: K pre-smoothing iterations per level on the way down
/// (restricting the iterate), a full solve at the coarsest level, then on the
/// way up each level adds the coarse correction
///   fields <- fields + Solve(prolong(coarse)) - prolong(coarse).
/// With K = 0 the downward sweep only restricts the flat start, leaving the
/// multilevel schedule plus a redundant restriction pass. The final additive
/// correction is not a projection; per-slice mass stays exact while the
/// continuity residual inherits the prolongation error.
inline SolveReport mg_fista(const ProblemMaterializer& make_problem, const SolverConfig& cfg,
                            const LevelHierarchy& h, long presmooth_iters) {
    if (presmooth_iters < 0) throw std::invalid_argument("mg_fista: K must be >= 0");
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<ProblemSpec> probs = detail::materialize_levels(make_problem, h);

    SolverConfig smooth_cfg = cfg;
    smooth_cfg.max_iters = presmooth_iters;
    smooth_cfg.tol = 0.0;

    SolveReport total;
    std::vector<StaggeredFieldSet> level_fields(static_cast<std::size_t>(h.levels()));

    // pre-smoothing sweep, finest to coarsest
    for (int l = 0; l < h.levels(); ++l) {
        const ProblemSpec& prob = probs[static_cast<std::size_t>(l)];
        StaggeredFieldSet init = l == 0 ? StaggeredFieldSet::ones(prob.shape)
                                        : restrict(level_fields[static_cast<std::size_t>(l - 1)]);
        if (presmooth_iters > 0) {
            SolveReport part = solve_mfp(prob, smooth_cfg, &init);
            level_fields[static_cast<std::size_t>(l)] = std::move(part.fields);
            detail::append_level_trace(total, part, l + 1);
        } else {
            level_fields[static_cast<std::size_t>(l)] = std::move(init);
        }
    }

    // coarsest full solve
    {
        const int l = h.levels() - 1;
        SolveReport part = solve_mfp(probs[static_cast<std::size_t>(l)], cfg,
                                     &level_fields[static_cast<std::size_t>(l)]);
        level_fields[static_cast<std::size_t>(l)] = std::move(part.fields);
        detail::append_level_trace(total, part, l + 1);
        if (h.levels() == 1) {
            total.converged = part.converged;
            total.final_delta = part.final_delta;
        }
    }

    // correction and post-smoothing sweep, coarsest to finest
    for (int l = h.levels() - 2; l >= 0; --l) {
        const ProblemSpec& prob = probs[static_cast<std::size_t>(l)];
        const StaggeredFieldSet pro = prolong(level_fields[static_cast<std::size_t>(l + 1)],
                                              probs[static_cast<std::size_t>(l + 1)].boundary(),
                                              prob.shape);
        SolveReport part = solve_mfp(prob, cfg, &pro);
        detail::append_level_trace(total, part, l + 1);
        StaggeredFieldSet corrected = level_fields[static_cast<std::size_t>(l)];
        axpy(1.0, part.fields, corrected);
        axpy(-1.0, pro, corrected);
        level_fields[static_cast<std::size_t>(l)] = std::move(corrected);
        if (l == 0) {
            total.converged = part.converged;
            total.final_delta = part.final_delta;
        }
    }

    total.fields = std::move(level_fields[0]);
    total.final_objective =
        objective_value(total.fields, probs[0].boundary(), probs[0].model);
    total.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return total;
}

}  // namespace mfp

/// @file solver.hpp
/// @brief Accelerated projected-gradient (FISTA) loop for planning and game
///        problems: gradient step, exact spectral projection onto the
///        discrete continuity constraint, momentum update, stopping rule and
///        residue diagnostics.
///
/// One iteration, starting from the extrapolated point (Ph, Mh):
///
///   gradient:   (P', M') = (Ph, Mh) - eta * grad Y(Ph, Mh)
///   projection: solve the variant's Poisson system for phi, then add the
///               dual increments, making the iterate satisfy the discrete
///               continuity equation to solver precision
///   momentum:   tau' = (1 + sqrt(1 + 4 tau^2)) / 2, w = (tau - 1) / tau',
///               (Ph, Mh) <- (1 + w) * new - w * old
///
/// The loop stops at the first iterate with ||change||_2 <= tol (weighted
/// norm) or at the iteration cap. The step uses the unweighted objective
/// gradient; step sizes are order one regardless of grid resolution because
/// the volume factor cancels between objective scaling and step size.

#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfp/costs.hpp"
#include "mfp/grid.hpp"
#include "mfp/poisson.hpp"

namespace mfp {

struct StepPolicy {
    enum class Kind { Constant, Backtracking };
    Kind kind = Kind::Constant;
    double eta = 0.1;     ///< constant step, or current/initial step when backtracking
    double shrink = 0.5;  ///< backtracking shrink factor, in (0,1)
    double eta_max = 1.0; ///< growth cap: the step may recover up to this bound

    static StepPolicy constant(double eta) {
        if (!(eta > 0.0)) throw std::invalid_argument("StepPolicy: eta must be > 0");
        StepPolicy p;
        p.eta = eta;
        return p;
    }

    static StepPolicy backtracking(double eta0, double shrink, double eta_max) {
        if (!(eta0 > 0.0) || !(shrink > 0.0 && shrink < 1.0) || !(eta_max >= eta0))
            throw std::invalid_argument("StepPolicy: need eta0 > 0, shrink in (0,1), eta_max >= eta0");
        StepPolicy p;
        p.kind = Kind::Backtracking;
        p.eta = eta0;
        p.shrink = shrink;
        p.eta_max = eta_max;
        return p;
    }
};

struct SolverConfig {
    StepPolicy step = StepPolicy::constant(0.1);
    double tol = 1e-4;           ///< stopping tolerance on the iterate change, weighted l2
    long max_iters = 20000;
    double density_floor = 1e-8; ///< gradient-side density clamp
    long record_every = 10;      ///< diagnostics cadence (final iterate always recorded)
    bool momentum_restart = false;
};

struct Residues {
    double stationarity = 0.0;  ///< ||x - project(x - eta grad(x))||_2 / eta
    double feasibility = 0.0;   ///< ||Div(P,M) + div_term||_2
    double mass = 0.0;          ///< max_t |slice mass - initial mass| (volume weighted)
};

struct SolveReport {
    StaggeredFieldSet fields;
    bool converged = false;
    std::string abort_reason;    ///< nonempty when the solve was aborted
    long iterations = 0;         ///< total iterations (summed over levels for multiscale)
    double wall_seconds = 0.0;
    double final_objective = 0.0;
    double final_delta = std::numeric_limits<double>::infinity();
    long clamp_events = 0;       ///< density-floor activations during gradient evaluation
    long compat_warnings = 0;    ///< Poisson compatibility residues above tolerance
    double max_feasibility = 0.0;  ///< worst feasibility residue over recorded iterates
    double max_mass = 0.0;         ///< worst mass residue over recorded iterates

    // Parallel trace vectors, one entry per recorded iterate.
    std::vector<long> trace_iter;
    std::vector<int> trace_level;  ///< 1 = finest grid (multiscale drivers relabel)
    std::vector<double> trace_objective;
    std::vector<double> trace_stationarity;
    std::vector<double> trace_feasibility;
    std::vector<double> trace_mass;
    std::vector<double> trace_min_density;
    std::vector<double> trace_seconds;
};

/// Grid, endpoint densities and cost model of one solve. An empty rho1 marks
/// a game problem (free terminal density, preference G in the model).
struct ProblemSpec {
    GridShape shape;
    SpatialField rho0;
    SpatialField rho1;  // empty => game problem
    CostModel model;

    bool is_game() const { return rho1.empty(); }
    FieldLayout layout() const { return is_game() ? FieldLayout::Mfg : FieldLayout::Mfp; }
    PoissonVariant poisson_variant() const {
        return is_game() ? PoissonVariant::Mfg : PoissonVariant::Mfp;
    }

    BoundaryData boundary() const {
        return is_game() ? BoundaryData::game(shape, rho0)
                         : BoundaryData::planning(shape, rho0, rho1);
    }
};

// ---------------------------------------------------------------------------
// Projection
// ---------------------------------------------------------------------------

namespace detail {

/// In-place exact projection onto the continuity constraint set.
inline void project_in_place(StaggeredFieldSet& f, const CentralField& div_term,
                             const SpectralPlan& plan, long* compat_warnings) {
    CentralField rhs = divergence(f);
    axpy(1.0, div_term, rhs);
    if (plan.variant() == PoissonVariant::Mfp) {
        const CentralField phi = solve_neumann(rhs, plan, compat_warnings);
        const GridShape& g = f.shape;
        axpy(1.0, difference_to_faces(phi, g, 0), f.P);
        for (int d = 1; d <= g.dim(); ++d)
            axpy(1.0, difference_to_faces(phi, g, d), f.M[static_cast<std::size_t>(d - 1)]);
    } else {
        const CentralField phi = solve_mfg(rhs, plan);
        const GridShape& g = f.shape;
        axpy(-1.0, time_difference_transpose_game(phi, g), f.P);
        for (int d = 1; d <= g.dim(); ++d)
            axpy(1.0, difference_to_faces(phi, g, d), f.M[static_cast<std::size_t>(d - 1)]);
    }
}

}  // namespace detail

/// Exact projection of a planning-layout field set onto the continuity
/// constraint (orthogonal in the Frobenius inner product, idempotent to
/// solver precision).
inline StaggeredFieldSet project_mfp(const StaggeredFieldSet& f, const BoundaryData& bnd,
                                     const SpectralPlan& plan, long* compat_warnings = nullptr) {
    if (f.layout != FieldLayout::Mfp || plan.variant() != PoissonVariant::Mfp)
        throw std::invalid_argument("project_mfp: planning layout and plan required");
    StaggeredFieldSet out = f;
    detail::project_in_place(out, bnd.div_term(), plan, compat_warnings);
    return out;
}

/// Game-variant projection: solve (D0 D0^T + sum Dd Dd^T) phi = residual,
/// then P -= D0^T phi, M += D*_d phi.
inline StaggeredFieldSet project_mfg(const StaggeredFieldSet& f, const BoundaryData& bnd,
                                     const SpectralPlan& plan) {
    if (f.layout != FieldLayout::Mfg || plan.variant() != PoissonVariant::Mfg)
        throw std::invalid_argument("project_mfg: game layout and plan required");
    StaggeredFieldSet out = f;
    detail::project_in_place(out, bnd.div_term(), plan, nullptr);
    return out;
}

// ---------------------------------------------------------------------------
// Residues
// ---------------------------------------------------------------------------

/// Volume-weighted mass of every central time slice minus the initial mass;
/// returns the worst slice.
inline double mass_residue(const StaggeredFieldSet& f, const BoundaryData& bnd) {
    const CenterAverages avg = average_to_center(f, bnd);
    const double vol = f.shape.spatial_cell_volume();
    const std::size_t slice = bnd.rho0.size();
    double m0 = 0.0;
    for (std::size_t i = 0; i < slice; ++i) m0 += bnd.rho0[i];
    m0 *= vol;
    double worst = 0.0;
    const std::size_t nt = static_cast<std::size_t>(f.shape.n(0));
    for (std::size_t t = 0; t < nt; ++t) {
        double s = 0.0;
        const double* row = avg.rho.data() + t * slice;
        for (std::size_t i = 0; i < slice; ++i) s += row[i];
        worst = std::max(worst, std::abs(s * vol - m0));
    }
    return worst;
}

/// Stationarity, feasibility and mass residues of a field set. Stationarity
/// is the projected-gradient norm at step `eta`.
inline Residues residues(const StaggeredFieldSet& f, const BoundaryData& bnd,
                         const CostModel& model, double eta, const SpectralPlan& plan,
                         double density_floor = 1e-8) {
    Residues r;
    CentralField cont = divergence(f);
    axpy(1.0, bnd.div_term(), cont);
    r.feasibility = norms(cont, f.shape).weighted_l2;
    r.mass = mass_residue(f, bnd);

    StaggeredFieldSet stepped = f;
    const StaggeredFieldSet grad = objective_grad(f, bnd, model, density_floor);
    axpy(-eta, grad, stepped);
    detail::project_in_place(stepped, bnd.div_term(), plan, nullptr);
    axpy(-1.0, f, stepped);
    r.stationarity = norms(stepped).weighted_l2 / eta;
    return r;
}

// ---------------------------------------------------------------------------
// FISTA loop
// ---------------------------------------------------------------------------

namespace detail {

/// Objective in the gradient's own scaling (no volume factor for planning;
/// game problems keep the time-step factor on the running cost). Used by
/// the backtracking line search.
inline double objective_step_scaled(const StaggeredFieldSet& f, const BoundaryData& bnd,
                                    const CostModel& model) {
    const double vol = f.layout == FieldLayout::Mfg ? f.shape.spatial_cell_volume()
                                                    : f.shape.cell_volume();
    return objective_value(f, bnd, model) / vol;
}

inline SolveReport fista_loop(const ProblemSpec& prob, const SolverConfig& cfg,
                              const StaggeredFieldSet* init) {
    if (cfg.max_iters < 0 || cfg.record_every < 1 || !(cfg.tol >= 0.0) ||
        !(cfg.step.eta > 0.0) || !(cfg.density_floor > 0.0))
        throw std::invalid_argument("solve: invalid solver configuration");
    const auto t_start = std::chrono::steady_clock::now();
    const GridShape& g = prob.shape;
    const FieldLayout layout = prob.layout();
    const BoundaryData bnd = prob.boundary();

    if (!prob.is_game()) {
        const double vol = g.spatial_cell_volume();
        const double m0 = vol * sum(bnd.rho0);
        const double m1 = vol * sum(bnd.rho1);
        const double scale = std::max(std::abs(m0), std::abs(m1));
        if (std::abs(m0 - m1) > 1e-8 * (scale > 0.0 ? scale : 1.0))
            throw std::invalid_argument("solve: endpoint masses differ beyond 1e-8 relative");
    }

    const SpectralPlan plan(g, prob.poisson_variant());
    const CentralField div_term = bnd.div_term();

    SolveReport rep;
    StaggeredFieldSet x = init ? *init : StaggeredFieldSet::ones(g, layout);
    if (init && (init->shape != g || init->layout != layout))
        throw std::invalid_argument("solve: init fields on wrong grid/layout");
    StaggeredFieldSet xhat = x;
    double tau = 1.0;
    double eta = cfg.step.eta;
    const bool backtrack = cfg.step.kind == StepPolicy::Kind::Backtracking;

    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    auto record = [&](long iter_done, const StaggeredFieldSet& cur) {
        const Residues r = residues(cur, bnd, prob.model, eta, plan, cfg.density_floor);
        rep.trace_iter.push_back(iter_done);
        rep.trace_level.push_back(1);
        rep.trace_objective.push_back(objective_value(cur, bnd, prob.model));
        rep.trace_stationarity.push_back(r.stationarity);
        rep.trace_feasibility.push_back(r.feasibility);
        rep.trace_mass.push_back(r.mass);
        rep.trace_min_density.push_back(min_value(average_to_center(cur, bnd).rho));
        rep.trace_seconds.push_back(elapsed());
        rep.max_feasibility = std::max(rep.max_feasibility, r.feasibility);
        rep.max_mass = std::max(rep.max_mass, r.mass);
        return rep.trace_objective.back();
    };

    for (long k = 0; k < cfg.max_iters; ++k) {
        double f_hat = 0.0;
        if (backtrack) {
            f_hat = objective_step_scaled(xhat, bnd, prob.model);
            if (!std::isfinite(f_hat)) {
                // momentum extrapolated outside the objective's domain
                // (negative density carrying flux): restart from the last
                // accepted iterate so the line search has a finite anchor
                xhat = x;
                tau = 1.0;
                f_hat = objective_step_scaled(xhat, bnd, prob.model);
            }
        }
        const StaggeredFieldSet grad =
            objective_grad(xhat, bnd, prob.model, cfg.density_floor, &rep.clamp_events);

        StaggeredFieldSet xn;
        if (backtrack) {
            eta = std::min(eta / cfg.step.shrink, cfg.step.eta_max);
            for (;;) {
                xn = xhat;
                axpy(-eta, grad, xn);
                project_in_place(xn, div_term, plan, &rep.compat_warnings);
                StaggeredFieldSet diff = linear_combination(1.0, xn, -1.0, xhat);
                const double quad = sum_squares(diff.P) + [&] {
                    double s = 0.0;
                    for (const Tensor& m : diff.M) s += sum_squares(m);
                    return s;
                }();
                const double bound = f_hat + dot(grad, diff) + quad / (2.0 * eta);
                const double f_new = objective_step_scaled(xn, bnd, prob.model);
                if (f_new <= bound + 1e-12 * std::abs(bound)) break;
                eta *= cfg.step.shrink;
                if (eta < 1e-14) break;  // step exhausted; accept the last trial
            }
        } else {
            xn = xhat;
            axpy(-eta, grad, xn);
            project_in_place(xn, div_term, plan, &rep.compat_warnings);
        }

        StaggeredFieldSet delta = linear_combination(1.0, xn, -1.0, x);
        rep.final_delta = norms(delta).weighted_l2;
        if (!std::isfinite(rep.final_delta)) {
            rep.abort_reason = "non-finite iterate";
            rep.iterations = k + 1;
            break;
        }

        if (cfg.momentum_restart && dot(linear_combination(1.0, xhat, -1.0, xn), delta) > 0.0)
            tau = 1.0;
        const double tau_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tau * tau));
        const double w = (tau - 1.0) / tau_next;
        xhat = linear_combination(1.0 + w, xn, -w, x);
        x = std::move(xn);
        tau = tau_next;
        rep.iterations = k + 1;

        const bool done = rep.final_delta <= cfg.tol || k + 1 == cfg.max_iters;
        if (k % cfg.record_every == 0 || done) {
            const double obj = record(k + 1, x);
            if (std::isfinite(obj) && obj > 1e12) {
                rep.abort_reason = "objective blow-up past 1e12";
                break;
            }
        }
        if (rep.final_delta <= cfg.tol) {
            rep.converged = true;
            break;
        }
    }

    rep.fields = std::move(x);
    rep.final_objective = objective_value(rep.fields, bnd, prob.model);
    rep.wall_seconds = elapsed();
    return rep;
}

}  // namespace detail

/// FISTA for the planning problem (both endpoint densities pinned).
/// Default initialization: all fields identically one.
inline SolveReport solve_mfp(const ProblemSpec& prob, const SolverConfig& cfg,
                             const StaggeredFieldSet* init = nullptr) {
    if (prob.is_game()) throw std::invalid_argument("solve_mfp: rho1 missing (game problem?)");
    return detail::fista_loop(prob, cfg, init);
}

/// FISTA for the game problem (terminal density free, preference G applied
/// through the cost model's terminal term).
inline SolveReport solve_mfg(const ProblemSpec& prob, const SolverConfig& cfg,
                             const StaggeredFieldSet* init = nullptr) {
    if (!prob.is_game()) throw std::invalid_argument("solve_mfg: rho1 present (planning problem?)");
    return detail::fista_loop(prob, cfg, init);
}

}  // namespace mfp

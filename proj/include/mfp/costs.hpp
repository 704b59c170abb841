/// @file costs.hpp
/// @brief Running cost models and the discrete objective with its gradient.
///
/// The per-point cost is Y(b0, b, x) = L(b0, b) + lambda_e*F(b0) + lambda_q*b0*Q(x)
/// with the kinetic term L(b0, b) = |b|^2 / (2 b0) extended by L(0,0) = 0 and
/// L(0, b!=0) = +inf. The interaction term F is selected by CostModel::kind.
/// Game problems additionally pay lambda_g * sum_x P(terminal, x) * G(x).
///
/// Gradients are evaluated with the density clamped at a configurable floor so
/// they stay finite when an iterate transiently leaves the positive cone; the
/// objective value itself is never clamped.

#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mfp/grid.hpp"

namespace mfp {

enum class InteractionKind { OT, Entropy, Quadratic, Reciprocal };

/// Cost-model selector plus weights and the spatial preference fields.
/// Q (moving preference) and G (terminal preference, game only) are sampled at
/// spatial cell centers; an empty tensor means identically zero.
struct CostModel {
    InteractionKind kind = InteractionKind::OT;
    double lambda_e = 0.0;
    double lambda_q = 0.0;
    SpatialField q;
    double lambda_g = 0.0;
    SpatialField g;

    static CostModel ot() { return CostModel{}; }

    static CostModel make(InteractionKind kind, double lambda_e, double lambda_q,
                          SpatialField q = SpatialField()) {
        if (kind == InteractionKind::OT && (lambda_e != 0.0 || lambda_q != 0.0))
            throw std::invalid_argument("CostModel: OT requires lambda_e = lambda_q = 0");
        if (lambda_e < 0.0 || lambda_q < 0.0)
            throw std::invalid_argument("CostModel: weights must be nonnegative");
        for (std::size_t i = 0; i < q.size(); ++i)
            if (!(q[i] >= 0.0) || !std::isfinite(q[i]))
                throw std::invalid_argument("CostModel: Q samples must be finite and >= 0");
        CostModel m;
        m.kind = kind;
        m.lambda_e = lambda_e;
        m.lambda_q = lambda_q;
        m.q = std::move(q);
        return m;
    }

    CostModel& with_terminal(double lambda_g_, SpatialField g_) {
        if (lambda_g_ < 0.0) throw std::invalid_argument("CostModel: lambda_g must be >= 0");
        lambda_g = lambda_g_;
        g = std::move(g_);
        return *this;
    }
};

// ---------------------------------------------------------------------------
// Pointwise costs
// ---------------------------------------------------------------------------

/// Kinetic cost |beta|^2 / (2 beta0); 0 at (0, 0), +inf at (0, beta != 0).
inline double dynamic_cost(double beta0, const std::vector<double>& beta) {
    if (beta0 < 0.0) throw std::domain_error("dynamic_cost: beta0 must be >= 0");
    double sq = 0.0;
    for (double b : beta) sq += b * b;
    if (beta0 > 0.0) return sq / (2.0 * beta0);
    return sq == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

/// Partials of the kinetic cost at beta0 clamped to `floor`:
/// d/db0 = -|b|^2/(2 b0^2), d/db_d = b_d/b0. Never NaN.
inline void dynamic_cost_grad(double beta0, const std::vector<double>& beta, double floor,
                              double& l0, std::vector<double>& grad_beta) {
    const double b0 = beta0 > floor ? beta0 : floor;
    double sq = 0.0;
    grad_beta.resize(beta.size());
    for (std::size_t d = 0; d < beta.size(); ++d) {
        sq += beta[d] * beta[d];
        grad_beta[d] = beta[d] / b0;
    }
    l0 = -sq / (2.0 * b0 * b0);
}

/// Interaction density value and derivative (F(rho), F'(rho)) at rho >= 0.
/// Values at rho = 0 follow the "only where positive" convention (0 for
/// Entropy and Reciprocal); derivatives at rho below `floor` are taken at the
/// floor so gradient evaluation stays finite.
inline std::pair<double, double> interaction(InteractionKind kind, double rho,
                                             double floor = 1e-8) {
    if (rho < 0.0) throw std::domain_error("interaction: rho must be >= 0");
    switch (kind) {
        case InteractionKind::OT:
            return {0.0, 0.0};
        case InteractionKind::Entropy: {
            const double value = rho > 0.0 ? rho * std::log(rho) : 0.0;
            const double r = rho > floor ? rho : floor;
            return {value, std::log(r) + 1.0};
        }
        case InteractionKind::Quadratic:
            return {0.5 * rho * rho, rho};
        case InteractionKind::Reciprocal: {
            const double value = rho > 0.0 ? 1.0 / rho : 0.0;
            const double r = rho > floor ? rho : floor;
            return {value, -1.0 / (r * r)};
        }
    }
    return {0.0, 0.0};
}

namespace detail {

/// F(rho) value only, extended-real convention at rho <= 0 as above.
inline double interaction_value(InteractionKind kind, double rho) {
    switch (kind) {
        case InteractionKind::OT: return 0.0;
        case InteractionKind::Entropy: return rho > 0.0 ? rho * std::log(rho) : 0.0;
        case InteractionKind::Quadratic: return 0.5 * rho * rho;
        case InteractionKind::Reciprocal: return rho > 0.0 ? 1.0 / rho : 0.0;
    }
    return 0.0;
}

/// F'(rho at floor clamp).
inline double interaction_deriv(InteractionKind kind, double rho, double floor) {
    const double r = rho > floor ? rho : floor;
    switch (kind) {
        case InteractionKind::OT: return 0.0;
        case InteractionKind::Entropy: return std::log(r) + 1.0;
        case InteractionKind::Quadratic: return r;
        case InteractionKind::Reciprocal: return -1.0 / (r * r);
    }
    return 0.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Discrete objective
// ---------------------------------------------------------------------------

/// (prod_d delta_d) * sum_j Y(rho_bar_j, m_bar_j, x_j), plus the terminal
/// preference term for game problems. Negative averaged densities are treated
/// as zero for the kinetic term, so the value is +inf exactly when some cell
/// has zero (or negative) density and nonzero averaged flux.
inline double objective_value(const StaggeredFieldSet& f, const BoundaryData& bnd,
                              const CostModel& model) {
    const CenterAverages avg = average_to_center(f, bnd);
    const int d_space = f.shape.dim();
    const bool has_q = model.lambda_q != 0.0 && !model.q.empty();
    const std::size_t spatial = bnd.rho0.size();

    double acc = 0.0;
    for (std::size_t i = 0; i < avg.rho.size(); ++i) {
        const double rho = avg.rho[i] > 0.0 ? avg.rho[i] : 0.0;
        double msq = 0.0;
        for (int d = 0; d < d_space; ++d) {
            const double md = avg.m[static_cast<std::size_t>(d)][i];
            msq += md * md;
        }
        if (rho > 0.0) {
            acc += msq / (2.0 * rho);
        } else if (msq != 0.0) {
            return std::numeric_limits<double>::infinity();
        }
        if (model.lambda_e != 0.0) acc += model.lambda_e * detail::interaction_value(model.kind, rho);
        if (has_q) acc += model.lambda_q * rho * model.q[i % spatial];
    }
    double value = f.shape.cell_volume() * acc;

    if (f.layout == FieldLayout::Mfg && model.lambda_g != 0.0 && !model.g.empty()) {
        const std::size_t last = f.P.size() - spatial;
        double term = 0.0;
        for (std::size_t i = 0; i < spatial; ++i) term += f.P[last + i] * model.g[i];
        value += f.shape.spatial_cell_volume() * model.lambda_g * term;
    }
    return value;
}

/// Adds lambda_g * G(x_j) to the terminal-slice rows of a game-layout P
/// gradient. No-op when lambda_g = 0 or G is absent.
inline void mfg_terminal_grad(Tensor& dP, const GridShape& g, const CostModel& model) {
    if (model.lambda_g == 0.0 || model.g.empty()) return;
    if (dP.shape() != g.face_shape(0, FieldLayout::Mfg))
        throw std::invalid_argument("mfg_terminal_grad: expected game-layout P gradient");
    const std::size_t spatial = model.g.size();
    const std::size_t last = dP.size() - spatial;
    for (std::size_t i = 0; i < spatial; ++i) dP[last + i] += model.lambda_g * model.g[i];
}

/// Gradient of the unweighted objective sum (no cell-volume factor), mapped
/// back to the staggered grids through the adjoint averages. Densities are
/// clamped at `floor` for the pointwise partials. For game problems the
/// running-cost part carries the delta0 factor of the game objective and the
/// terminal rows gain lambda_g * G.
///
/// Returns the number of cells whose density was clamped through the
/// out-parameter when `clamped` is non-null.
inline StaggeredFieldSet objective_grad(const StaggeredFieldSet& f, const BoundaryData& bnd,
                                        const CostModel& model, double floor,
                                        long* clamped = nullptr) {
    const CenterAverages avg = average_to_center(f, bnd);
    const GridShape& g = f.shape;
    const int d_space = g.dim();
    const bool has_q = model.lambda_q != 0.0 && !model.q.empty();
    const std::size_t spatial = bnd.rho0.size();
    const double scale = f.layout == FieldLayout::Mfg ? g.delta(0) : 1.0;

    CentralField y0(g.central_shape());
    std::vector<CentralField> ym;
    for (int d = 0; d < d_space; ++d) ym.emplace_back(g.central_shape());

    long clamp_count = 0;
    for (std::size_t i = 0; i < y0.size(); ++i) {
        double rho = avg.rho[i];
        if (rho < floor) {
            rho = floor;
            ++clamp_count;
        }
        double msq = 0.0;
        for (int d = 0; d < d_space; ++d) {
            const double md = avg.m[static_cast<std::size_t>(d)][i];
            msq += md * md;
            ym[static_cast<std::size_t>(d)][i] = scale * md / rho;
        }
        double l0 = -msq / (2.0 * rho * rho);
        if (model.lambda_e != 0.0)
            l0 += model.lambda_e * detail::interaction_deriv(model.kind, avg.rho[i], floor);
        if (has_q) l0 += model.lambda_q * model.q[i % spatial];
        y0[i] = scale * l0;
    }
    if (clamped) *clamped += clamp_count;

    StaggeredFieldSet out;
    out.shape = g;
    out.layout = f.layout;
    if (f.layout == FieldLayout::Mfg) {
        out.P = average_to_time_faces_game(y0, g);
        mfg_terminal_grad(out.P, g, model);
    } else {
        out.P = average_to_faces(y0, g, 0);
    }
    for (int d = 1; d <= d_space; ++d)
        out.M.push_back(average_to_faces(ym[static_cast<std::size_t>(d - 1)], g, d));
    return out;
}

}  // namespace mfp

/// @file grid.hpp
/// @brief Staggered space-time grid: field containers and discrete operators.
///
/// The domain is the unit box [0,1]^(D+1) with axis 0 = time. Axis d is split
/// into n_d uniform segments, delta_d = 1/n_d. Three families of grid points:
///
///   cell centers   (j_d - 1/2)*delta_d,  j_d = 1..n_d        (all axes)
///   faces axis d   k*delta_d,            k   = 1..n_d-1      (interior only)
///
/// Density P lives on time faces, flux M_d on axis-d faces; everything else
/// (averaged density/flux, dual variable, Poisson right-hand sides) lives on
/// the cell-center grid. Half-integer face indices j_d = k + 1/2 are stored
/// 0-based at array offset k-1; central indices j_d = 1..n_d at offset j_d-1.
/// This mapping is fixed here and all stencils below are written against it.
///
/// Zero normal flux at the spatial boundary is structural: M_d stores interior
/// faces only, so the boundary faces are identically zero by construction.
/// Time boundary data (rho0, rho1) enters through BoundaryData terms instead.
///
/// Two time layouts exist. In the planning layout both endpoint densities are
/// pinned and P has n0-1 rows. In the game layout only rho(0,.) is pinned; P
/// gains a free terminal row (n0 rows, face indices 3/2 .. n0+1/2) and the
/// time-axis average/difference stencils lose their right boundary row.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mfp/tensor.hpp"

namespace mfp {

enum class FieldLayout { Mfp, Mfg };

using CentralField = Tensor;  ///< shape (n0, n1, ..., nD)
using SpatialField = Tensor;  ///< shape (n1, ..., nD)

class GridShape {
public:
    GridShape() = default;

    explicit GridShape(std::vector<int> segments) : n_(std::move(segments)) {
        if (n_.size() < 2) throw std::invalid_argument("GridShape: need time plus >=1 space axis");
        for (int s : n_)
            if (s < 1) throw std::invalid_argument("GridShape: segment counts must be >= 1");
    }

    int dim() const { return static_cast<int>(n_.size()) - 1; }   ///< D (space dims)
    int axes() const { return static_cast<int>(n_.size()); }      ///< D + 1
    int n(int axis) const { return n_[static_cast<std::size_t>(axis)]; }
    double delta(int axis) const { return 1.0 / n_[static_cast<std::size_t>(axis)]; }

    /// prod_d delta_d, the cell volume of the space-time grid.
    double cell_volume() const {
        double v = 1.0;
        for (int s : n_) v /= static_cast<double>(s);
        return v;
    }

    /// prod_{d>=1} delta_d, the spatial cell volume.
    double spatial_cell_volume() const {
        double v = 1.0;
        for (std::size_t a = 1; a < n_.size(); ++a) v /= static_cast<double>(n_[a]);
        return v;
    }

    const std::vector<int>& segments() const { return n_; }
    std::vector<int> central_shape() const { return n_; }

    std::vector<int> spatial_shape() const {
        return std::vector<int>(n_.begin() + 1, n_.end());
    }

    /// Shape of the face array along `axis` (P for axis 0, M_d otherwise).
    std::vector<int> face_shape(int axis, FieldLayout layout = FieldLayout::Mfp) const {
        std::vector<int> s = n_;
        if (axis == 0 && layout == FieldLayout::Mfg) return s;  // free terminal row
        s[static_cast<std::size_t>(axis)] -= 1;
        return s;
    }

    std::size_t central_size() const {
        std::size_t v = 1;
        for (int s : n_) v *= static_cast<std::size_t>(s);
        return v;
    }

    bool operator==(const GridShape& o) const { return n_ == o.n_; }
    bool operator!=(const GridShape& o) const { return !(*this == o); }

    std::string to_string() const {
        std::string s;
        for (std::size_t a = 0; a < n_.size(); ++a)
            s += (a ? "x" : "") + std::to_string(n_[a]);
        return s;
    }

private:
    std::vector<int> n_;
};

// ---------------------------------------------------------------------------
// Field containers
// ---------------------------------------------------------------------------

/// Density on time faces plus one flux array per spatial axis.
struct StaggeredFieldSet {
    GridShape shape;
    FieldLayout layout = FieldLayout::Mfp;
    Tensor P;
    std::vector<Tensor> M;  // M[d-1] holds the axis-d flux

    static StaggeredFieldSet constant(const GridShape& g, double value,
                                      FieldLayout layout = FieldLayout::Mfp) {
        StaggeredFieldSet f;
        f.shape = g;
        f.layout = layout;
        f.P = Tensor(g.face_shape(0, layout), value);
        for (int d = 1; d <= g.dim(); ++d) f.M.emplace_back(g.face_shape(d), value);
        return f;
    }

    static StaggeredFieldSet zeros(const GridShape& g, FieldLayout layout = FieldLayout::Mfp) {
        return constant(g, 0.0, layout);
    }

    static StaggeredFieldSet ones(const GridShape& g, FieldLayout layout = FieldLayout::Mfp) {
        return constant(g, 1.0, layout);
    }

    std::size_t total_size() const {
        std::size_t n = P.size();
        for (const Tensor& m : M) n += m.size();
        return n;
    }
};

inline void check_compatible(const StaggeredFieldSet& a, const StaggeredFieldSet& b,
                             const char* where) {
    if (a.shape != b.shape || a.layout != b.layout)
        throw std::invalid_argument(std::string(where) + ": field sets on different grids");
}

inline double dot(const StaggeredFieldSet& a, const StaggeredFieldSet& b) {
    check_compatible(a, b, "dot");
    double s = dot(a.P, b.P);
    for (std::size_t d = 0; d < a.M.size(); ++d) s += dot(a.M[d], b.M[d]);
    return s;
}

inline void axpy(double alpha, const StaggeredFieldSet& x, StaggeredFieldSet& y) {
    check_compatible(x, y, "axpy");
    axpy(alpha, x.P, y.P);
    for (std::size_t d = 0; d < x.M.size(); ++d) axpy(alpha, x.M[d], y.M[d]);
}

inline StaggeredFieldSet linear_combination(double a, const StaggeredFieldSet& u,
                                            double b, const StaggeredFieldSet& v) {
    check_compatible(u, v, "linear_combination");
    StaggeredFieldSet out;
    out.shape = u.shape;
    out.layout = u.layout;
    out.P = linear_combination(a, u.P, b, v.P);
    for (std::size_t d = 0; d < u.M.size(); ++d)
        out.M.push_back(linear_combination(a, u.M[d], b, v.M[d]));
    return out;
}

// ---------------------------------------------------------------------------
// Boundary data
// ---------------------------------------------------------------------------

/// Endpoint density samples rho0(x_j), rho1(x_j) at spatial cell centers, and
/// the derived boundary terms for the averaging and divergence operators.
///
/// avg_term: zero except the first/last time row, which carry rho0/2, rho1/2.
/// div_term: zero except the first/last time row: -rho0/delta0, +rho1/delta0.
/// In the game layout only the rho0 rows exist.
struct BoundaryData {
    GridShape shape;
    FieldLayout layout = FieldLayout::Mfp;
    SpatialField rho0;
    SpatialField rho1;  // empty in the game layout

    static BoundaryData planning(const GridShape& g, SpatialField rho0, SpatialField rho1) {
        BoundaryData b;
        b.shape = g;
        b.layout = FieldLayout::Mfp;
        b.rho0 = std::move(rho0);
        b.rho1 = std::move(rho1);
        b.validate();
        return b;
    }

    static BoundaryData game(const GridShape& g, SpatialField rho0) {
        BoundaryData b;
        b.shape = g;
        b.layout = FieldLayout::Mfg;
        b.rho0 = std::move(rho0);
        b.validate();
        return b;
    }

    void validate() const {
        const std::vector<int> sp = shape.spatial_shape();
        if (rho0.shape() != sp)
            throw std::invalid_argument("BoundaryData: rho0 samples have wrong shape");
        if (layout == FieldLayout::Mfp && rho1.shape() != sp)
            throw std::invalid_argument("BoundaryData: rho1 samples have wrong shape");
        for (std::size_t i = 0; i < rho0.size(); ++i)
            if (rho0[i] < 0.0) throw std::invalid_argument("BoundaryData: rho0 must be nonnegative");
        for (std::size_t i = 0; i < rho1.size(); ++i)
            if (rho1[i] < 0.0) throw std::invalid_argument("BoundaryData: rho1 must be nonnegative");
    }

    CentralField avg_term() const { return boundary_field(0.5, 0.5); }

    CentralField div_term() const {
        const double inv_dt = static_cast<double>(shape.n(0));
        return boundary_field(-inv_dt, inv_dt);
    }

private:
    CentralField boundary_field(double c0, double c1) const {
        CentralField out(shape.central_shape());
        const std::size_t slice = rho0.size();
        for (std::size_t i = 0; i < slice; ++i) out[i] = c0 * rho0[i];
        if (layout == FieldLayout::Mfp) {
            const std::size_t last = out.size() - slice;
            for (std::size_t i = 0; i < slice; ++i) out[last + i] += c1 * rho1[i];
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Per-axis stencil kernels
// ---------------------------------------------------------------------------

namespace detail {

/// Faces -> centers, weights (wl, wr) on the (left, right) face of each cell.
/// Missing faces at the ends contribute nothing. `faces_n` = n-1 (interior
/// storage) or n (game-layout time axis, where the row past the end is the
/// only missing one).
inline void faces_to_centers(const Tensor& in, Tensor& out, int axis,
                             double wl, double wr) {
    const AxisSpan s = axis_span(out.shape(), axis);
    const std::size_t n = s.n;
    const std::size_t fn = static_cast<std::size_t>(in.extent(axis));
    const double* pin = in.data();
    double* pout = out.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
        const std::size_t ob_out = o * n * s.inner;
        const std::size_t ob_in = o * fn * s.inner;
        for (std::size_t j = 0; j < n; ++j) {
            double* row = pout + ob_out + j * s.inner;
            // left face of cell j+1 is face index j-1, right face is index j
            const bool has_l = j >= 1;
            const bool has_r = j < fn;
            const double* rl = pin + ob_in + (j - 1) * s.inner;
            const double* rr = pin + ob_in + j * s.inner;
            if (has_l && has_r)
                for (std::size_t r = 0; r < s.inner; ++r) row[r] = wl * rl[r] + wr * rr[r];
            else if (has_r)
                for (std::size_t r = 0; r < s.inner; ++r) row[r] = wr * rr[r];
            else if (has_l)
                for (std::size_t r = 0; r < s.inner; ++r) row[r] = wl * rl[r];
            else
                for (std::size_t r = 0; r < s.inner; ++r) row[r] = 0.0;
        }
    }
}

/// Centers -> interior faces, out[k] = wl*in[k] + wr*in[k+1], k = 0..n-2.
inline void centers_to_faces(const Tensor& in, Tensor& out, int axis,
                             double wl, double wr) {
    const AxisSpan s = axis_span(in.shape(), axis);
    const std::size_t n = s.n;
    const std::size_t fn = static_cast<std::size_t>(out.extent(axis));
    const double* pin = in.data();
    double* pout = out.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
        const std::size_t ob_in = o * n * s.inner;
        const std::size_t ob_out = o * fn * s.inner;
        for (std::size_t k = 0; k < fn; ++k) {
            double* row = pout + ob_out + k * s.inner;
            const double* rl = pin + ob_in + k * s.inner;
            const bool has_r = k + 1 < n;
            const double* rr = pin + ob_in + (k + 1) * s.inner;
            if (has_r)
                for (std::size_t r = 0; r < s.inner; ++r) row[r] = wl * rl[r] + wr * rr[r];
            else
                for (std::size_t r = 0; r < s.inner; ++r) row[r] = wl * rl[r];
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Averaging operators
// ---------------------------------------------------------------------------

/// Faces -> centers average along `axis` (no boundary term). Interior cells
/// get the two-face mean, end cells the single available half.
inline CentralField average_faces(const Tensor& faces, const GridShape& g, int axis) {
    CentralField out(g.central_shape());
    detail::faces_to_centers(faces, out, axis, 0.5, 0.5);
    return out;
}

struct CenterAverages {
    CentralField rho;              ///< A0(P) + boundary halves
    std::vector<CentralField> m;   ///< A_d(M_d) per spatial axis
};

/// Averaged density and flux on the cell-center grid, boundary terms included.
inline CenterAverages average_to_center(const StaggeredFieldSet& f, const BoundaryData& bnd) {
    if (f.shape != bnd.shape || f.layout != bnd.layout)
        throw std::invalid_argument("average_to_center: fields/boundary grid mismatch");
    CenterAverages out;
    out.rho = average_faces(f.P, f.shape, 0);
    const std::size_t slice = bnd.rho0.size();
    for (std::size_t i = 0; i < slice; ++i) out.rho[i] += 0.5 * bnd.rho0[i];
    if (f.layout == FieldLayout::Mfp) {
        const std::size_t last = out.rho.size() - slice;
        for (std::size_t i = 0; i < slice; ++i) out.rho[last + i] += 0.5 * bnd.rho1[i];
    }
    for (int d = 1; d <= f.shape.dim(); ++d)
        out.m.push_back(average_faces(f.M[static_cast<std::size_t>(d - 1)], f.shape, d));
    return out;
}

/// Centers -> interior faces average along `axis` (the adjoint of the
/// interior part of average_faces). Output has n-1 rows along `axis`.
inline Tensor average_to_faces(const CentralField& u, const GridShape& g, int axis) {
    if (u.shape() != g.central_shape())
        throw std::invalid_argument("average_to_faces: central shape mismatch");
    Tensor out(g.face_shape(axis, FieldLayout::Mfp));
    detail::centers_to_faces(u, out, axis, 0.5, 0.5);
    return out;
}

/// Game-layout time average transpose: centers (n0 rows) -> faces 3/2..n0+1/2.
/// Row k < n0-1 gets (u_k + u_{k+1})/2, the terminal row gets u_{n0-1}/2.
inline Tensor average_to_time_faces_game(const CentralField& u, const GridShape& g) {
    if (u.shape() != g.central_shape())
        throw std::invalid_argument("average_to_time_faces_game: central shape mismatch");
    Tensor out(g.face_shape(0, FieldLayout::Mfg));
    detail::centers_to_faces(u, out, 0, 0.5, 0.5);
    return out;
}

// ---------------------------------------------------------------------------
// Difference operators
// ---------------------------------------------------------------------------

/// Faces -> centers difference along `axis`: first row +f/delta, interior
/// (right-left)/delta, last row -f/delta. With the game-layout time axis the
/// terminal face exists, so the last row is an interior difference too.
inline CentralField difference_faces(const Tensor& faces, const GridShape& g, int axis) {
    CentralField out(g.central_shape());
    const double inv = static_cast<double>(g.n(axis));
    detail::faces_to_centers(faces, out, axis, -inv, inv);
    return out;
}

/// Div(P, M) = D0(P) + sum_d Dd(M_d). The physical continuity residual is
/// Div(P, M) + BoundaryData::div_term().
inline CentralField divergence(const StaggeredFieldSet& f) {
    CentralField out = difference_faces(f.P, f.shape, 0);
    for (int d = 1; d <= f.shape.dim(); ++d) {
        const Tensor part = difference_faces(f.M[static_cast<std::size_t>(d - 1)], f.shape, d);
        axpy(1.0, part, out);
    }
    return out;
}

/// Spatial-only divergence sum_{d>=1} Dd(M_d), used by the game projection.
inline CentralField divergence_space(const StaggeredFieldSet& f) {
    CentralField out(f.shape.central_shape());
    for (int d = 1; d <= f.shape.dim(); ++d) {
        const Tensor part = difference_faces(f.M[static_cast<std::size_t>(d - 1)], f.shape, d);
        axpy(1.0, part, out);
    }
    return out;
}

/// Centers -> interior faces difference along `axis`: (u_{k+1} - u_k)/delta.
inline Tensor difference_to_faces(const CentralField& u, const GridShape& g, int axis) {
    if (u.shape() != g.central_shape())
        throw std::invalid_argument("difference_to_faces: central shape mismatch");
    Tensor out(g.face_shape(axis, FieldLayout::Mfp));
    const double inv = static_cast<double>(g.n(axis));
    detail::centers_to_faces(u, out, axis, -inv, inv);
    return out;
}

/// Grad(phi) over all axes 0..D, as a planning-layout field set. These are
/// exactly the increments added in the planning projection update.
inline StaggeredFieldSet gradient(const CentralField& phi, const GridShape& g) {
    StaggeredFieldSet out;
    out.shape = g;
    out.layout = FieldLayout::Mfp;
    out.P = difference_to_faces(phi, g, 0);
    for (int d = 1; d <= g.dim(); ++d) out.M.push_back(difference_to_faces(phi, g, d));
    return out;
}

/// Transpose of the game-layout time difference: centers -> faces 3/2..n0+1/2,
/// row k < n0-1 gets (u_k - u_{k+1})/delta0, terminal row u_{n0-1}/delta0.
/// The game projection subtracts this from P.
inline Tensor time_difference_transpose_game(const CentralField& u, const GridShape& g) {
    if (u.shape() != g.central_shape())
        throw std::invalid_argument("time_difference_transpose_game: central shape mismatch");
    Tensor out(g.face_shape(0, FieldLayout::Mfg));
    const double inv = static_cast<double>(g.n(0));
    detail::centers_to_faces(u, out, 0, inv, -inv);
    return out;
}

/// Homogeneous-Neumann three-point Laplacian summed over all axes.
/// Identical to divergence(gradient(phi)) entry for entry.
inline CentralField laplacian(const CentralField& phi, const GridShape& g) {
    if (phi.shape() != g.central_shape())
        throw std::invalid_argument("laplacian: central shape mismatch");
    CentralField out(g.central_shape());
    const double* pin = phi.data();
    double* pout = out.data();
    for (int axis = 0; axis < g.axes(); ++axis) {
        const AxisSpan s = axis_span(phi.shape(), axis);
        const double w = static_cast<double>(g.n(axis)) * static_cast<double>(g.n(axis));
        for (std::size_t o = 0; o < s.outer; ++o) {
            const std::size_t ob = o * s.n * s.inner;
            for (std::size_t j = 0; j < s.n; ++j) {
                double* row = pout + ob + j * s.inner;
                const double* rc = pin + ob + j * s.inner;
                const bool has_l = j >= 1;
                const bool has_r = j + 1 < s.n;
                const double* rl = rc - s.inner;
                const double* rr = rc + s.inner;
                if (has_l && has_r)
                    for (std::size_t r = 0; r < s.inner; ++r)
                        row[r] += w * (rl[r] - 2.0 * rc[r] + rr[r]);
                else if (has_r)
                    for (std::size_t r = 0; r < s.inner; ++r) row[r] += w * (rr[r] - rc[r]);
                else if (has_l)
                    for (std::size_t r = 0; r < s.inner; ++r) row[r] += w * (rl[r] - rc[r]);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

struct FieldNorms {
    double frobenius = 0.0;    ///< plain Euclidean norm over all entries
    double weighted_l2 = 0.0;  ///< sqrt(prod delta_d) * frobenius
    double max_abs = 0.0;
};

inline FieldNorms norms(const Tensor& x, const GridShape& g) {
    FieldNorms n;
    n.frobenius = std::sqrt(sum_squares(x));
    n.weighted_l2 = std::sqrt(g.cell_volume()) * n.frobenius;
    n.max_abs = max_abs(x);
    return n;
}

inline FieldNorms norms(const StaggeredFieldSet& f) {
    FieldNorms n;
    double sq = sum_squares(f.P);
    n.max_abs = max_abs(f.P);
    for (const Tensor& m : f.M) {
        sq += sum_squares(m);
        n.max_abs = std::max(n.max_abs, max_abs(m));
    }
    n.frobenius = std::sqrt(sq);
    n.weighted_l2 = std::sqrt(f.shape.cell_volume()) * n.frobenius;
    return n;
}

}  // namespace mfp

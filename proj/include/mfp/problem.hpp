/// @file problem.hpp
/// @brief Declarative problem descriptions: density/preference sources that
///        can be sampled onto any grid, so the same problem materializes on
///        every level of a hierarchy.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mfp/analytic.hpp"
#include "mfp/io.hpp"
#include "mfp/multiscale.hpp"
#include "mfp/solver.hpp"

namespace mfp {

struct GaussianBlob {
    std::vector<double> center;  ///< one coordinate per spatial axis
    double sigma = 0.1;
    double weight = 1.0;
};

/// Where a density comes from. Gaussian and image sources are normalized to
/// unit mass by default; OT-exact endpoints sample the reference problem.
///
/// Gaussian sources carry an additive uniform background (a fraction of the
/// blob peak, added before normalization). The solver's convergence theory
/// needs endpoint densities bounded away from zero; with raw Gaussian tails
/// the clamped kinetic gradient near vacuum cells grows like 1/floor^2 and
/// the iteration explodes. A background of about 0.1 keeps every benchmark
/// stable at order-one step sizes.
struct DensitySource {
    enum class Kind { Uniform, Ot1dRho0, Ot1dRho1, Gaussians, Image, Samples };
    Kind kind = Kind::Uniform;
    double uniform_value = 1.0;
    std::vector<GaussianBlob> blobs;
    double background = 0.0;
    std::string path;
    bool normalize = true;
    SpatialField samples;  ///< Kind::Samples only (finest grid)

    static DensitySource uniform(double value = 1.0) {
        DensitySource s;
        s.uniform_value = value;
        return s;
    }

    static DensitySource ot1d(int endpoint) {
        DensitySource s;
        s.kind = endpoint == 0 ? Kind::Ot1dRho0 : Kind::Ot1dRho1;
        return s;
    }

    static DensitySource gaussians(std::vector<GaussianBlob> blobs, double background = 0.1,
                                   bool normalize = true) {
        DensitySource s;
        s.kind = Kind::Gaussians;
        s.blobs = std::move(blobs);
        s.background = background;
        s.normalize = normalize;
        return s;
    }

    static DensitySource image(std::string path, bool normalize = true) {
        DensitySource s;
        s.kind = Kind::Image;
        s.path = std::move(path);
        s.normalize = normalize;
        return s;
    }

    static DensitySource from_samples(SpatialField samples) {
        DensitySource s;
        s.kind = Kind::Samples;
        s.samples = std::move(samples);
        return s;
    }

    SpatialField materialize(const GridShape& g) const;
};

/// Moving-preference field Q >= 0: none, a constant, an axis-aligned box
/// (1 inside, 0 outside) or a thresholded image mask.
struct PreferenceSource {
    enum class Kind { None, Uniform, Box, ImageMask };
    Kind kind = Kind::None;
    double uniform_value = 1.0;
    std::vector<double> box_lo, box_hi;  ///< per spatial axis, in [0,1]
    std::string path;
    double threshold = 0.5;

    static PreferenceSource none() { return {}; }

    static PreferenceSource box(std::vector<double> lo, std::vector<double> hi) {
        PreferenceSource s;
        s.kind = Kind::Box;
        s.box_lo = std::move(lo);
        s.box_hi = std::move(hi);
        return s;
    }

    static PreferenceSource image_mask(std::string path, double threshold = 0.5) {
        PreferenceSource s;
        s.kind = Kind::ImageMask;
        s.path = std::move(path);
        s.threshold = threshold;
        return s;
    }

    SpatialField materialize(const GridShape& g) const;
    bool empty() const { return kind == Kind::None; }
};

/// Terminal preference G (game problems): none, the negated terminal-density
/// source, or an image.
struct TerminalSource {
    enum class Kind { None, NegDensity, Image };
    Kind kind = Kind::None;
    DensitySource density;  ///< NegDensity only
    std::string path;
    bool negate = true;

    static TerminalSource none() { return {}; }

    static TerminalSource neg_density(DensitySource src) {
        TerminalSource s;
        s.kind = Kind::NegDensity;
        s.density = std::move(src);
        return s;
    }

    SpatialField materialize(const GridShape& g) const;
    bool empty() const { return kind == Kind::None; }
};

/// Full declarative problem: sources plus cost-model parameters. Materialize
/// on a grid to obtain a ProblemSpec; planning endpoints are rescaled to a
/// common discrete mass (the terminal one scaled onto the initial one).
struct ProblemDescription {
    InteractionKind kind = InteractionKind::OT;
    bool game = false;
    double lambda_e = 0.0;
    double lambda_q = 0.0;
    double lambda_g = 0.0;
    DensitySource rho0;
    DensitySource rho1;  ///< planning only
    PreferenceSource q;
    TerminalSource g;  ///< game only

    ProblemSpec materialize(const GridShape& grid) const {
        ProblemSpec prob;
        prob.shape = grid;
        prob.rho0 = rho0.materialize(grid);
        if (!game) {
            prob.rho1 = rho1.materialize(grid);
            const double m0 = sum(prob.rho0);
            const double m1 = sum(prob.rho1);
            if (m0 <= 0.0 || m1 <= 0.0)
                throw std::invalid_argument("ProblemDescription: endpoint density has no mass");
            const double scale = m0 / m1;
            for (std::size_t i = 0; i < prob.rho1.size(); ++i) prob.rho1[i] *= scale;
        }
        SpatialField qs = q.empty() ? SpatialField() : q.materialize(grid);
        prob.model = CostModel::make(kind, lambda_e, kind == InteractionKind::OT ? 0.0 : lambda_q,
                                     std::move(qs));
        if (game && !g.empty()) prob.model.with_terminal(lambda_g, g.materialize(grid));
        return prob;
    }

    ProblemMaterializer materializer() const {
        return [desc = *this](const GridShape& g) { return desc.materialize(g); };
    }
};

// ---------------------------------------------------------------------------
// Materializers
// ---------------------------------------------------------------------------

namespace detail {

inline void spatial_center(const GridShape& g, std::size_t flat, std::vector<double>& x) {
    const std::vector<int> sp = g.spatial_shape();
    x.resize(sp.size());
    for (int a = static_cast<int>(sp.size()) - 1; a >= 0; --a) {
        const int n = sp[static_cast<std::size_t>(a)];
        const int j = static_cast<int>(flat % static_cast<std::size_t>(n));
        flat /= static_cast<std::size_t>(n);
        x[static_cast<std::size_t>(a)] = (j + 0.5) / n;
    }
}

inline void normalize_mass(SpatialField& f, const GridShape& g, const std::string& what) {
    const double mass = g.spatial_cell_volume() * sum(f);
    if (mass <= 0.0)
        throw std::invalid_argument("density source '" + what + "' has zero mass, cannot normalize");
    for (std::size_t i = 0; i < f.size(); ++i) f[i] /= mass;
}

}  // namespace detail

inline SpatialField DensitySource::materialize(const GridShape& g) const {
    SpatialField out(g.spatial_shape());
    switch (kind) {
        case Kind::Uniform:
            out.fill(uniform_value);
            break;
        case Kind::Ot1dRho0: {
            if (g.dim() != 1)
                throw std::invalid_argument("DensitySource: reference endpoints are 1D");
            for (int j = 1; j <= g.n(1); ++j)
                out[static_cast<std::size_t>(j - 1)] = (j - 0.5) * g.delta(1) + 0.5;
            break;
        }
        case Kind::Ot1dRho1:
            if (g.dim() != 1)
                throw std::invalid_argument("DensitySource: reference endpoints are 1D");
            out.fill(1.0);
            break;
        case Kind::Gaussians: {
            if (blobs.empty()) throw std::invalid_argument("DensitySource: no Gaussian blobs");
            std::vector<double> x;
            for (std::size_t i = 0; i < out.size(); ++i) {
                detail::spatial_center(g, i, x);
                double v = background;
                for (const GaussianBlob& b : blobs) {
                    if (static_cast<int>(b.center.size()) != g.dim())
                        throw std::invalid_argument("DensitySource: blob center has wrong dimension");
                    double d2 = 0.0;
                    for (std::size_t a = 0; a < x.size(); ++a) {
                        const double d = x[a] - b.center[a];
                        d2 += d * d;
                    }
                    v += b.weight * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
                }
                out[i] = v;
            }
            if (normalize) detail::normalize_mass(out, g, "gaussians");
            break;
        }
        case Kind::Image: {
            if (g.dim() != 2) throw std::invalid_argument("DensitySource: image densities are 2D");
            const io::PgmImage img = io::read_pgm(path);
            out = io::resample_nearest(img, g.n(1), g.n(2));
            if (normalize) detail::normalize_mass(out, g, path);
            break;
        }
        case Kind::Samples: {
            if (samples.shape() == g.spatial_shape()) {
                out = samples;
            } else {
                // coarser grids take the mean over the 2^D children per cell
                SpatialField cur = samples;
                while (cur.shape() != out.shape()) {
                    bool halved = false;
                    std::vector<int> next = cur.shape();
                    for (std::size_t a = 0; a < next.size(); ++a) {
                        if (next[a] > out.shape()[a]) {
                            if (next[a] % 2 != 0)
                                throw std::invalid_argument("DensitySource: samples do not coarsen");
                            next[a] /= 2;
                            halved = true;
                            // two-child mean along this axis
                            Tensor halvedT(next);
                            const AxisSpan so = axis_span(next, static_cast<int>(a));
                            for (std::size_t o = 0; o < so.outer; ++o)
                                for (std::size_t j = 0; j < so.n; ++j)
                                    for (std::size_t r = 0; r < so.inner; ++r) {
                                        const std::size_t src =
                                            (o * so.n * 2 + 2 * j) * so.inner + r;
                                        halvedT[(o * so.n + j) * so.inner + r] =
                                            0.5 * (cur[src] + cur[src + so.inner]);
                                    }
                            cur = std::move(halvedT);
                            break;
                        }
                    }
                    if (!halved) throw std::invalid_argument("DensitySource: samples do not fit grid");
                }
                out = std::move(cur);
            }
            break;
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out[i] < 0.0) throw std::invalid_argument("DensitySource: negative sample");
    return out;
}

inline SpatialField PreferenceSource::materialize(const GridShape& g) const {
    SpatialField out(g.spatial_shape());
    switch (kind) {
        case Kind::None:
            break;
        case Kind::Uniform:
            out.fill(uniform_value);
            break;
        case Kind::Box: {
            if (static_cast<int>(box_lo.size()) != g.dim() ||
                static_cast<int>(box_hi.size()) != g.dim())
                throw std::invalid_argument("PreferenceSource: box bounds have wrong dimension");
            std::vector<double> x;
            for (std::size_t i = 0; i < out.size(); ++i) {
                detail::spatial_center(g, i, x);
                bool inside = true;
                for (std::size_t a = 0; a < x.size(); ++a)
                    inside = inside && x[a] >= box_lo[a] && x[a] <= box_hi[a];
                out[i] = inside ? 1.0 : 0.0;
            }
            break;
        }
        case Kind::ImageMask: {
            if (g.dim() != 2) throw std::invalid_argument("PreferenceSource: image masks are 2D");
            const io::PgmImage img = io::read_pgm(path);
            const Tensor gray = io::resample_nearest(img, g.n(1), g.n(2));
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = gray[i] >= threshold ? 1.0 : 0.0;
            break;
        }
    }
    return out;
}

inline SpatialField TerminalSource::materialize(const GridShape& g) const {
    switch (kind) {
        case Kind::None:
            return SpatialField(g.spatial_shape());
        case Kind::NegDensity: {
            SpatialField f = density.materialize(g);
            for (std::size_t i = 0; i < f.size(); ++i) f[i] = -f[i];
            return f;
        }
        case Kind::Image: {
            if (g.dim() != 2) throw std::invalid_argument("TerminalSource: images are 2D");
            const io::PgmImage img = io::read_pgm(path);
            SpatialField f = io::resample_nearest(img, g.n(1), g.n(2));
            if (negate)
                for (std::size_t i = 0; i < f.size(); ++i) f[i] = -f[i];
            return f;
        }
    }
    return SpatialField(g.spatial_shape());
}

}  // namespace mfp

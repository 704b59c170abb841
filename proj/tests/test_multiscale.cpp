#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mfp/multiscale.hpp"
#include "mfp/problem.hpp"
#include "support/oracles.hpp"

using namespace mfp;

namespace {

// ---------------------------------------------------------------------------
// Independent nearest-neighbor transfer oracle. Works entirely in physical
// coordinates: for every fine point it searches the extended coarse point set
// (interior plus pinned boundary slots) for the argmin-distance set with a
// 1e-12 tie tolerance, then averages; restriction inverts the neighbor map
// with 1/|N| weights.
// ---------------------------------------------------------------------------

struct PointSet {
    // coordinates per point and value lookup index (-1 = pinned slot)
    std::vector<std::vector<double>> coords;
    std::vector<long> value_index;
    std::vector<double> pinned_value;
};

// staggered component: axis `sd` on faces, others central
PointSet enumerate_points(const GridShape& g, int sd, const Tensor& field,
                          const SpatialField* pin_lo, const SpatialField* pin_hi) {
    PointSet ps;
    std::vector<int> ext = field.shape();
    std::vector<int> hi = ext;
    hi[static_cast<std::size_t>(sd)] += 2;  // extended range along the staggered axis
    std::vector<int> j(hi.size(), 1);
    if (field.size() == 0) return ps;
    do {
        std::vector<double> x(hi.size());
        bool pinned_lo = false, pinned_hi = false;
        for (std::size_t a = 0; a < hi.size(); ++a) {
            if (static_cast<int>(a) == sd) {
                const int k = j[a] - 1;  // 0..n along faces incl. boundary slots
                x[a] = k * g.delta(static_cast<int>(a));
                pinned_lo = k == 0;
                pinned_hi = k == hi[a] - 1;
            } else {
                x[a] = (j[a] - 0.5) * g.delta(static_cast<int>(a));
            }
        }
        ps.coords.push_back(x);
        if (pinned_lo || pinned_hi) {
            ps.value_index.push_back(-1);
            double v = 0.0;
            if (pin_lo && pinned_lo) {
                std::vector<int> sp(j.begin() + 1, j.end());
                v = (*pin_lo)[oracle::flat(sp, pin_lo->shape())];
            }
            if (pin_hi && pinned_hi) {
                std::vector<int> sp(j.begin() + 1, j.end());
                v = (*pin_hi)[oracle::flat(sp, pin_hi->shape())];
            }
            ps.pinned_value.push_back(v);
        } else {
            std::vector<int> interior = j;
            interior[static_cast<std::size_t>(sd)] -= 1;
            ps.value_index.push_back(static_cast<long>(oracle::flat(interior, ext)));
            ps.pinned_value.push_back(0.0);
        }
    } while (oracle::advance(j, hi));
    return ps;
}

std::vector<std::vector<std::size_t>> neighbor_sets(const PointSet& fine_pts,
                                                    const PointSet& coarse_pts) {
    std::vector<std::vector<std::size_t>> sets(fine_pts.coords.size());
    for (std::size_t i = 0; i < fine_pts.coords.size(); ++i) {
        double best = 1e300;
        for (const auto& c : coarse_pts.coords) {
            double d2 = 0.0;
            for (std::size_t a = 0; a < c.size(); ++a) {
                const double d = c[a] - fine_pts.coords[i][a];
                d2 += d * d;
            }
            best = std::min(best, d2);
        }
        for (std::size_t k = 0; k < coarse_pts.coords.size(); ++k) {
            double d2 = 0.0;
            for (std::size_t a = 0; a < coarse_pts.coords[k].size(); ++a) {
                const double d = coarse_pts.coords[k][a] - fine_pts.coords[i][a];
                d2 += d * d;
            }
            if (std::sqrt(d2) <= std::sqrt(best) + 1e-12) sets[i].push_back(k);
        }
    }
    return sets;
}

StaggeredFieldSet oracle_prolong(const StaggeredFieldSet& coarse, const BoundaryData& bnd,
                                 const GridShape& fine) {
    StaggeredFieldSet out = StaggeredFieldSet::zeros(fine);
    SpatialField zeros_sp;
    for (int comp = 0; comp <= coarse.shape.dim(); ++comp) {
        const Tensor& cfield = comp == 0 ? coarse.P : coarse.M[static_cast<std::size_t>(comp - 1)];
        Tensor& ffield = comp == 0 ? out.P : out.M[static_cast<std::size_t>(comp - 1)];
        const SpatialField* lo = comp == 0 ? &bnd.rho0 : nullptr;
        const SpatialField* hi = comp == 0 ? &bnd.rho1 : nullptr;
        const PointSet cpts = enumerate_points(coarse.shape, comp, cfield, lo, hi);
        const PointSet fpts = enumerate_points(fine, comp, ffield, nullptr, nullptr);
        // fine INTERIOR points only: re-enumerate without the extension
        std::vector<std::size_t> fine_interior;
        for (std::size_t i = 0; i < fpts.value_index.size(); ++i)
            if (fpts.value_index[i] >= 0) fine_interior.push_back(i);
        const auto sets = neighbor_sets(fpts, cpts);
        for (std::size_t i : fine_interior) {
            double acc = 0.0;
            for (std::size_t k : sets[i]) {
                const long vi = cpts.value_index[k];
                acc += vi >= 0 ? cfield[static_cast<std::size_t>(vi)] : cpts.pinned_value[k];
            }
            ffield[static_cast<std::size_t>(fpts.value_index[i])] =
                acc / static_cast<double>(sets[i].size());
        }
    }
    return out;
}

StaggeredFieldSet oracle_restrict(const StaggeredFieldSet& fine) {
    std::vector<int> n = fine.shape.segments();
    for (int& v : n) v /= 2;
    const GridShape coarse_shape(n);
    StaggeredFieldSet out = StaggeredFieldSet::zeros(coarse_shape);
    for (int comp = 0; comp <= fine.shape.dim(); ++comp) {
        const Tensor& ffield = comp == 0 ? fine.P : fine.M[static_cast<std::size_t>(comp - 1)];
        Tensor& cfield = comp == 0 ? out.P : out.M[static_cast<std::size_t>(comp - 1)];
        const PointSet fpts = enumerate_points(fine.shape, comp, ffield, nullptr, nullptr);
        const PointSet cpts = enumerate_points(coarse_shape, comp, cfield, nullptr, nullptr);
        const auto sets = neighbor_sets(fpts, cpts);  // neighbors of fine in coarse
        std::vector<double> num(cpts.coords.size(), 0.0), den(cpts.coords.size(), 0.0);
        for (std::size_t i = 0; i < fpts.coords.size(); ++i) {
            if (fpts.value_index[i] < 0) continue;
            const double w = 1.0 / static_cast<double>(sets[i].size());
            for (std::size_t k : sets[i]) {
                num[k] += w * ffield[static_cast<std::size_t>(fpts.value_index[i])];
                den[k] += w;
            }
        }
        for (std::size_t k = 0; k < cpts.coords.size(); ++k) {
            if (cpts.value_index[k] < 0) continue;
            cfield[static_cast<std::size_t>(cpts.value_index[k])] = num[k] / den[k];
        }
    }
    return out;
}

ProblemDescription gaussian_benchmark() {
    ProblemDescription d;
    d.kind = InteractionKind::OT;
    d.rho0 = DensitySource::gaussians({{{0.3}, 0.05, 1.0}});
    d.rho1 = DensitySource::gaussians({{{0.7}, 0.05, 1.0}});
    return d;
}

}  // namespace

TEST_CASE("hierarchy construction and validation") {
    const LevelHierarchy h = LevelHierarchy::build(GridShape({16, 64}), 3);
    CHECK(h.shapes[0] == GridShape({16, 64}));
    CHECK(h.shapes[1] == GridShape({8, 32}));
    CHECK(h.shapes[2] == GridShape({4, 16}));
    CHECK_THROWS_AS(LevelHierarchy::build(GridShape({6, 64}), 3), std::invalid_argument);
    CHECK_THROWS_AS(LevelHierarchy::build(GridShape({4, 8}), 3), std::invalid_argument);
}

TEST_CASE("transfers preserve constants and the max principle") {
    std::mt19937 rng(3);
    const GridShape coarse({4, 4});
    const GridShape fine({8, 8});
    const BoundaryData bnd = BoundaryData::planning(coarse, SpatialField({4}, 2.0),
                                                    SpatialField({4}, 2.0));
    StaggeredFieldSet c = StaggeredFieldSet::constant(coarse, 2.0);
    const StaggeredFieldSet f = prolong(c, bnd, fine);
    for (std::size_t i = 0; i < f.P.size(); ++i) CHECK(f.P[i] == doctest::Approx(2.0));
    // flux prolongation averages in the pinned zero boundary at wall-adjacent
    // faces, so constants are preserved in the interior rows only; the
    // outputs stay inside [min(values plus pins), max(values plus pins)]
    for (std::size_t i = 0; i < f.M[0].size(); ++i) {
        CHECK(f.M[0][i] >= 0.0 - 1e-15);
        CHECK(f.M[0][i] <= 2.0 + 1e-15);
    }
    const StaggeredFieldSet back = restrict(f);
    for (std::size_t i = 0; i < back.P.size(); ++i) CHECK(back.P[i] == doctest::Approx(2.0));

    const StaggeredFieldSet rnd = oracle::random_fields(GridShape({8, 8}), rng, FieldLayout::Mfp,
                                                        -1.5, 2.5);
    const StaggeredFieldSet rc = restrict(rnd);
    CHECK(min_value(rc.P) >= min_value(rnd.P) - 1e-14);
    CHECK(max_value(rc.P) <= max_value(rnd.P) + 1e-14);
}

TEST_CASE("prolongation outputs stay in the hull of inputs and pins") {
    std::mt19937 rng(31);
    const GridShape coarse({4, 4});
    const GridShape fine({8, 8});
    SpatialField r0 = oracle::random_tensor(coarse.spatial_shape(), rng, 0.2, 1.3);
    SpatialField r1 = oracle::random_tensor(coarse.spatial_shape(), rng, 0.2, 1.3);
    const BoundaryData bnd = BoundaryData::planning(coarse, r0, r1);
    const StaggeredFieldSet c = oracle::random_fields(coarse, rng, FieldLayout::Mfp, -2.0, 3.0);
    const StaggeredFieldSet f = prolong(c, bnd, fine);
    const double plo = std::min({min_value(c.P), min_value(r0), min_value(r1)});
    const double phi = std::max({max_value(c.P), max_value(r0), max_value(r1)});
    for (std::size_t i = 0; i < f.P.size(); ++i) {
        CHECK(f.P[i] >= plo - 1e-14);
        CHECK(f.P[i] <= phi + 1e-14);
    }
    const double mlo = std::min(min_value(c.M[0]), 0.0);  // zero flux pins
    const double mhi = std::max(max_value(c.M[0]), 0.0);
    for (std::size_t i = 0; i < f.M[0].size(); ++i) {
        CHECK(f.M[0][i] >= mlo - 1e-14);
        CHECK(f.M[0][i] <= mhi + 1e-14);
    }
}

TEST_CASE("prolongation matches the geometric nearest-neighbor oracle") {
    std::mt19937 rng(11);
    for (const auto& cshape : {std::vector<int>{2, 2}, {4, 4}, {2, 4}, {2, 2, 2}}) {
        const GridShape coarse(cshape);
        std::vector<int> fshape = cshape;
        for (int& v : fshape) v *= 2;
        const GridShape fine(fshape);
        SpatialField r0 = oracle::random_tensor(coarse.spatial_shape(), rng, 0.1, 1.0);
        SpatialField r1 = oracle::random_tensor(coarse.spatial_shape(), rng, 0.1, 1.0);
        const BoundaryData bnd = BoundaryData::planning(coarse, r0, r1);
        const StaggeredFieldSet c = oracle::random_fields(coarse, rng);
        const StaggeredFieldSet got = prolong(c, bnd, fine);
        const StaggeredFieldSet want = oracle_prolong(c, bnd, fine);
        CHECK(norms(linear_combination(1.0, got, -1.0, want)).max_abs <= 1e-13);
    }
}

TEST_CASE("restriction matches the transposed-neighbor oracle") {
    std::mt19937 rng(13);
    for (const auto& fshape : {std::vector<int>{4, 4}, {8, 8}, {4, 8}, {4, 4, 4}}) {
        const GridShape fine(fshape);
        const StaggeredFieldSet f = oracle::random_fields(fine, rng);
        const StaggeredFieldSet got = restrict(f);
        const StaggeredFieldSet want = oracle_restrict(f);
        CHECK(norms(linear_combination(1.0, got, -1.0, want)).max_abs <= 1e-13);
    }
}

TEST_CASE("restrict-prolong composition agrees with the oracle composition") {
    std::mt19937 rng(17);
    const GridShape coarse({2, 2});
    const GridShape fine({4, 4});
    SpatialField zero_bnd(coarse.spatial_shape());  // interior-only support
    const BoundaryData bnd = BoundaryData::planning(coarse, zero_bnd, zero_bnd);
    const StaggeredFieldSet c = oracle::random_fields(coarse, rng);
    const StaggeredFieldSet rp_impl = restrict(prolong(c, bnd, fine));
    const StaggeredFieldSet rp_oracle = oracle_restrict(oracle_prolong(c, bnd, fine));
    CHECK(norms(linear_combination(1.0, rp_impl, -1.0, rp_oracle)).max_abs <= 1e-13);
}

TEST_CASE("single-level multilevel run is bitwise identical to the flat solve") {
    const ProblemDescription d = gaussian_benchmark();
    const GridShape g({16, 64});
    SolverConfig cfg;
    cfg.tol = 1e-4;
    cfg.max_iters = 3000;
    cfg.record_every = 10;
    const SolveReport plain = solve_mfp(d.materialize(g), cfg);
    const SolveReport ml = ml_fista(d.materializer(), cfg, LevelHierarchy::build(g, 1));
    REQUIRE(plain.iterations == ml.iterations);
    REQUIRE(plain.trace_objective.size() == ml.trace_objective.size());
    for (std::size_t i = 0; i < plain.trace_objective.size(); ++i) {
        CHECK(plain.trace_objective[i] == ml.trace_objective[i]);  // bitwise
        CHECK(plain.trace_feasibility[i] == ml.trace_feasibility[i]);
    }
    CHECK(norms(linear_combination(1.0, plain.fields, -1.0, ml.fields)).max_abs == 0.0);
}

TEST_CASE("multilevel run: final quality matches the flat solve, fewer fine iterations") {
    const ProblemDescription d = gaussian_benchmark();
    const GridShape g({64, 256});
    SolverConfig cfg;
    cfg.tol = 1e-4;
    cfg.max_iters = 20000;
    cfg.record_every = 100;
    const SolveReport plain = solve_mfp(d.materialize(g), cfg);
    const SolveReport ml = ml_fista(d.materializer(), cfg, LevelHierarchy::build(g, 3));
    REQUIRE(plain.converged);
    REQUIRE(ml.converged);
    CHECK(std::abs(ml.final_objective - plain.final_objective) <= 2.0 * cfg.tol);

    // warm starts cannot be worse than cold at equal tol on the finest level
    long ml_finest = 0;
    for (std::size_t i = 0; i < ml.trace_level.size(); ++i)
        if (ml.trace_level[i] == 1) ml_finest = std::max(ml_finest, ml.trace_iter[i] );
    long ml_coarse_total = 0;
    for (std::size_t i = 0; i < ml.trace_level.size(); ++i)
        if (ml.trace_level[i] > 1) ml_coarse_total = std::max(ml_coarse_total, ml.trace_iter[i]);
    CHECK(ml_finest - ml_coarse_total <= plain.iterations);

    // final feasibility at solver precision
    const ProblemSpec p = d.materialize(g);
    CentralField resid = divergence(ml.fields);
    axpy(1.0, p.boundary().div_term(), resid);
    CHECK(norms(resid, g).frobenius <= 1e-10 * (1.0 + norms(ml.fields).frobenius));

    // mass residue at machine precision on the way out
    CHECK(ml.max_mass <= 1e-12);
}

TEST_CASE("multigrid run: printed schedule, mass exactness, degenerate forms") {
    const ProblemDescription d = gaussian_benchmark();
    const GridShape g({64, 256});
    SolverConfig cfg;
    cfg.tol = 1e-4;
    cfg.max_iters = 20000;
    cfg.record_every = 100;
    const SolveReport mg = mg_fista(d.materializer(), cfg, LevelHierarchy::build(g, 3), 5);
    CHECK(mg.converged);
    CHECK(mg.max_mass <= 1e-12);
    // the final additive correction keeps per-slice mass exact even though
    // it is not a projection
    const ProblemSpec p = d.materialize(g);
    CHECK(mass_residue(mg.fields, p.boundary()) <= 1e-12);

    // L = 1 degenerates to K smoothing iterations plus the plain solve
    SolverConfig quick = cfg;
    quick.tol = 1e-3;
    const SolveReport one = mg_fista(d.materializer(), quick, LevelHierarchy::build(g, 1), 5);
    const SolveReport plain = solve_mfp(d.materialize(g), quick);
    CHECK(one.converged);
    CHECK(std::abs(one.final_objective - plain.final_objective) <= 2.0 * quick.tol);
}

TEST_CASE("correction step vanishes when the prolonged coarse point is fixed") {
    // uniform problem: the flat field with zero flux is an exact fixed point
    // of Solve at every level, so fine + Solve(Pro(coarse)) - Pro(coarse)
    // returns the pre-smoothed fine field unchanged
    ProblemDescription d;
    d.kind = InteractionKind::OT;
    d.rho0 = DensitySource::uniform(1.0);
    d.rho1 = DensitySource::uniform(1.0);
    const GridShape fine({8, 8});
    const GridShape coarse({4, 4});
    const ProblemSpec pc = d.materialize(coarse);
    const ProblemSpec pf = d.materialize(fine);

    StaggeredFieldSet copt = StaggeredFieldSet::constant(coarse, 1.0);
    for (auto& m : copt.M) m.fill(0.0);
    const StaggeredFieldSet pro = prolong(copt, pc.boundary(), fine);

    SolverConfig cfg;
    cfg.tol = 1e-12;
    cfg.max_iters = 10;
    const SolveReport post = solve_mfp(pf, cfg, &pro);
    CHECK(post.converged);
    CHECK(post.iterations == 1);  // fixed point: first iterate change is zero
    const StaggeredFieldSet correction =
        linear_combination(1.0, post.fields, -1.0, pro);
    CHECK(norms(correction).max_abs <= 1e-14);
}

/// @file cli.hpp
/// @brief Config-driven front end: run a solve and emit artifacts, reproduce
///        the 1D convergence study, and benchmark solver variants.
///
/// Artifacts of a run, under the output directory:
///   rho_t<t>.csv    density slice nearest each requested snapshot time
///   rho_t<t>.pgm    optional heatmap (2D problems)
///   diagnostics.csv iter,level,objective,stationarity,feasibility,mass,
///                   min_density,elapsed_s (elapsed_s is the only
///                   non-deterministic column)
///   summary.txt     human-readable summary
///   summary.kv      the same, strict key=value
///
/// The study and bench commands emit table.csv/table.md and
/// bench.csv/bench.md in the same spirit.

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mfp/analytic.hpp"
#include "mfp/config.hpp"
#include "mfp/io.hpp"
#include "mfp/multiscale.hpp"
#include "mfp/problem.hpp"
#include "mfp/solver.hpp"

namespace mfp::cli {

/// Spatial density samples from a PGM file, nearest-neighbor resampled onto
/// the grid. `normalize` rescales to unit mass (zero-mass images are an
/// error); `mask` thresholds at 0.5 instead (obstacle masks).
inline SpatialField load_image_density(const std::string& path, const GridShape& g,
                                       bool normalize = true, bool mask = false) {
    if (mask) return PreferenceSource::image_mask(path).materialize(g);
    return DensitySource::image(path, normalize).materialize(g);
}

namespace detail {

inline std::string snapshot_name(double t, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "rho_t%.6f.%s", t, ext);
    return buf;
}

/// Central time-slice index nearest to t (slices sit at (j-1/2)*delta0).
inline int snapshot_slice(double t, const GridShape& g) {
    const int n0 = g.n(0);
    int best = 1;
    double best_d = 1e300;
    for (int j = 1; j <= n0; ++j) {
        const double d = std::abs((j - 0.5) * g.delta(0) - t);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best - 1;  // 0-based
}

inline Tensor central_slice(const CentralField& rho, const GridShape& g, int slice0) {
    Tensor out(g.spatial_shape());
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) out[i] = rho[static_cast<std::size_t>(slice0) * n + i];
    return out;
}

inline void write_diagnostics(const std::string& path, const SolveReport& rep) {
    io::CsvWriter csv(path);
    csv.header({"iter", "level", "objective", "stationarity", "feasibility", "mass",
                "min_density", "elapsed_s"});
    for (std::size_t i = 0; i < rep.trace_iter.size(); ++i)
        csv.row({static_cast<double>(rep.trace_iter[i]), static_cast<double>(rep.trace_level[i]),
                 rep.trace_objective[i], rep.trace_stationarity[i], rep.trace_feasibility[i],
                 rep.trace_mass[i], rep.trace_min_density[i], rep.trace_seconds[i]});
}

inline void write_summary(const std::string& dir, const SolveReport& rep, const RunConfig& cfg,
                          const ProblemSpec& prob) {
    const bool ot = prob.model.kind == InteractionKind::OT && !prob.is_game();
    std::ofstream txt(dir + "/summary.txt");
    std::ofstream kv(dir + "/summary.kv");
    auto emit = [&](const std::string& key, const std::string& value) {
        txt << "  " << key << ": " << value << "\n";
        kv << key << "=" << value << "\n";
    };
    txt << "solve summary (" << cfg.shape().to_string() << ")\n";
    emit("converged", rep.converged ? "true" : "false");
    emit("aborted", rep.abort_reason.empty() ? "no" : rep.abort_reason);
    emit("iterations", std::to_string(rep.iterations));
    emit("wall_seconds", io::format_full(rep.wall_seconds));
    emit("final_objective", io::format_full(rep.final_objective));
    if (ot) emit("w2sq_estimate", io::format_full(2.0 * rep.final_objective));
    emit("final_delta", io::format_full(rep.final_delta));
    emit("max_feasibility", io::format_full(rep.max_feasibility));
    emit("max_mass", io::format_full(rep.max_mass));
    emit("clamp_events", std::to_string(rep.clamp_events));
    emit("compat_warnings", std::to_string(rep.compat_warnings));
}

inline StaggeredFieldSet random_init(const ProblemSpec& prob, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(0.5, 1.5);
    StaggeredFieldSet f = StaggeredFieldSet::zeros(prob.shape, prob.layout());
    for (std::size_t i = 0; i < f.P.size(); ++i) f.P[i] = dist(rng);
    for (auto& m : f.M)
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = dist(rng);
    return f;
}

inline SolveReport dispatch(const RunConfig& cfg, const ProblemSpec& prob, unsigned seed) {
    switch (cfg.variant) {
        case SolverVariant::MlFista:
            return ml_fista(cfg.problem.materializer(), cfg.solver,
                            LevelHierarchy::build(cfg.shape(), cfg.levels));
        case SolverVariant::MgFista:
            return mg_fista(cfg.problem.materializer(), cfg.solver,
                            LevelHierarchy::build(cfg.shape(), cfg.levels), cfg.presmooth);
        case SolverVariant::Fista:
        default: {
            StaggeredFieldSet init;
            const StaggeredFieldSet* initp = nullptr;
            if (cfg.random_init) {
                init = random_init(prob, seed);
                initp = &init;
            }
            return prob.is_game() ? solve_mfg(prob, cfg.solver, initp)
                                  : solve_mfp(prob, cfg.solver, initp);
        }
    }
}

}  // namespace detail

/// Runs one configured solve and writes all artifacts. Returns 0 on a clean
/// (converged or cap-limited) run, 2 when the solver aborted; partial
/// diagnostics are retained either way.
inline int run(const RunConfig& cfg, const std::string& out_override = "", unsigned seed = 0) {
    const std::string dir = out_override.empty() ? cfg.out_dir : out_override;
    std::filesystem::create_directories(dir);
    const ProblemSpec prob = cfg.problem.materialize(cfg.shape());
    const SolveReport rep = detail::dispatch(cfg, prob, seed);

    detail::write_diagnostics(dir + "/diagnostics.csv", rep);
    detail::write_summary(dir, rep, cfg, prob);

    const BoundaryData bnd = prob.boundary();
    const CentralField rho = average_to_center(rep.fields, bnd).rho;
    for (double t : cfg.snapshots) {
        const int slice = detail::snapshot_slice(t, prob.shape);
        const Tensor s = detail::central_slice(rho, prob.shape, slice);
        io::write_density_slice(dir + "/" + detail::snapshot_name(t, "csv"), s);
        if (cfg.write_pgm && s.rank() == 2)
            io::write_pgm(dir + "/" + detail::snapshot_name(t, "pgm"), s);
    }
    return rep.abort_reason.empty() ? 0 : 2;
}

// ---------------------------------------------------------------------------
// Convergence study
// ---------------------------------------------------------------------------

struct StudyRow {
    GridShape shape;
    double e2 = 0.0, einf = 0.0, w2sq_err = 0.0;
    double e2_order = 0.0, einf_order = 0.0, w2sq_order = 0.0;
    long iterations = 0;
    double seconds = 0.0;
};

/// Runs the 1D reference transport over a grid ladder and measures the
/// weighted-l2 / sup field errors against the closed-form solution and the
/// W2^2 estimate error (twice the kinetic objective vs 1/120), with
/// empirical orders between consecutive rungs.
inline std::vector<StudyRow> convergence_study_rows(const RunConfig& base,
                                                    const std::vector<GridShape>& grids) {
    if (base.problem.kind != InteractionKind::OT || base.problem.game ||
        base.problem.rho0.kind != DensitySource::Kind::Ot1dRho0 ||
        base.problem.rho1.kind != DensitySource::Kind::Ot1dRho1)
        throw std::invalid_argument(
            "convergence_study: config must be the 1D reference transport "
            "(kind = ot, rho0 = ot1d-rho0, rho1 = ot1d-rho1)");
    std::vector<StudyRow> rows;
    for (const GridShape& g : grids) {
        if (g.dim() != 1) throw std::invalid_argument("convergence_study: 1D grids only");
        ProblemSpec prob = base.problem.materialize(g);
        const SolveReport rep = solve_mfp(prob, base.solver);
        StudyRow row;
        row.shape = g;
        const StaggeredFieldSet exact = analytic::sample_exact_fields(g);
        const StaggeredFieldSet err = linear_combination(1.0, rep.fields, -1.0, exact);
        const FieldNorms en = norms(err);
        row.e2 = en.weighted_l2;
        row.einf = en.max_abs;
        row.w2sq_err = std::abs(2.0 * rep.final_objective - analytic::exact_w2sq());
        row.iterations = rep.iterations;
        row.seconds = rep.wall_seconds;
        if (!rows.empty()) {
            row.e2_order = std::log2(rows.back().e2 / row.e2);
            row.einf_order = std::log2(rows.back().einf / row.einf);
            row.w2sq_order = std::log2(rows.back().w2sq_err / row.w2sq_err);
        }
        rows.push_back(row);
    }
    return rows;
}

inline int convergence_study(const RunConfig& base, const std::vector<GridShape>& grids,
                             const std::string& out_override = "") {
    const std::vector<StudyRow> rows = convergence_study_rows(base, grids);
    const std::string dir = out_override.empty() ? base.out_dir : out_override;
    std::filesystem::create_directories(dir);
    {
        io::CsvWriter csv(dir + "/table.csv");
        csv.header({"n0", "n1", "e2", "e2_order", "einf", "einf_order", "w2sq_err",
                    "w2sq_order", "iterations", "seconds"});
        for (const StudyRow& r : rows)
            csv.row({static_cast<double>(r.shape.n(0)), static_cast<double>(r.shape.n(1)), r.e2,
                     r.e2_order, r.einf, r.einf_order, r.w2sq_err, r.w2sq_order,
                     static_cast<double>(r.iterations), r.seconds});
    }
    std::ofstream md(dir + "/table.md");
    md << "| delta0 | delta1 | ||E||_2 | order | ||E||_inf | order | W2^2 err | order |\n";
    md << "|---|---|---|---|---|---|---|---|\n";
    char buf[256];
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const StudyRow& r = rows[i];
        if (i == 0)
            std::snprintf(buf, sizeof buf,
                          "| 1/%d | 1/%d | %.2e | | %.2e | | %.2e | |\n", r.shape.n(0),
                          r.shape.n(1), r.e2, r.einf, r.w2sq_err);
        else
            std::snprintf(buf, sizeof buf,
                          "| 1/%d | 1/%d | %.2e | %.2f | %.2e | %.2f | %.2e | %.2f |\n",
                          r.shape.n(0), r.shape.n(1), r.e2, r.e2_order, r.einf, r.einf_order,
                          r.w2sq_err, r.w2sq_order);
        md << buf;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Bench
// ---------------------------------------------------------------------------

struct BenchVariant {
    SolverVariant variant = SolverVariant::Fista;
    long presmooth = 0;
    std::string label;
};

inline BenchVariant parse_variant(const std::string& s) {
    BenchVariant v;
    v.label = s;
    if (s == "fista") {
        v.variant = SolverVariant::Fista;
    } else if (s == "mlfista") {
        v.variant = SolverVariant::MlFista;
    } else if (s.rfind("mgfista", 0) == 0) {
        v.variant = SolverVariant::MgFista;
        v.presmooth = 5;
        const std::size_t colon = s.find(':');
        if (colon != std::string::npos) v.presmooth = std::stol(s.substr(colon + 1));
    } else {
        throw std::invalid_argument("unknown bench variant '" + s + "'");
    }
    return v;
}

struct BenchRow {
    std::string label;
    long iterations = 0;
    double seconds = 0.0;
    Residues residues;
    double objective = 0.0;
};

/// Runs each variant on the same problem and tolerance, sequentially for
/// fair timing, and reports iterations, seconds and the three residues.
inline std::vector<BenchRow> bench_rows(const RunConfig& base,
                                        const std::vector<BenchVariant>& variants) {
    std::vector<BenchRow> rows;
    const ProblemSpec prob = base.problem.materialize(base.shape());
    const BoundaryData bnd = prob.boundary();
    const SpectralPlan plan(prob.shape, prob.poisson_variant());
    for (const BenchVariant& v : variants) {
        RunConfig cfg = base;
        cfg.variant = v.variant;
        if (v.variant == SolverVariant::MgFista) cfg.presmooth = v.presmooth;
        const SolveReport rep = detail::dispatch(cfg, prob, 0);
        BenchRow row;
        row.label = v.label;
        row.iterations = rep.iterations;
        row.seconds = rep.wall_seconds;
        row.objective = rep.final_objective;
        row.residues = residues(rep.fields, bnd, prob.model, cfg.solver.step.eta, plan,
                                cfg.solver.density_floor);
        rows.push_back(row);
    }
    return rows;
}

inline int bench(const RunConfig& base, const std::vector<BenchVariant>& variants,
                 const std::string& out_override = "") {
    const std::vector<BenchRow> rows = bench_rows(base, variants);
    const std::string dir = out_override.empty() ? base.out_dir : out_override;
    std::filesystem::create_directories(dir);
    {
        io::CsvWriter csv(dir + "/bench.csv");
        csv.header({"variant", "iterations", "seconds", "stationarity", "feasibility", "mass",
                    "objective"});
        for (const BenchRow& r : rows) {
            csv.out << r.label << ",";
            csv.row({static_cast<double>(r.iterations), r.seconds, r.residues.stationarity,
                     r.residues.feasibility, r.residues.mass, r.objective});
        }
    }
    std::ofstream md(dir + "/bench.md");
    md << "| variant | iters | time (s) | stationarity | feasibility | mass |\n";
    md << "|---|---|---|---|---|---|\n";
    char buf[256];
    for (const BenchRow& r : rows) {
        std::snprintf(buf, sizeof buf, "| %s | %ld | %.3f | %.2e | %.2e | %.2e |\n",
                      r.label.c_str(), r.iterations, r.seconds, r.residues.stationarity,
                      r.residues.feasibility, r.residues.mass);
        md << buf;
    }
    return 0;
}

}  // namespace mfp::cli

/// @file config.hpp
/// @brief Flat key-value run configuration with [problem] / [solver] /
///        [output] sections.
///
/// Grammar: '#' starts a comment, '[name]' opens a section, 'key = value'
/// assigns inside a section. Unknown sections or keys and malformed values
/// are reported with their line number. Density sources:
///
///   uniform [V]
///   ot1d-rho0 | ot1d-rho1
///   gaussian <center, one per axis> <sigma> <weight> [+ gaussian ...]
///   image PATH [raw]            (raw skips unit-mass normalization)
///
/// Q sources: none | uniform V | box lo1 hi1 [lo2 hi2] | image PATH [THRESH].
/// G sources: none | neg-rho1 | image PATH.

#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfp/problem.hpp"
#include "mfp/solver.hpp"

namespace mfp {

enum class SolverVariant { Fista, MlFista, MgFista };

struct RunConfig {
    // [problem]
    std::vector<int> grid;
    ProblemDescription problem;
    double gaussian_background = 0.1;
    // [solver]
    SolverVariant variant = SolverVariant::Fista;
    SolverConfig solver;
    int levels = 1;
    long presmooth = 5;
    bool random_init = false;
    // [output]
    std::string out_dir = "out";
    std::vector<double> snapshots = {0.0, 0.25, 0.5, 0.75, 1.0};
    bool write_pgm = false;

    GridShape shape() const { return GridShape(grid); }
};

namespace detail {

struct ConfigError : std::runtime_error {
    ConfigError(int line, const std::string& what)
        : std::runtime_error("config line " + std::to_string(line) + ": " + what) {}
};

inline std::vector<std::string> tokens(const std::string& s) {
    std::stringstream ss(s);
    std::vector<std::string> out;
    std::string t;
    while (ss >> t) out.push_back(t);
    return out;
}

inline double to_double(const std::string& s, int line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(line, "expected a number, got '" + s + "'");
    }
}

inline long to_long(const std::string& s, int line) {
    try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(line, "expected an integer, got '" + s + "'");
    }
}

inline bool to_bool(const std::string& s, int line) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(line, "expected a boolean, got '" + s + "'");
}

inline DensitySource parse_density(const std::vector<std::string>& tok, int line, int dim,
                                   double background) {
    if (tok.empty()) throw ConfigError(line, "empty density source");
    if (tok[0] == "uniform") {
        if (tok.size() > 2) throw ConfigError(line, "uniform takes at most one value");
        return DensitySource::uniform(tok.size() == 2 ? to_double(tok[1], line) : 1.0);
    }
    if (tok[0] == "ot1d-rho0") return DensitySource::ot1d(0);
    if (tok[0] == "ot1d-rho1") return DensitySource::ot1d(1);
    if (tok[0] == "gaussian") {
        std::vector<GaussianBlob> blobs;
        std::size_t i = 0;
        while (i < tok.size()) {
            if (tok[i] != "gaussian") throw ConfigError(line, "expected 'gaussian', got '" + tok[i] + "'");
            ++i;
            if (i + dim + 1 >= tok.size() + 0 && tok.size() - i < static_cast<std::size_t>(dim) + 2)
                throw ConfigError(line, "gaussian needs center per axis, sigma and weight");
            GaussianBlob b;
            for (int a = 0; a < dim; ++a) b.center.push_back(to_double(tok[i++], line));
            b.sigma = to_double(tok[i++], line);
            b.weight = to_double(tok[i++], line);
            if (b.sigma <= 0.0) throw ConfigError(line, "gaussian sigma must be > 0");
            blobs.push_back(std::move(b));
            if (i < tok.size()) {
                if (tok[i] != "+") throw ConfigError(line, "expected '+' between gaussians");
                ++i;
            }
        }
        return DensitySource::gaussians(std::move(blobs), background);
    }
    if (tok[0] == "image") {
        if (tok.size() < 2) throw ConfigError(line, "image needs a path");
        bool normalize = true;
        if (tok.size() == 3) {
            if (tok[2] != "raw") throw ConfigError(line, "unknown image flag '" + tok[2] + "'");
            normalize = false;
        } else if (tok.size() > 3) {
            throw ConfigError(line, "too many image arguments");
        }
        return DensitySource::image(tok[1], normalize);
    }
    throw ConfigError(line, "unknown density source '" + tok[0] + "'");
}

inline PreferenceSource parse_preference(const std::vector<std::string>& tok, int line, int dim) {
    if (tok.empty() || tok[0] == "none") return PreferenceSource::none();
    if (tok[0] == "uniform") {
        if (tok.size() != 2) throw ConfigError(line, "uniform preference needs one value");
        PreferenceSource s;
        s.kind = PreferenceSource::Kind::Uniform;
        s.uniform_value = to_double(tok[1], line);
        return s;
    }
    if (tok[0] == "box") {
        if (static_cast<int>(tok.size()) != 1 + 2 * dim)
            throw ConfigError(line, "box needs lo/hi per spatial axis");
        std::vector<double> lo, hi;
        for (int a = 0; a < dim; ++a) {
            lo.push_back(to_double(tok[1 + 2 * a], line));
            hi.push_back(to_double(tok[2 + 2 * a], line));
        }
        return PreferenceSource::box(std::move(lo), std::move(hi));
    }
    if (tok[0] == "image") {
        if (tok.size() < 2 || tok.size() > 3) throw ConfigError(line, "image mask: PATH [THRESH]");
        return PreferenceSource::image_mask(tok[1],
                                            tok.size() == 3 ? to_double(tok[2], line) : 0.5);
    }
    throw ConfigError(line, "unknown preference source '" + tok[0] + "'");
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
    using detail::ConfigError;
    RunConfig cfg;
    std::string section;
    std::string line;
    int lineno = 0;
    std::string rho0_spec = "uniform", rho1_spec = "uniform", q_spec = "none", g_spec = "none";
    int rho0_line = 0, rho1_line = 0, q_line = 0, g_line = 0;
    std::string step_kind = "constant";
    double eta = 0.1, shrink = 0.5, eta_max = 0.0;
    int step_line = 0;

    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::vector<std::string> tok = detail::tokens(line);
        if (tok.empty()) continue;
        if (tok.size() == 1 && tok[0].size() > 2 && tok[0].front() == '[' && tok[0].back() == ']') {
            section = tok[0].substr(1, tok[0].size() - 2);
            if (section != "problem" && section != "solver" && section != "output")
                throw ConfigError(lineno, "unknown section [" + section + "]");
            continue;
        }
        if (tok.size() < 3 || tok[1] != "=")
            throw ConfigError(lineno, "expected 'key = value'");
        const std::string& key = tok[0];
        std::vector<std::string> val(tok.begin() + 2, tok.end());
        auto one = [&]() -> const std::string& {
            if (val.size() != 1) throw ConfigError(lineno, "'" + key + "' takes one value");
            return val[0];
        };
        std::string joined;
        for (const auto& v : val) joined += (joined.empty() ? "" : " ") + v;

        if (section == "problem") {
            if (key == "kind") {
                const std::string& k = one();
                if (k == "ot") cfg.problem.kind = InteractionKind::OT;
                else if (k == "entropy") cfg.problem.kind = InteractionKind::Entropy;
                else if (k == "quadratic") cfg.problem.kind = InteractionKind::Quadratic;
                else if (k == "reciprocal") cfg.problem.kind = InteractionKind::Reciprocal;
                else throw ConfigError(lineno, "unknown cost kind '" + k + "'");
            } else if (key == "game") {
                cfg.problem.game = detail::to_bool(one(), lineno);
            } else if (key == "grid") {
                cfg.grid.clear();
                for (const auto& v : val) {
                    const long n = detail::to_long(v, lineno);
                    if (n < 1) throw ConfigError(lineno, "grid extents must be >= 1");
                    cfg.grid.push_back(static_cast<int>(n));
                }
                if (cfg.grid.size() < 2 || cfg.grid.size() > 3)
                    throw ConfigError(lineno, "grid needs n0 n1 [n2]");
            } else if (key == "lambda_e") {
                cfg.problem.lambda_e = detail::to_double(one(), lineno);
            } else if (key == "lambda_q") {
                cfg.problem.lambda_q = detail::to_double(one(), lineno);
            } else if (key == "lambda_g") {
                cfg.problem.lambda_g = detail::to_double(one(), lineno);
            } else if (key == "background") {
                cfg.gaussian_background = detail::to_double(one(), lineno);
            } else if (key == "rho0") {
                rho0_spec = joined;
                rho0_line = lineno;
            } else if (key == "rho1") {
                rho1_spec = joined;
                rho1_line = lineno;
            } else if (key == "q") {
                q_spec = joined;
                q_line = lineno;
            } else if (key == "g") {
                g_spec = joined;
                g_line = lineno;
            } else {
                throw ConfigError(lineno, "unknown [problem] key '" + key + "'");
            }
        } else if (section == "solver") {
            if (key == "variant") {
                const std::string& v = one();
                if (v == "fista") cfg.variant = SolverVariant::Fista;
                else if (v == "mlfista") cfg.variant = SolverVariant::MlFista;
                else if (v == "mgfista") cfg.variant = SolverVariant::MgFista;
                else throw ConfigError(lineno, "unknown variant '" + v + "'");
            } else if (key == "eta") {
                eta = detail::to_double(one(), lineno);
                step_line = lineno;
            } else if (key == "step") {
                step_kind = val[0];
                step_line = lineno;
                if (step_kind == "backtracking") {
                    if (val.size() >= 2) shrink = detail::to_double(val[1], lineno);
                    if (val.size() >= 3) eta_max = detail::to_double(val[2], lineno);
                    if (val.size() > 3) throw ConfigError(lineno, "step = backtracking [SHRINK [ETA_MAX]]");
                } else if (step_kind != "constant" || val.size() != 1) {
                    throw ConfigError(lineno, "step = constant | backtracking [SHRINK [ETA_MAX]]");
                }
            } else if (key == "tol") {
                cfg.solver.tol = detail::to_double(one(), lineno);
            } else if (key == "max_iters") {
                cfg.solver.max_iters = detail::to_long(one(), lineno);
            } else if (key == "density_floor") {
                cfg.solver.density_floor = detail::to_double(one(), lineno);
            } else if (key == "record_every") {
                cfg.solver.record_every = detail::to_long(one(), lineno);
                if (cfg.solver.record_every < 1)
                    throw ConfigError(lineno, "record_every must be >= 1");
            } else if (key == "restart") {
                cfg.solver.momentum_restart = detail::to_bool(one(), lineno);
            } else if (key == "levels") {
                cfg.levels = static_cast<int>(detail::to_long(one(), lineno));
            } else if (key == "presmooth") {
                cfg.presmooth = detail::to_long(one(), lineno);
            } else if (key == "init") {
                const std::string& v = one();
                if (v == "random") cfg.random_init = true;
                else if (v == "ones") cfg.random_init = false;
                else throw ConfigError(lineno, "init = ones | random");
            } else {
                throw ConfigError(lineno, "unknown [solver] key '" + key + "'");
            }
        } else if (section == "output") {
            if (key == "dir") {
                cfg.out_dir = one();
            } else if (key == "snapshots") {
                cfg.snapshots.clear();
                for (const auto& v : val) cfg.snapshots.push_back(detail::to_double(v, lineno));
            } else if (key == "pgm") {
                cfg.write_pgm = detail::to_bool(one(), lineno);
            } else {
                throw ConfigError(lineno, "unknown [output] key '" + key + "'");
            }
        } else {
            throw ConfigError(lineno, "key outside any section");
        }
    }

    if (cfg.grid.empty()) throw ConfigError(lineno, "missing [problem] grid");
    const int dim = static_cast<int>(cfg.grid.size()) - 1;
    cfg.problem.rho0 =
        detail::parse_density(detail::tokens(rho0_spec), rho0_line, dim, cfg.gaussian_background);
    if (!cfg.problem.game)
        cfg.problem.rho1 = detail::parse_density(detail::tokens(rho1_spec), rho1_line, dim,
                                                 cfg.gaussian_background);
    cfg.problem.q = detail::parse_preference(detail::tokens(q_spec), q_line, dim);
    {
        const std::vector<std::string> gt = detail::tokens(g_spec);
        if (gt.empty() || gt[0] == "none") {
            cfg.problem.g = TerminalSource::none();
        } else if (gt[0] == "neg-rho1") {
            cfg.problem.g = TerminalSource::neg_density(detail::parse_density(
                detail::tokens(rho1_spec), rho1_line, dim, cfg.gaussian_background));
        } else if (gt[0] == "image") {
            if (gt.size() != 2) throw ConfigError(g_line, "g = image PATH");
            TerminalSource t;
            t.kind = TerminalSource::Kind::Image;
            t.path = gt[1];
            cfg.problem.g = t;
        } else {
            throw ConfigError(g_line, "unknown terminal source '" + gt[0] + "'");
        }
    }

    // step policy
    if (step_kind == "constant") {
        cfg.solver.step = StepPolicy::constant(eta);
    } else {
        cfg.solver.step = StepPolicy::backtracking(eta, shrink, eta_max > 0.0 ? eta_max : eta);
    }
    (void)step_line;

    // validation
    for (double t : cfg.snapshots)
        if (t < 0.0 || t > 1.0) throw ConfigError(lineno, "snapshot times must lie in [0,1]");
    if (cfg.variant == SolverVariant::MgFista && (cfg.levels < 2 || cfg.presmooth < 0))
        throw ConfigError(lineno, "mgfista needs levels >= 2 and presmooth >= 0");
    if (cfg.variant != SolverVariant::Fista && cfg.problem.game)
        throw ConfigError(lineno, "multiscale variants are defined for planning problems only");
    if (cfg.problem.game && cfg.problem.lambda_g > 0.0 && cfg.problem.g.empty())
        throw ConfigError(lineno, "game problem with lambda_g > 0 needs a terminal source");
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    return parse_config(in);
}

}  // namespace mfp

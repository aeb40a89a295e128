#include "tfbsde/config.hpp"

#include "tfbsde/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace tfbsde {

using nlohmann::json;

namespace {

const json& require_section(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError(path + key + ": missing required section");
    if (!j.at(key).is_object()) throw ConfigError(path + key + ": expected an object");
    return j.at(key);
}

double require_number(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError(path + key + ": missing required number");
    if (!j.at(key).is_number()) throw ConfigError(path + key + ": expected a number");
    return j.at(key).get<double>();
}

double number_or(const json& j, const std::string& key, const std::string& path, double dflt) {
    if (!j.contains(key)) return dflt;
    if (!j.at(key).is_number()) throw ConfigError(path + key + ": expected a number");
    return j.at(key).get<double>();
}

int int_or(const json& j, const std::string& key, const std::string& path, int dflt) {
    if (!j.contains(key)) return dflt;
    if (!j.at(key).is_number_integer()) throw ConfigError(path + key + ": expected an integer");
    return j.at(key).get<int>();
}

std::string string_or(const json& j, const std::string& key, const std::string& path,
                      const std::string& dflt) {
    if (!j.contains(key)) return dflt;
    if (!j.at(key).is_string()) throw ConfigError(path + key + ": expected a string");
    return j.at(key).get<std::string>();
}

LevyModel parse_model(const json& j) {
    LevyModel model;
    model.drift = number_or(j, "drift", "model.", 0.0);
    model.gaussian_var = number_or(j, "gaussian_var", "model.", 1.0);
    model.exp_moment_alpha = number_or(j, "exp_moment_alpha", "model.", 1.0);
    if (j.contains("atoms")) {
        if (!j.at("atoms").is_array()) throw ConfigError("model.atoms: expected an array");
        int idx = 0;
        for (const auto& a : j.at("atoms")) {
            const std::string path = "model.atoms[" + std::to_string(idx) + "].";
            if (!a.is_object()) throw ConfigError(path + ": expected an object");
            Atom atom;
            atom.mass = require_number(a, "mass", path);
            atom.location = require_number(a, "location", path);
            model.atoms.push_back(atom);
            ++idx;
        }
    }
    if (j.contains("density")) {
        const json& d = require_section(j, "density", "model.");
        const std::string family = string_or(d, "family", "model.density.", "");
        if (family == "exp_tail") {
            model = with_exp_tail_density(std::move(model),
                                          number_or(d, "scale", "model.density.", 1.0),
                                          require_number(d, "band_lo", "model.density."),
                                          require_number(d, "band_hi", "model.density."));
        } else if (family == "uniform_band") {
            model = with_uniform_band_density(std::move(model),
                                              number_or(d, "level", "model.density.", 1.0),
                                              require_number(d, "lo", "model.density."),
                                              require_number(d, "hi", "model.density."));
        } else {
            throw ConfigError("model.density.family: unknown family '" + family + "'");
        }
    }
    return model;
}

ProblemSpec parse_problem(const json& j) {
    ProblemSpec spec;
    spec.family = string_or(j, "family", "problem.", "affine");
    if (spec.family != "affine" && spec.family != "tanh")
        throw ConfigError("problem.family: unknown family '" + spec.family + "'");
    spec.f0 = number_or(j, "f0", "problem.", 0.0);
    spec.fx = number_or(j, "fx", "problem.", 0.0);
    spec.fy = number_or(j, "fy", "problem.", 0.0);
    spec.fz = number_or(j, "fz", "problem.", 0.0);
    spec.s0 = number_or(j, "s0", "problem.", 0.0);
    spec.sx = number_or(j, "sx", "problem.", 0.0);
    spec.sy = number_or(j, "sy", "problem.", 0.0);
    spec.g0 = number_or(j, "g0", "problem.", 0.0);
    spec.gx = number_or(j, "gx", "problem.", 0.0);
    spec.gy = number_or(j, "gy", "problem.", 0.0);
    spec.gz = number_or(j, "gz", "problem.", 0.0);
    spec.p0 = number_or(j, "p0", "problem.", 0.0);
    spec.px = number_or(j, "px", "problem.", 0.0);
    spec.lambda = number_or(j, "lambda", "problem.", -1.0);
    spec.lambda0 = number_or(j, "lambda0", "problem.", -1.0);
    spec.x0_mean = number_or(j, "x0_mean", "problem.", 0.0);
    spec.x0_var = number_or(j, "x0_var", "problem.", 0.0);
    if (spec.x0_var < 0.0) throw ConfigError("problem.x0_var: must be nonnegative");
    return spec;
}

SolverConfig parse_solver(const json& j) {
    SolverConfig cfg;
    cfg.n_paths = int_or(j, "n_paths", "solver.", cfg.n_paths);
    cfg.n_steps = int_or(j, "n_steps", "solver.", cfg.n_steps);
    cfg.regression_degree = int_or(j, "regression_degree", "solver.", cfg.regression_degree);
    cfg.picard_tol = number_or(j, "picard_tol", "solver.", cfg.picard_tol);
    cfg.picard_max_iter = int_or(j, "picard_max_iter", "solver.", cfg.picard_max_iter);
    cfg.delta_shrink = number_or(j, "delta_shrink", "solver.", cfg.delta_shrink);
    cfg.x_grid_points = int_or(j, "x_grid_points", "solver.", cfg.x_grid_points);
    cfg.x_grid_sds = number_or(j, "x_grid_sds", "solver.", cfg.x_grid_sds);
    cfg.budget_c = number_or(j, "budget_c", "solver.", cfg.budget_c);
    cfg.pilot_paths = int_or(j, "pilot_paths", "solver.", cfg.pilot_paths);
    cfg.force_segments = int_or(j, "force_segments", "solver.", cfg.force_segments);
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("solver: ") + e.what());
    }
    return cfg;
}

ExperimentSpec parse_experiment(const json& j) {
    ExperimentSpec spec;
    spec.name = string_or(j, "name", "experiment.", "stability");
    spec.pert.which = string_or(j, "which", "experiment.", "g");
    spec.pert.direction = string_or(j, "direction", "experiment.", "const");
    if (j.contains("eps")) {
        if (!j.at("eps").is_array()) throw ConfigError("experiment.eps: expected an array");
        spec.pert.eps.clear();
        for (const auto& e : j.at("eps")) {
            if (!e.is_number()) throw ConfigError("experiment.eps: expected numbers");
            spec.pert.eps.push_back(e.get<double>());
        }
    }
    spec.shift = number_or(j, "shift", "experiment.", 0.1);
    spec.shift_target = string_or(j, "shift_target", "experiment.", "g");
    spec.n_levels = int_or(j, "n_levels", "experiment.", 6);
    if (j.contains("linear")) {
        const json& l = require_section(j, "linear", "experiment.");
        spec.linear.a1 = number_or(l, "a1", "experiment.linear.", 0.0);
        spec.linear.b1 = number_or(l, "b1", "experiment.linear.", 0.0);
        spec.linear.c1 = number_or(l, "c1", "experiment.linear.", 0.0);
        spec.linear.a2 = number_or(l, "a2", "experiment.linear.", 0.0);
        spec.linear.b2 = number_or(l, "b2", "experiment.linear.", 0.0);
        spec.linear.a3 = number_or(l, "a3", "experiment.linear.", 0.0);
        spec.linear.b3 = number_or(l, "b3", "experiment.linear.", 0.0);
        spec.linear.c3 = number_or(l, "c3", "experiment.linear.", 0.0);
        spec.linear.P = number_or(l, "P", "experiment.linear.", 0.0);
        spec.linear.alpha = number_or(l, "alpha", "experiment.linear.", 0.0);
        spec.linear.beta = number_or(l, "beta", "experiment.linear.", 0.0);
        spec.linear.T = number_or(l, "T", "experiment.linear.", 1.0);
        spec.linear.lambda = number_or(l, "lambda", "experiment.linear.", 1.0);
        spec.linear.lambda0 = number_or(l, "lambda0", "experiment.linear.", 1.0);
    }
    return spec;
}

} // namespace

FbsdeProblem make_problem(const ProblemSpec& spec, double T, int n_channels) {
    FbsdeProblem problem;
    problem.n_channels = n_channels;
    problem.T = T;
    problem.x0_mean = spec.x0_mean;
    problem.x0_var = spec.x0_var;
    const bool tanh_link = spec.family == "tanh";
    auto link = [tanh_link](double v) { return tanh_link ? std::tanh(v) : v; };
    problem.f = [spec, link](double, double x, double y, ZView z) {
        return spec.f0 + spec.fx * link(x) + spec.fy * link(y) + spec.fz * link(z[0]);
    };
    problem.sigma = [spec, link](double, double x, double y, std::span<double> sig) {
        std::fill(sig.begin(), sig.end(), 0.0);
        sig[0] = spec.s0 + spec.sx * link(x) + spec.sy * link(y);
    };
    problem.g = [spec, link](double, double x, double y, ZView z) {
        return spec.g0 + spec.gx * link(x) + spec.gy * link(y) + spec.gz * link(z[0]);
    };
    problem.phi = [spec, link](double x) { return spec.p0 + spec.px * link(x); };
    if (spec.lambda >= 0.0) {
        problem.lambda = spec.lambda;
    } else {
        problem.lambda = std::max({std::abs(spec.fx), std::abs(spec.fy), std::abs(spec.fz),
                                   std::abs(spec.sx), std::abs(spec.sy), std::abs(spec.gx),
                                   std::abs(spec.gy), std::abs(spec.gz)});
    }
    problem.lambda0 = spec.lambda0 >= 0.0 ? spec.lambda0 : std::abs(spec.px);
    return problem;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root: expected an object");

    RunConfig cfg;
    if (!j.contains("seed")) throw ConfigError("seed: missing (no wall-clock default)");
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
        throw ConfigError("seed: expected a nonnegative integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.out_dir = string_or(j, "output", "", ".");
    if (j.contains("dump_bundle")) {
        if (!j.at("dump_bundle").is_boolean()) throw ConfigError("dump_bundle: expected a boolean");
        cfg.dump_bundle = j.at("dump_bundle").get<bool>();
    }

    cfg.model = parse_model(require_section(j, "model", ""));

    if (j.contains("basis")) {
        const json& b = require_section(j, "basis", "");
        cfg.basis_K = int_or(b, "K", "basis.", 3);
        cfg.rank_tol = number_or(b, "rank_tol", "basis.", 1e-12);
    }
    if (cfg.basis_K < 1 || cfg.basis_K > 10)
        throw ConfigError("basis.K: must be in [1, 10]");

    const json& grid = require_section(j, "grid", "");
    cfg.T = require_number(grid, "T", "grid.");
    if (!(cfg.T > 0.0)) throw ConfigError("grid.T: must be positive");
    cfg.grid_steps = int_or(grid, "n_steps", "grid.", 50);
    if (cfg.grid_steps < 1) throw ConfigError("grid.n_steps: must be positive");

    if (j.contains("problem")) cfg.problem = parse_problem(require_section(j, "problem", ""));
    if (j.contains("solver")) cfg.solver = parse_solver(require_section(j, "solver", ""));
    if (j.contains("experiment"))
        cfg.experiment = parse_experiment(require_section(j, "experiment", ""));
    return cfg;
}

} // namespace tfbsde

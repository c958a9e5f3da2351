#include "penlab/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace penlab {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("config: " + msg); }

std::string joined(const char* ctx, const char* key) { return std::string(ctx) + "." + key; }

/// Rejects non-objects and any key outside the allowed set.
void check_object(const json& j, const char* ctx, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail(std::string(ctx) + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* a : allowed)
            if (it.key() == a) { known = true; break; }
        if (!known) fail("unknown field '" + it.key() + "' in " + ctx);
    }
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double num_field(const json& obj, const char* ctx, const char* key) {
    const json* v = find(obj, key);
    if (!v) fail(joined(ctx, key) + " is required");
    if (!v->is_number()) fail(joined(ctx, key) + " must be a number");
    return v->get<double>();
}

double num_field_or(const json& obj, const char* ctx, const char* key, double def) {
    return find(obj, key) ? num_field(obj, ctx, key) : def;
}

int int_field(const json& obj, const char* ctx, const char* key) {
    const json* v = find(obj, key);
    if (!v) fail(joined(ctx, key) + " is required");
    if (!v->is_number_integer()) fail(joined(ctx, key) + " must be an integer");
    return v->get<int>();
}

int int_field_or(const json& obj, const char* ctx, const char* key, int def) {
    return find(obj, key) ? int_field(obj, ctx, key) : def;
}

std::string str_field(const json& obj, const char* ctx, const char* key) {
    const json* v = find(obj, key);
    if (!v) fail(joined(ctx, key) + " is required");
    if (!v->is_string()) fail(joined(ctx, key) + " must be a string");
    return v->get<std::string>();
}

std::vector<double> num_array_field(const json& obj, const char* ctx, const char* key) {
    const json* v = find(obj, key);
    if (!v) fail(joined(ctx, key) + " is required");
    if (!v->is_array()) fail(joined(ctx, key) + " must be an array");
    std::vector<double> out;
    for (const json& e : *v) {
        if (!e.is_number()) fail(joined(ctx, key) + " must contain numbers only");
        out.push_back(e.get<double>());
    }
    return out;
}

std::vector<int> int_array_field(const json& obj, const char* ctx, const char* key) {
    const json* v = find(obj, key);
    if (!v) fail(joined(ctx, key) + " is required");
    if (!v->is_array()) fail(joined(ctx, key) + " must be an array");
    std::vector<int> out;
    for (const json& e : *v) {
        if (!e.is_number_integer()) fail(joined(ctx, key) + " must contain integers only");
        out.push_back(e.get<int>());
    }
    return out;
}

void require_decreasing_positive(const std::vector<double>& v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0)) fail(std::string(what) + " must be positive");
        if (i > 0 && !(v[i] < v[i - 1])) fail(std::string(what) + " must be strictly decreasing");
    }
}

void parse_model(const json& j, RunConfig& cfg) {
    check_object(j, "model", {"sigma", "r", "q", "lambda", "jump"});
    cfg.sigma = num_field(j, "model", "sigma");
    cfg.r = num_field(j, "model", "r");
    cfg.q = num_field_or(j, "model", "q", 0.0);
    cfg.lambda = num_field_or(j, "model", "lambda", 0.0);
    if (const json* jj = find(j, "jump")) {
        cfg.jump_kind = str_field(*jj, "model.jump", "kind");
        if (cfg.jump_kind == "none") {
            check_object(*jj, "model.jump", {"kind"});
        } else if (cfg.jump_kind == "point_mass") {
            check_object(*jj, "model.jump", {"kind", "J0"});
            cfg.jump_j0 = num_field(*jj, "model.jump", "J0");
        } else if (cfg.jump_kind == "lognormal") {
            check_object(*jj, "model.jump", {"kind", "mu_J", "sigma_J"});
            cfg.jump_mu = num_field(*jj, "model.jump", "mu_J");
            cfg.jump_sigma = num_field(*jj, "model.jump", "sigma_J");
        } else if (cfg.jump_kind == "double_exponential") {
            check_object(*jj, "model.jump", {"kind", "p", "eta_up", "eta_down"});
            cfg.jump_p = num_field(*jj, "model.jump", "p");
            cfg.jump_eta_up = num_field(*jj, "model.jump", "eta_up");
            cfg.jump_eta_down = num_field(*jj, "model.jump", "eta_down");
        } else {
            fail("model.jump.kind must be one of none|point_mass|lognormal|double_exponential");
        }
    }
}

void parse_payoff(const json& j, RunConfig& cfg) {
    if (!j.is_object()) fail("payoff must be an object");
    cfg.payoff_type = str_field(j, "payoff", "type");
    const std::string& t = cfg.payoff_type;
    if (t == "put" || t == "call" || t == "straddle") {
        check_object(j, "payoff", {"type", "strike"});
        cfg.strike = num_field(j, "payoff", "strike");
    } else if (t == "butterfly") {
        check_object(j, "payoff", {"type", "peak_value", "alpha", "centre"});
        cfg.peak_value = num_field(j, "payoff", "peak_value");
        cfg.alpha = num_field(j, "payoff", "alpha");
        cfg.centre = num_field(j, "payoff", "centre");
    } else if (t == "modified_put") {
        check_object(j, "payoff", {"type", "strike", "peak_value", "alpha", "kink_location"});
        cfg.strike = num_field_or(j, "payoff", "strike", 100.0);
        cfg.peak_value = num_field_or(j, "payoff", "peak_value", 32.0);
        cfg.alpha = num_field_or(j, "payoff", "alpha", 1.0);
        cfg.kink_location = num_field_or(j, "payoff", "kink_location", 105.0);
    } else if (t == "custom") {
        check_object(j, "payoff", {"type", "breakpoints", "values", "left_slope", "right_slope"});
        cfg.breakpoints = num_array_field(j, "payoff", "breakpoints");
        cfg.values = num_array_field(j, "payoff", "values");
        cfg.left_slope = num_field(j, "payoff", "left_slope");
        cfg.right_slope = num_field(j, "payoff", "right_slope");
    } else {
        fail("payoff.type must be one of put|call|straddle|butterfly|modified_put|custom");
    }
}

void parse_grid(const json& j, RunConfig& cfg) {
    check_object(j, "grid", {"s_max", "n", "m", "maturity", "theta", "rannacher_steps"});
    cfg.s_max = num_field_or(j, "grid", "s_max", 0.0);
    cfg.n = int_field(j, "grid", "n");
    cfg.m = int_field(j, "grid", "m");
    cfg.maturity = num_field(j, "grid", "maturity");
    cfg.theta = num_field_or(j, "grid", "theta", 0.5);
    cfg.rannacher_steps = int_field_or(j, "grid", "rannacher_steps", 2);
}

void parse_solver(const json& j, RunConfig& cfg) {
    check_object(j, "solver", {"mode", "epsilon", "newton", "psor", "jump_coupling", "jump_tol",
                               "jump_max_outer"});
    const std::string mode = str_field(j, "solver", "mode");
    if (mode == "penalty")
        cfg.solver.mode = SolveMode::penalty;
    else if (mode == "lcp")
        cfg.solver.mode = SolveMode::lcp;
    else if (mode == "european")
        cfg.solver.mode = SolveMode::european;
    else
        fail("solver.mode must be one of penalty|lcp|european");

    if (cfg.solver.mode == SolveMode::penalty) {
        cfg.solver.epsilon = num_field(j, "solver", "epsilon");
    } else {
        cfg.solver.epsilon = num_field_or(j, "solver", "epsilon", cfg.solver.epsilon);
    }
    if (!(cfg.solver.epsilon > 0.0)) fail("solver.epsilon must be positive");

    if (const json* jn = find(j, "newton")) {
        check_object(*jn, "solver.newton", {"max_iters", "tol"});
        cfg.solver.newton.max_iters =
            int_field_or(*jn, "solver.newton", "max_iters", cfg.solver.newton.max_iters);
        cfg.solver.newton.tol = num_field_or(*jn, "solver.newton", "tol", cfg.solver.newton.tol);
    }
    if (const json* jp = find(j, "psor")) {
        check_object(*jp, "solver.psor", {"omega", "tol", "max_sweeps"});
        cfg.solver.psor.omega = num_field_or(*jp, "solver.psor", "omega", cfg.solver.psor.omega);
        cfg.solver.psor.tol = num_field_or(*jp, "solver.psor", "tol", cfg.solver.psor.tol);
        if (const json* ms = find(*jp, "max_sweeps")) {
            if (!ms->is_number_integer()) fail("solver.psor.max_sweeps must be an integer");
            cfg.solver.psor.max_sweeps = ms->get<long>();
        }
    }
    if (const json* jc = find(j, "jump_coupling")) {
        const std::string c = jc->is_string() ? jc->get<std::string>() : std::string();
        if (c == "lagged")
            cfg.solver.jump_coupling = JumpCoupling::lagged;
        else if (c == "implicit")
            cfg.solver.jump_coupling = JumpCoupling::implicit;
        else
            fail("solver.jump_coupling must be lagged|implicit");
    }
    cfg.solver.jump_tol = num_field_or(j, "solver", "jump_tol", cfg.solver.jump_tol);
    cfg.solver.jump_max_outer =
        int_field_or(j, "solver", "jump_max_outer", cfg.solver.jump_max_outer);

    if (cfg.solver.newton.max_iters <= 0) fail("solver.newton.max_iters must be positive");
    if (!(cfg.solver.newton.tol > 0.0)) fail("solver.newton.tol must be positive");
    if (!(cfg.solver.psor.omega > 0.0 && cfg.solver.psor.omega < 2.0))
        fail("solver.psor.omega must lie in (0, 2)");
    if (!(cfg.solver.psor.tol > 0.0)) fail("solver.psor.tol must be positive");
    if (cfg.solver.psor.max_sweeps <= 0) fail("solver.psor.max_sweeps must be positive");
    if (!(cfg.solver.jump_tol > 0.0)) fail("solver.jump_tol must be positive");
    if (cfg.solver.jump_max_outer <= 0) fail("solver.jump_max_outer must be positive");
}

void parse_converge(const json& j, RunConfig& cfg) {
    check_object(j, "converge", {"epsilons", "time_slices"});
    cfg.ladder_epsilons = num_array_field(j, "converge", "epsilons");
    if (cfg.ladder_epsilons.size() < 4) fail("converge.epsilons needs at least 4 values");
    require_decreasing_positive(cfg.ladder_epsilons, "converge.epsilons");
    if (find(j, "time_slices")) {
        cfg.time_slices = num_array_field(j, "converge", "time_slices");
        if (cfg.time_slices.empty()) fail("converge.time_slices must not be empty");
        for (double s : cfg.time_slices)
            if (!(s >= 0.0)) fail("converge.time_slices must be nonnegative");
    }
}

void parse_extrapolate(const json& j, RunConfig& cfg) {
    check_object(j, "extrapolate", {"epsilons", "n", "m"});
    cfg.extrap_epsilons = num_array_field(j, "extrapolate", "epsilons");
    cfg.extrap_n = int_array_field(j, "extrapolate", "n");
    cfg.extrap_m = int_array_field(j, "extrapolate", "m");
    if (cfg.extrap_epsilons.size() < 3) fail("extrapolate.epsilons needs at least 3 rungs");
    if (cfg.extrap_n.size() != cfg.extrap_epsilons.size() ||
        cfg.extrap_m.size() != cfg.extrap_epsilons.size())
        fail("extrapolate.n and extrapolate.m must match extrapolate.epsilons in length");
    require_decreasing_positive(cfg.extrap_epsilons, "extrapolate.epsilons");
    for (std::size_t i = 0; i < cfg.extrap_n.size(); ++i) {
        if (cfg.extrap_n[i] <= 0 || cfg.extrap_m[i] <= 0)
            fail("extrapolate grid sizes must be positive");
        if (i > 0 && (cfg.extrap_n[i] < cfg.extrap_n[i - 1] ||
                      cfg.extrap_m[i] < cfg.extrap_m[i - 1]))
            fail("extrapolate grids must not coarsen along the ladder");
    }
}

}  // namespace

RunConfig parse_config_text(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(std::string("invalid JSON: ") + e.what());
    }
    check_object(root, "top level",
                 {"schema_version", "model", "payoff", "grid", "solver", "converge",
                  "extrapolate"});

    RunConfig cfg;
    cfg.schema_version = int_field(root, "top level", "schema_version");
    if (cfg.schema_version != 1) fail("unsupported schema_version (expected 1)");

    const json* jm = find(root, "model");
    if (!jm) fail("model block is required");
    parse_model(*jm, cfg);
    const json* jp = find(root, "payoff");
    if (!jp) fail("payoff block is required");
    parse_payoff(*jp, cfg);
    const json* jg = find(root, "grid");
    if (!jg) fail("grid block is required");
    parse_grid(*jg, cfg);
    const json* js = find(root, "solver");
    if (!js) fail("solver block is required");
    parse_solver(*js, cfg);
    if (const json* jc = find(root, "converge")) parse_converge(*jc, cfg);
    if (const json* je = find(root, "extrapolate")) parse_extrapolate(*je, cfg);

    // Construct everything eagerly so bad values surface as config errors.
    const Payoff payoff = make_payoff(cfg);
    if (cfg.s_max <= 0.0) cfg.s_max = default_s_max(payoff);
    make_model(cfg);
    make_grid(cfg);
    if (!cfg.extrap_epsilons.empty()) {
        RunConfig rung = cfg;
        Grid prev;
        for (std::size_t i = 0; i < cfg.extrap_epsilons.size(); ++i) {
            rung.n = cfg.extrap_n[i];
            rung.m = cfg.extrap_m[i];
            Grid g = make_grid(rung);
            if (i > 0 && ((g.n_interior + 1) % (prev.n_interior + 1) != 0 ||
                          g.time_steps % prev.time_steps != 0))
                fail("extrapolate rung grids must be nested (node counts must divide)");
            prev = g;
        }
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    return parse_config_text(read_text_file(path));
}

std::string resolved_config_json(const RunConfig& cfg) {
    json j;
    j["schema_version"] = cfg.schema_version;

    json jm;
    jm["sigma"] = cfg.sigma;
    jm["r"] = cfg.r;
    jm["q"] = cfg.q;
    jm["lambda"] = cfg.lambda;
    json jj;
    jj["kind"] = cfg.jump_kind;
    if (cfg.jump_kind == "point_mass") {
        jj["J0"] = cfg.jump_j0;
    } else if (cfg.jump_kind == "lognormal") {
        jj["mu_J"] = cfg.jump_mu;
        jj["sigma_J"] = cfg.jump_sigma;
    } else if (cfg.jump_kind == "double_exponential") {
        jj["p"] = cfg.jump_p;
        jj["eta_up"] = cfg.jump_eta_up;
        jj["eta_down"] = cfg.jump_eta_down;
    }
    jm["jump"] = jj;
    j["model"] = jm;

    json jpay;
    jpay["type"] = cfg.payoff_type;
    if (cfg.payoff_type == "put" || cfg.payoff_type == "call" || cfg.payoff_type == "straddle") {
        jpay["strike"] = cfg.strike;
    } else if (cfg.payoff_type == "butterfly") {
        jpay["peak_value"] = cfg.peak_value;
        jpay["alpha"] = cfg.alpha;
        jpay["centre"] = cfg.centre;
    } else if (cfg.payoff_type == "modified_put") {
        jpay["strike"] = cfg.strike;
        jpay["peak_value"] = cfg.peak_value;
        jpay["alpha"] = cfg.alpha;
        jpay["kink_location"] = cfg.kink_location;
    } else if (cfg.payoff_type == "custom") {
        jpay["breakpoints"] = cfg.breakpoints;
        jpay["values"] = cfg.values;
        jpay["left_slope"] = cfg.left_slope;
        jpay["right_slope"] = cfg.right_slope;
    }
    j["payoff"] = jpay;

    json jg;
    jg["s_max"] = cfg.s_max;
    jg["n"] = cfg.n;
    jg["m"] = cfg.m;
    jg["maturity"] = cfg.maturity;
    jg["theta"] = cfg.theta;
    jg["rannacher_steps"] = cfg.rannacher_steps;
    j["grid"] = jg;

    json jsv;
    jsv["mode"] = cfg.solver.mode == SolveMode::penalty
                      ? "penalty"
                      : (cfg.solver.mode == SolveMode::lcp ? "lcp" : "european");
    jsv["epsilon"] = cfg.solver.epsilon;
    jsv["newton"] = {{"max_iters", cfg.solver.newton.max_iters}, {"tol", cfg.solver.newton.tol}};
    jsv["psor"] = {{"omega", cfg.solver.psor.omega},
                   {"tol", cfg.solver.psor.tol},
                   {"max_sweeps", cfg.solver.psor.max_sweeps}};
    jsv["jump_coupling"] =
        cfg.solver.jump_coupling == JumpCoupling::lagged ? "lagged" : "implicit";
    jsv["jump_tol"] = cfg.solver.jump_tol;
    jsv["jump_max_outer"] = cfg.solver.jump_max_outer;
    j["solver"] = jsv;

    if (!cfg.ladder_epsilons.empty()) {
        json jc;
        jc["epsilons"] = cfg.ladder_epsilons;
        jc["time_slices"] = cfg.time_slices;
        j["converge"] = jc;
    }
    if (!cfg.extrap_epsilons.empty()) {
        json je;
        je["epsilons"] = cfg.extrap_epsilons;
        je["n"] = cfg.extrap_n;
        je["m"] = cfg.extrap_m;
        j["extrapolate"] = je;
    }
    return j.dump();
}

MarketModel make_model(const RunConfig& cfg) {
    JumpSpec spec = JumpSpec::none();
    if (cfg.jump_kind == "point_mass")
        spec = JumpSpec::point_mass(cfg.jump_j0);
    else if (cfg.jump_kind == "lognormal")
        spec = JumpSpec::lognormal(cfg.jump_mu, cfg.jump_sigma);
    else if (cfg.jump_kind == "double_exponential")
        spec = JumpSpec::double_exponential(cfg.jump_p, cfg.jump_eta_up, cfg.jump_eta_down);
    else if (cfg.jump_kind != "none")
        throw std::invalid_argument("config: unknown jump kind '" + cfg.jump_kind + "'");
    return MarketModel(cfg.sigma, cfg.r, cfg.q, cfg.lambda, spec);
}

Payoff make_payoff(const RunConfig& cfg) {
    const std::string& t = cfg.payoff_type;
    if (t == "put") return Payoff::put(cfg.strike);
    if (t == "call") return Payoff::call(cfg.strike);
    if (t == "straddle") return Payoff::straddle(cfg.strike);
    if (t == "butterfly") return Payoff::butterfly(cfg.peak_value, cfg.alpha, cfg.centre);
    if (t == "modified_put")
        return Payoff::modified_put(cfg.strike, cfg.peak_value, cfg.alpha, cfg.kink_location);
    if (t == "custom")
        return Payoff::custom(cfg.breakpoints, cfg.values, cfg.left_slope, cfg.right_slope);
    throw std::invalid_argument("config: unknown payoff type '" + t + "'");
}

Grid make_grid(const RunConfig& cfg) {
    const Payoff payoff = make_payoff(cfg);
    const double s_max = cfg.s_max > 0.0 ? cfg.s_max : default_s_max(payoff);
    return build_grid(payoff, cfg.n, cfg.m, s_max, cfg.maturity, cfg.theta, cfg.rannacher_steps);
}

std::string csv_cell(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path.string());
    if (!table.embedded_config.empty()) out << "# config=" << table.embedded_config << "\n";
    for (std::size_t i = 0; i < table.header.size(); ++i)
        out << (i ? "," : "") << table.header[i];
    out << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
    if (!out) throw std::invalid_argument("write failed: " + path.string());
}

void write_wide_surface_csv(const std::filesystem::path& path, const Grid& grid,
                            const std::vector<std::vector<double>>& values,
                            const std::string& embedded_config) {
    CsvTable t;
    t.embedded_config = embedded_config;
    t.header.push_back("S");
    for (int m = 0; m <= grid.time_steps; ++m)
        t.header.push_back("t=" + csv_cell(grid.time(m)));
    for (int i = 0; i < grid.node_count(); ++i) {
        std::vector<std::string> row;
        row.reserve(grid.time_steps + 2);
        row.push_back(csv_cell(grid.node(i)));
        for (int m = 0; m <= grid.time_steps; ++m) row.push_back(csv_cell(values[m][i]));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace penlab

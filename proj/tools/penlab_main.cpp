#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "penlab/analysis.hpp"
#include "penlab/asymptotics.hpp"
#include "penlab/serialize.hpp"
#include "penlab/solver.hpp"

namespace fs = std::filesystem;
namespace pl = penlab;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    bool parallel = false;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON run configuration")
        ->required();
    cmd->add_option("--out", args.out_dir, "output directory, created if missing")
        ->required();
    cmd->add_flag("--parallel", args.parallel, "run independent ladder solves concurrently");
    cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

json base_metadata(const char* command, const pl::RunConfig& cfg, const pl::MarketModel& model,
                   const pl::Grid& grid) {
    json meta;
    meta["command"] = command;
    meta["config"] = json::parse(pl::resolved_config_json(cfg));
    meta["grid"] = {{"h", grid.h},
                    {"k", grid.k},
                    {"n_interior", grid.n_interior},
                    {"n_requested", grid.requested_n},
                    {"n_adjusted", grid.n_adjusted},
                    {"s_max", grid.s_max},
                    {"time_steps", grid.time_steps}};
    json jm;
    jm["omega"] = model.omega();
    jm["drift"] = model.drift();
    if (model.has_jumps() && !model.jump().degenerate())
        jm["jump_truncation"] = {{"z_min", model.quadrature().z_min},
                                 {"z_max", model.quadrature().z_max},
                                 {"quad_nodes", model.quadrature().z.size()}};
    meta["model"] = jm;
    return meta;
}

json solver_stats(const pl::Surface& s) {
    long total_iter = 0;
    int max_outer = 0;
    double max_res = 0.0;
    for (const pl::LevelInfo& li : s.level_info) {
        total_iter += li.iterations;
        max_outer = std::max(max_outer, li.jump_outer);
        max_res = std::max(max_res, li.residual);
    }
    return {{"total_iterations", total_iter},
            {"max_residual", max_res},
            {"max_jump_outer", max_outer},
            {"warnings", s.warnings}};
}

void write_metadata(const fs::path& out_dir, json meta, std::vector<std::string> files) {
    files.push_back("metadata.json");
    std::sort(files.begin(), files.end());
    meta["outputs"] = files;
    const fs::path path = out_dir / "metadata.json";
    std::ofstream f(path);
    if (!f) throw std::invalid_argument("cannot open for writing: " + path.string());
    f << meta.dump(2) << "\n";
}

void write_boundary_csv(const fs::path& path, const pl::Grid& grid, const pl::BoundaryCurve& b,
                        const std::string& cfgline) {
    pl::CsvTable t;
    t.embedded_config = cfgline;
    t.header = {"t", "tte", "location"};
    for (std::size_t m = 0; m < b.location.size(); ++m)
        t.rows.push_back({pl::csv_cell(grid.time(static_cast<int>(m))),
                          pl::csv_cell(grid.maturity - grid.time(static_cast<int>(m))),
                          pl::csv_cell(b.location[m])});
    pl::write_csv(path, t);
}

pl::Topology topology_for(const pl::RunConfig& cfg) {
    return (cfg.payoff_type == "butterfly" || cfg.payoff_type == "modified_put")
               ? pl::Topology::butterfly
               : pl::Topology::put_like;
}

const char* site_name(pl::ViolationSite s) {
    switch (s) {
        case pl::ViolationSite::smooth: return "smooth";
        case pl::ViolationSite::convex_kink: return "convex_kink";
        case pl::ViolationSite::concave_kink: return "concave_kink";
        case pl::ViolationSite::boundary: return "boundary";
    }
    return "unknown";
}

template <typename F>
std::vector<pl::Surface> run_ladder(const std::vector<double>& eps, bool parallel, F solve_one) {
    std::vector<pl::Surface> out;
    out.reserve(eps.size());
    if (!parallel) {
        for (double e : eps) out.push_back(solve_one(e));
        return out;
    }
    std::vector<std::future<pl::Surface>> futures;
    futures.reserve(eps.size());
    for (double e : eps) futures.push_back(std::async(std::launch::async, solve_one, e));
    for (auto& f : futures) out.push_back(f.get());
    return out;
}

int cmd_price(const CommonArgs& args) {
    const pl::RunConfig cfg = pl::load_config(args.config_path);
    const pl::MarketModel model = pl::make_model(cfg);
    const pl::Payoff payoff = pl::make_payoff(cfg);
    const pl::Grid grid = pl::make_grid(cfg);
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    const std::string cfgline = pl::resolved_config_json(cfg);

    const pl::Surface surface = pl::price(model, payoff, grid, cfg.solver);
    const pl::Surface dsurf = pl::delta(surface);
    const pl::BoundaryCurve boundary =
        pl::exercise_boundary(surface, payoff, 0.0, topology_for(cfg));

    pl::write_wide_surface_csv(out / "surface.csv", grid, surface.values, cfgline);
    pl::write_wide_surface_csv(out / "delta_surface.csv", grid, dsurf.values, cfgline);
    write_boundary_csv(out / "boundary.csv", grid, boundary, cfgline);

    json meta = base_metadata("price", cfg, model, grid);
    meta["solve"] = solver_stats(surface);
    json stg = json::array();
    for (const pl::Stagnation& s : boundary.stagnations)
        stg.push_back({{"first_level", s.first_level},
                       {"last_level", s.last_level},
                       {"location", s.location}});
    meta["boundary_stagnations"] = stg;
    write_metadata(out, meta, {"surface.csv", "delta_surface.csv", "boundary.csv"});

    if (!args.quiet) {
        const double probe = payoff.breakpoints().front();
        std::cout << "grid: N=" << grid.n_interior << " h=" << grid.h
                  << " M=" << grid.time_steps << " k=" << grid.k << "\n"
                  << "value at t=0, S=" << probe << ": " << surface.interpolate(0, probe) << "\n"
                  << "wrote " << (out / "surface.csv").string() << ", delta_surface.csv, "
                  << "boundary.csv, metadata.json\n";
    }
    return 0;
}

int cmd_converge(const CommonArgs& args) {
    const pl::RunConfig cfg = pl::load_config(args.config_path);
    if (cfg.ladder_epsilons.empty())
        throw std::invalid_argument("config: the converge command needs a converge block");
    if (cfg.solver.mode != pl::SolveMode::penalty)
        throw std::invalid_argument("config: converge requires solver.mode = penalty");
    const pl::MarketModel model = pl::make_model(cfg);
    const pl::Payoff payoff = pl::make_payoff(cfg);
    const pl::Grid grid = pl::make_grid(cfg);
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    const std::string cfgline = pl::resolved_config_json(cfg);

    std::vector<int> slice_levels;
    for (double tau : cfg.time_slices) slice_levels.push_back(pl::level_for_tte(grid, tau));

    pl::SolverConfig ref_cfg = cfg.solver;
    ref_cfg.mode = pl::SolveMode::lcp;
    const pl::Surface reference = pl::price(model, payoff, grid, ref_cfg);

    const std::vector<pl::Surface> runs =
        run_ladder(cfg.ladder_epsilons, args.parallel, [&](double eps) {
            pl::SolverConfig c = cfg.solver;
            c.epsilon = eps;
            return pl::price(model, payoff, grid, c);
        });

    const std::size_t n_eps = runs.size(), n_slices = slice_levels.size();
    std::vector<std::vector<double>> v_slice(n_slices), d_slice(n_slices);
    std::vector<double> v_glob, d_glob, l2, h1;
    json run_stats = json::array();
    for (std::size_t e = 0; e < n_eps; ++e) {
        const pl::ErrorReport rep = pl::error_norms(runs[e], reference);
        for (std::size_t s = 0; s < n_slices; ++s) {
            v_slice[s].push_back(rep.sup_value_at(slice_levels[s]));
            d_slice[s].push_back(rep.sup_delta_at(slice_levels[s]));
        }
        v_glob.push_back(*std::max_element(rep.sup_value.begin(), rep.sup_value.end()));
        d_glob.push_back(*std::max_element(rep.sup_delta.begin(), rep.sup_delta.end()));
        l2.push_back(rep.l2_value);
        h1.push_back(rep.h1);
        run_stats.push_back(solver_stats(runs[e]));
    }

    pl::CsvTable errs;
    errs.embedded_config = cfgline;
    errs.header = {"epsilon"};
    for (double s : cfg.time_slices) {
        errs.header.push_back("value_sup@tte=" + pl::csv_cell(s));
        errs.header.push_back("delta_sup@tte=" + pl::csv_cell(s));
    }
    errs.header.insert(errs.header.end(), {"value_sup", "delta_sup", "l2_value", "h1"});
    for (std::size_t e = 0; e < n_eps; ++e) {
        std::vector<std::string> row{pl::csv_cell(cfg.ladder_epsilons[e])};
        for (std::size_t s = 0; s < n_slices; ++s) {
            row.push_back(pl::csv_cell(v_slice[s][e]));
            row.push_back(pl::csv_cell(d_slice[s][e]));
        }
        row.push_back(pl::csv_cell(v_glob[e]));
        row.push_back(pl::csv_cell(d_glob[e]));
        row.push_back(pl::csv_cell(l2[e]));
        row.push_back(pl::csv_cell(h1[e]));
        errs.rows.push_back(std::move(row));
    }
    pl::write_csv(out / "errors.csv", errs);

    std::vector<std::string> regress_warnings;
    auto fit_of = [&](const std::vector<double>& col) {
        pl::OrderFit f = pl::regress_order(cfg.ladder_epsilons, col);
        regress_warnings.insert(regress_warnings.end(), f.warnings.begin(), f.warnings.end());
        return f;
    };

    pl::CsvTable orders;
    orders.embedded_config = cfgline;
    orders.header = {"norm"};
    for (double s : cfg.time_slices) orders.header.push_back("tte=" + pl::csv_cell(s));
    std::vector<std::string> vrow{"value_sup"}, drow{"delta_sup"};
    std::vector<double> v_orders, d_orders;
    for (std::size_t s = 0; s < n_slices; ++s) {
        v_orders.push_back(fit_of(v_slice[s]).order);
        d_orders.push_back(fit_of(d_slice[s]).order);
        vrow.push_back(pl::csv_cell(v_orders.back()));
        drow.push_back(pl::csv_cell(d_orders.back()));
    }
    orders.rows = {vrow, drow};
    pl::write_csv(out / "orders.csv", orders);

    pl::CsvTable global;
    global.embedded_config = cfgline;
    global.header = {"norm", "order", "intercept", "residual_rms", "points_used"};
    for (const auto& [name, col] :
         std::vector<std::pair<std::string, const std::vector<double>*>>{
             {"value_sup", &v_glob}, {"delta_sup", &d_glob}, {"l2_value", &l2}, {"h1", &h1}}) {
        const pl::OrderFit f = fit_of(*col);
        global.rows.push_back({name, pl::csv_cell(f.order), pl::csv_cell(f.intercept),
                               pl::csv_cell(f.residual_rms), std::to_string(f.points_used)});
    }
    pl::write_csv(out / "orders_global.csv", global);

    json meta = base_metadata("converge", cfg, model, grid);
    meta["reference"] = solver_stats(reference);
    meta["runs"] = run_stats;
    meta["regress_warnings"] = regress_warnings;
    write_metadata(out, meta, {"errors.csv", "orders.csv", "orders_global.csv"});

    if (!args.quiet) {
        for (std::size_t s = 0; s < n_slices; ++s)
            std::cout << "tte=" << cfg.time_slices[s] << ": value order " << v_orders[s]
                      << ", delta order " << d_orders[s] << "\n";
        std::cout << "wrote errors.csv, orders.csv, orders_global.csv, metadata.json in "
                  << out.string() << "\n";
    }
    return 0;
}

int cmd_bounds(const CommonArgs& args) {
    const pl::RunConfig cfg = pl::load_config(args.config_path);
    if (cfg.solver.mode != pl::SolveMode::penalty)
        throw std::invalid_argument("config: bounds requires solver.mode = penalty");
    const pl::MarketModel model = pl::make_model(cfg);
    const pl::Payoff payoff = pl::make_payoff(cfg);
    const pl::Grid grid = pl::make_grid(cfg);
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    const std::string cfgline = pl::resolved_config_json(cfg);

    const pl::Surface pen = pl::price(model, payoff, grid, cfg.solver);
    pl::SolverConfig ref_cfg = cfg.solver;
    ref_cfg.mode = pl::SolveMode::lcp;
    const pl::Surface lcp = pl::price(model, payoff, grid, ref_cfg);

    const pl::BoundsPair bp = pl::bounds(pen, payoff);

    // Crank-Nicolson carries a small non-monotone transient, so the sandwich
    // is asserted up to a tolerance well above iteration slack yet far below
    // any plausible lambda_eps.
    const double tol = 1e-6;
    double worst_lower = 0.0, worst_upper = 0.0;
    for (int m = 0; m < pen.levels(); ++m)
        for (int i = 0; i < grid.node_count(); ++i) {
            worst_lower = std::max(worst_lower, pen.values[m][i] - lcp.values[m][i]);
            worst_upper =
                std::max(worst_upper, lcp.values[m][i] - (pen.values[m][i] + bp.lambda_eps));
        }
    const bool sandwich_ok = worst_lower <= tol && worst_upper <= tol;

    pl::CsvTable t;
    t.embedded_config = cfgline;
    t.header = {"S", "payoff", "lower", "upper", "v_lcp", "analytic_lower"};
    for (int i = 0; i < grid.node_count(); ++i)
        t.rows.push_back({pl::csv_cell(grid.node(i)), pl::csv_cell(pen.payoff_values[i]),
                          pl::csv_cell(pen.values[0][i]),
                          pl::csv_cell(pen.values[0][i] + bp.lambda_eps),
                          pl::csv_cell(lcp.values[0][i]), pl::csv_cell(bp.analytic_lower[i])});
    pl::write_csv(out / "bounds.csv", t);

    json meta = base_metadata("bounds", cfg, model, grid);
    meta["penalty_solve"] = solver_stats(pen);
    meta["lcp_solve"] = solver_stats(lcp);
    meta["bounds"] = {{"lambda_eps", bp.lambda_eps},
                      {"argmax_level", bp.argmax_level},
                      {"argmax_node", bp.argmax_node},
                      {"argmax_s", grid.node(bp.argmax_node)},
                      {"argmax_t", grid.time(bp.argmax_level)},
                      {"binds", site_name(bp.binds)},
                      {"sandwich_ok", sandwich_ok},
                      {"worst_lower_violation", worst_lower},
                      {"worst_upper_violation", worst_upper},
                      {"tolerance", tol}};
    write_metadata(out, meta, {"bounds.csv"});

    if (!args.quiet)
        std::cout << "lambda_eps = " << bp.lambda_eps << " (binds at " << site_name(bp.binds)
                  << ", S=" << grid.node(bp.argmax_node) << ", t=" << grid.time(bp.argmax_level)
                  << ")\n"
                  << "sandwich " << (sandwich_ok ? "holds" : "VIOLATED") << " at tolerance "
                  << tol << "\n";
    if (!sandwich_ok)
        throw pl::SolverError("bounds sandwich violated", std::max(worst_lower, worst_upper));
    return 0;
}

int cmd_asymptotics(const CommonArgs& args) {
    const pl::RunConfig cfg = pl::load_config(args.config_path);
    if (cfg.solver.mode != pl::SolveMode::penalty)
        throw std::invalid_argument("config: asymptotics requires solver.mode = penalty");
    if (cfg.payoff_type != "put")
        throw std::invalid_argument(
            "config: the asymptotics command compares against put corrections; payoff.type "
            "must be put");
    const pl::MarketModel model = pl::make_model(cfg);
    const pl::Payoff payoff = pl::make_payoff(cfg);
    const pl::Grid grid = pl::make_grid(cfg);
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    const std::string cfgline = pl::resolved_config_json(cfg);

    const double eps = cfg.solver.epsilon;
    const pl::Surface pen = pl::price(model, payoff, grid, cfg.solver);
    pl::SolverConfig ref_cfg = cfg.solver;
    ref_cfg.mode = pl::SolveMode::lcp;
    const pl::Surface lcp = pl::price(model, payoff, grid, ref_cfg);

    const double b_pen =
        pl::exercise_boundary(pen, payoff, 0.0, pl::Topology::put_like).location[0];
    const double b_lcp =
        pl::exercise_boundary(lcp, payoff, 0.0, pl::Topology::put_like).location[0];
    if (!std::isfinite(b_pen) || !std::isfinite(b_lcp))
        throw pl::SolverError("no exercise region found at t=0", 0.0);

    const pl::PutCorrection pc = pl::put_correction(model, cfg.strike, eps);

    double plateau = 0.0;
    for (int i = 0; i < grid.node_count() && grid.node(i) <= b_pen; ++i)
        plateau = std::max(plateau, lcp.values[0][i] - pen.values[0][i]);
    const double at_boundary = lcp.interpolate(0, b_pen) - pen.interpolate(0, b_pen);
    const double offset = b_pen - b_lcp;
    const double predicted_offset = b_lcp * pc.crossing_offset_factor;

    pl::CsvTable t;
    t.embedded_config = cfgline;
    t.header = {"quantity", "computed", "predicted", "rel_diff"};
    auto row = [&](const char* name, double computed, double predicted) {
        t.rows.push_back({name, pl::csv_cell(computed), pl::csv_cell(predicted),
                          pl::csv_cell((computed - predicted) / std::fabs(predicted))});
    };
    row("exercise_plateau", plateau, -pc.exercise_plateau);
    row("boundary_value", at_boundary, -pc.boundary_value_correction);
    row("boundary_to_plateau_ratio", at_boundary / plateau, 0.5);
    row("crossing_offset", offset, predicted_offset);

    if (model.has_jumps()) {
        row("plateau_at_zero", lcp.values[0][0] - pen.values[0][0],
            eps * model.r() * cfg.strike);
        const pl::JumpBoundaryGamma jbg =
            pl::jump_boundary_gamma(model, cfg.strike, b_lcp, lcp, 0);
        int j = static_cast<int>(std::ceil((b_lcp + 2.0 * grid.h) / grid.h));
        j = std::min(j, grid.n_interior);
        const double gamma_fd = (lcp.values[0][j + 1] - 2.0 * lcp.values[0][j] +
                                 lcp.values[0][j - 1]) /
                                (grid.h * grid.h);
        row("boundary_gamma", gamma_fd, jbg.second_derivative);
    }
    pl::write_csv(out / "asymptotics.csv", t);

    const pl::ExerciseRegionProfile prof =
        pl::exercise_region_error_profile(model, cfg.strike, lcp, b_lcp, 0);
    pl::CsvTable pt;
    pt.embedded_config = cfgline;
    pt.header = {"S", "w2", "predicted_error", "measured_error"};
    for (std::size_t i = 0; i < prof.s.size(); ++i) {
        const int node = static_cast<int>(std::lround(prof.s[i] / grid.h));
        pt.rows.push_back({pl::csv_cell(prof.s[i]), pl::csv_cell(prof.w2[i]),
                           pl::csv_cell(-eps * model.sigma() * model.sigma() * prof.w2[i]),
                           pl::csv_cell(lcp.values[0][node] - pen.values[0][node])});
    }
    pl::write_csv(out / "error_profile.csv", pt);

    json meta = base_metadata("asymptotics", cfg, model, grid);
    meta["penalty_solve"] = solver_stats(pen);
    meta["lcp_solve"] = solver_stats(lcp);
    meta["boundary"] = {{"penalty_crossing", b_pen},
                        {"lcp_boundary", b_lcp},
                        {"delta_param", pc.delta_param}};
    write_metadata(out, meta, {"asymptotics.csv", "error_profile.csv"});

    if (!args.quiet)
        for (const auto& r : t.rows)
            std::cout << r[0] << ": computed " << r[1] << ", predicted " << r[2]
                      << " (rel diff " << r[3] << ")\n";
    return 0;
}

int cmd_extrapolate(const CommonArgs& args) {
    const pl::RunConfig cfg = pl::load_config(args.config_path);
    if (cfg.extrap_epsilons.empty())
        throw std::invalid_argument("config: the extrapolate command needs an extrapolate block");
    if (cfg.solver.mode != pl::SolveMode::penalty)
        throw std::invalid_argument("config: extrapolate requires solver.mode = penalty");
    const pl::MarketModel model = pl::make_model(cfg);
    const pl::Payoff payoff = pl::make_payoff(cfg);
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    const std::string cfgline = pl::resolved_config_json(cfg);

    struct Rung {
        pl::Grid grid;
        double v_err, d_err, ev_err, ed_err;           // against same-grid LCP
        std::vector<double> pen_v0, pen_d0, ext_v0, ext_d0, ref_v0, ref_d0;
        json stats;
    };

    auto solve_rung = [&](std::size_t j) {
        pl::RunConfig rc = cfg;
        rc.n = cfg.extrap_n[j];
        rc.m = cfg.extrap_m[j];
        const pl::Grid grid = pl::make_grid(rc);
        const double eps = cfg.extrap_epsilons[j];

        pl::SolverConfig pc = cfg.solver;
        pc.epsilon = eps;
        const pl::Surface pen = pl::price(model, payoff, grid, pc);
        pc.epsilon = 2.0 * eps;
        const pl::Surface pen2 = pl::price(model, payoff, grid, pc);
        pl::SolverConfig rcfg = cfg.solver;
        rcfg.mode = pl::SolveMode::lcp;
        const pl::Surface ref = pl::price(model, payoff, grid, rcfg);
        const pl::Surface ext = pl::richardson(pen, pen2);

        const pl::Surface dpen = pl::delta(pen), dref = pl::delta(ref), dext = pl::delta(ext);

        Rung rung;
        rung.grid = grid;
        rung.v_err = rung.d_err = rung.ev_err = rung.ed_err = 0.0;
        for (int i = 0; i < grid.node_count(); ++i) {
            rung.v_err = std::max(rung.v_err, std::fabs(pen.values[0][i] - ref.values[0][i]));
            rung.ev_err = std::max(rung.ev_err, std::fabs(ext.values[0][i] - ref.values[0][i]));
            rung.d_err = std::max(rung.d_err, std::fabs(dpen.values[0][i] - dref.values[0][i]));
            rung.ed_err =
                std::max(rung.ed_err, std::fabs(dext.values[0][i] - dref.values[0][i]));
        }
        rung.pen_v0 = pen.values[0];
        rung.pen_d0 = dpen.values[0];
        rung.ext_v0 = ext.values[0];
        rung.ext_d0 = dext.values[0];
        rung.ref_v0 = ref.values[0];
        rung.ref_d0 = dref.values[0];
        rung.stats = {{"epsilon", eps},
                      {"penalty", solver_stats(pen)},
                      {"penalty_2eps", solver_stats(pen2)},
                      {"lcp", solver_stats(ref)}};
        return rung;
    };

    const std::size_t n_rungs = cfg.extrap_epsilons.size();
    std::vector<Rung> rungs;
    if (args.parallel) {
        std::vector<std::future<Rung>> futures;
        for (std::size_t j = 0; j < n_rungs; ++j)
            futures.push_back(std::async(std::launch::async, solve_rung, j));
        for (auto& f : futures) rungs.push_back(f.get());
    } else {
        for (std::size_t j = 0; j < n_rungs; ++j) rungs.push_back(solve_rung(j));
    }

    // the same quantities against the finest-grid LCP reference, restricted
    const Rung& finest = rungs.back();
    std::vector<double> vf(n_rungs), df(n_rungs), evf(n_rungs), edf(n_rungs);
    for (std::size_t j = 0; j < n_rungs; ++j) {
        const int rs = (finest.grid.n_interior + 1) / (rungs[j].grid.n_interior + 1);
        double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
        for (int i = 0; i < rungs[j].grid.node_count(); ++i) {
            const int fi = std::min(i * rs, finest.grid.node_count() - 1);
            a = std::max(a, std::fabs(rungs[j].pen_v0[i] - finest.ref_v0[fi]));
            b = std::max(b, std::fabs(rungs[j].pen_d0[i] - finest.ref_d0[fi]));
            c = std::max(c, std::fabs(rungs[j].ext_v0[i] - finest.ref_v0[fi]));
            d = std::max(d, std::fabs(rungs[j].ext_d0[i] - finest.ref_d0[fi]));
        }
        vf[j] = a;
        df[j] = b;
        evf[j] = c;
        edf[j] = d;
    }

    pl::CsvTable t;
    t.embedded_config = cfgline;
    t.header = {"epsilon", "n", "m", "value_err", "delta_err", "extrap_value_err",
                "extrap_delta_err", "value_err_finest_ref", "delta_err_finest_ref",
                "extrap_value_err_finest_ref", "extrap_delta_err_finest_ref"};
    std::vector<double> ve, de, eve, ede;
    for (std::size_t j = 0; j < n_rungs; ++j) {
        const Rung& r = rungs[j];
        ve.push_back(r.v_err);
        de.push_back(r.d_err);
        eve.push_back(r.ev_err);
        ede.push_back(r.ed_err);
        t.rows.push_back({pl::csv_cell(cfg.extrap_epsilons[j]),
                          std::to_string(r.grid.n_interior), std::to_string(r.grid.time_steps),
                          pl::csv_cell(r.v_err), pl::csv_cell(r.d_err), pl::csv_cell(r.ev_err),
                          pl::csv_cell(r.ed_err), pl::csv_cell(vf[j]), pl::csv_cell(df[j]),
                          pl::csv_cell(evf[j]), pl::csv_cell(edf[j])});
    }
    pl::write_csv(out / "extrapolate_errors.csv", t);

    std::vector<std::string> regress_warnings;
    auto order_of = [&](const std::vector<double>& col) {
        pl::OrderFit f = pl::regress_order(cfg.extrap_epsilons, col);
        regress_warnings.insert(regress_warnings.end(), f.warnings.begin(), f.warnings.end());
        return f;
    };
    pl::CsvTable ot;
    ot.embedded_config = cfgline;
    ot.header = {"quantity", "order", "intercept", "residual_rms", "points_used"};
    std::vector<std::pair<std::string, const std::vector<double>*>> cols = {
        {"value", &ve},
        {"delta", &de},
        {"extrap_value", &eve},
        {"extrap_delta", &ede},
        {"value_finest_ref", &vf},
        {"delta_finest_ref", &df},
        {"extrap_value_finest_ref", &evf},
        {"extrap_delta_finest_ref", &edf}};
    for (const auto& [name, col] : cols) {
        const pl::OrderFit f = order_of(*col);
        ot.rows.push_back({name, pl::csv_cell(f.order), pl::csv_cell(f.intercept),
                           pl::csv_cell(f.residual_rms), std::to_string(f.points_used)});
    }
    pl::write_csv(out / "extrapolate_orders.csv", ot);

    json meta = base_metadata("extrapolate", cfg, model, rungs.front().grid);
    json rs = json::array();
    for (const Rung& r : rungs) rs.push_back(r.stats);
    meta["rungs"] = rs;
    meta["regress_warnings"] = regress_warnings;
    write_metadata(out, meta, {"extrapolate_errors.csv", "extrapolate_orders.csv"});

    if (!args.quiet)
        for (const auto& r : ot.rows)
            std::cout << r[0] << ": order " << r[1] << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"American option pricing by a penalised obstacle problem: solves, error "
                 "ladders, bounds, asymptotic checks and Richardson extrapolation"};
    app.footer("Runs are deterministic; the PENLAB_SEED environment variable is accepted for "
               "compatibility and ignored.");
    app.require_subcommand(1);

    CommonArgs args;
    CLI::App* c_price =
        app.add_subcommand("price", "solve one configuration, write surface and boundary");
    CLI::App* c_conv =
        app.add_subcommand("converge", "run an epsilon ladder and fit convergence orders");
    CLI::App* c_bounds =
        app.add_subcommand("bounds", "compute the penalty sandwich and plot data");
    CLI::App* c_asym = app.add_subcommand(
        "asymptotics", "compare measured penalisation error against closed-form corrections");
    CLI::App* c_ext = app.add_subcommand(
        "extrapolate", "eliminate the leading error term across a coupled grid ladder");
    for (CLI::App* c : {c_price, c_conv, c_bounds, c_asym, c_ext}) add_common(c, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(c_price)) return cmd_price(args);
        if (app.got_subcommand(c_conv)) return cmd_converge(args);
        if (app.got_subcommand(c_bounds)) return cmd_bounds(args);
        if (app.got_subcommand(c_asym)) return cmd_asymptotics(args);
        if (app.got_subcommand(c_ext)) return cmd_extrapolate(args);
    } catch (const pl::SolverError& e) {
        std::cerr << "numerical failure: " << e.what() << " (residual " << e.residual()
                  << ")\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

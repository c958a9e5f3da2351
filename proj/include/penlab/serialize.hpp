#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "penlab/grid.hpp"
#include "penlab/market_model.hpp"
#include "penlab/payoff.hpp"
#include "penlab/solver.hpp"

namespace penlab {

/// A run configuration parsed from JSON. Parsing is strict: unknown fields at
/// any level are rejected, enum strings are validated, and the model, payoff
/// and grid are constructed eagerly so that every bad value is caught up
/// front. Defaults are materialised into the struct, and resolved_config_json
/// reproduces the whole thing, so a run can be replayed exactly from its own
/// output.
struct RunConfig {
    int schema_version = 1;

    // model block
    double sigma = 0.0;
    double r = 0.0;
    double q = 0.0;
    double lambda = 0.0;
    std::string jump_kind = "none";  // none|point_mass|lognormal|double_exponential
    double jump_j0 = 1.0;            // point_mass
    double jump_mu = 0.0;            // lognormal
    double jump_sigma = 0.0;         // lognormal
    double jump_p = 0.5;             // double_exponential
    double jump_eta_up = 0.0;        // double_exponential
    double jump_eta_down = 0.0;      // double_exponential

    // payoff block
    std::string payoff_type;  // put|call|straddle|butterfly|modified_put|custom
    double strike = 100.0;
    double peak_value = 32.0;
    double alpha = 1.0;
    double centre = 0.0;
    double kink_location = 105.0;
    std::vector<double> breakpoints;  // custom
    std::vector<double> values;       // custom
    double left_slope = 0.0;          // custom
    double right_slope = 0.0;         // custom

    // grid block (s_max resolved during parse when omitted)
    double s_max = 0.0;
    int n = 0;
    int m = 0;
    double maturity = 0.0;
    double theta = 0.5;
    int rannacher_steps = 2;

    // solver block
    SolverConfig solver;

    // converge block (optional)
    std::vector<double> ladder_epsilons;
    std::vector<double> time_slices{0.4, 0.9};

    // extrapolate block (optional): per-rung epsilon with its grid sizes
    std::vector<double> extrap_epsilons;
    std::vector<int> extrap_n;
    std::vector<int> extrap_m;
};

RunConfig parse_config_text(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

/// Single-line JSON with every default filled in; feeding it back through
/// parse_config_text yields the same RunConfig. Key order is deterministic.
std::string resolved_config_json(const RunConfig& cfg);

MarketModel make_model(const RunConfig& cfg);
Payoff make_payoff(const RunConfig& cfg);
Grid make_grid(const RunConfig& cfg);

/// Decimal float cell with 17 significant digits (lossless round trip).
std::string csv_cell(double x);

/// CSV with one leading "# config=<json>" comment line (skipped by the usual
/// readers) followed by a header row and data rows.
struct CsvTable {
    std::string embedded_config;  // single-line JSON
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Wide surface table: one row per node, first column S, then one column per
/// time level t=0..T.
void write_wide_surface_csv(const std::filesystem::path& path, const Grid& grid,
                            const std::vector<std::vector<double>>& values,
                            const std::string& embedded_config);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace penlab

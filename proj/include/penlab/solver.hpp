#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "penlab/discrete_operator.hpp"
#include "penlab/grid.hpp"
#include "penlab/market_model.hpp"
#include "penlab/payoff.hpp"

namespace penlab {

enum class SolveMode { penalty, lcp, european };
enum class JumpCoupling { implicit, lagged };

struct NewtonParams {
    int max_iters = 50;
    double tol = 1e-9;  // relative update/residual tolerance
};

struct PsorParams {
    double omega = 1.5;
    double tol = 1e-10;  // max nodal update per sweep
    long max_sweeps = 100000;
};

struct SolverConfig {
    SolveMode mode = SolveMode::penalty;
    double epsilon = 1e-4;  // penalty parameter; ignored in lcp/european modes
    NewtonParams newton;
    PsorParams psor;
    JumpCoupling jump_coupling = JumpCoupling::lagged;
    double jump_tol = 1e-10;  // lagged fixed-point tolerance
    int jump_max_outer = 500;
};

/// Numerical failure (non-convergence); carries the last residual seen.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

/// Per-time-step solver diagnostics.
struct LevelInfo {
    int iterations = 0;      // Newton iterations or PSOR sweeps
    double residual = 0.0;   // final nonlinear residual (sup norm, relative)
    double min_gap = 0.0;    // min(v - payoff) over unknowns after the step
    int jump_outer = 0;      // lagged coupling outer iterations
};

/// Value surface on a Grid: values[m][i] at time level m (0..M) and node i
/// (0..N+1). Level M holds the payoff exactly. Carries the model, config and
/// per-step diagnostics of the run that produced it.
struct Surface {
    Grid grid;
    MarketModel model;
    SolverConfig config;
    std::vector<double> payoff_values;         // all nodes
    std::vector<std::vector<double>> values;   // [level][node]
    std::vector<LevelInfo> level_info;         // index = target level of the step
    std::vector<std::string> warnings;

    int levels() const { return grid.time_steps + 1; }
    double value(int level, int node) const { return values[level][node]; }
    /// Linear interpolation in S at a fixed level.
    double interpolate(int level, double S) const;
};

/// One theta-step of the penalised equation, penalty term fully implicit with
/// discrete weight k_eff/epsilon. Semismooth Newton on the active set
/// {i : v_i < psi_i} (ties count as inactive); terminates when the active set
/// repeats, which solves the piecewise-linear system exactly.
std::vector<double> step_penalty(const DiscreteOperator& op, std::span<const double> v_next,
                                 std::span<const double> obstacle, double epsilon,
                                 const SolverConfig& cfg, double theta_eff, double k_eff,
                                 LevelInfo* info = nullptr);

/// One theta-step of the obstacle problem solved as an LCP by projected SOR.
std::vector<double> step_psor(const DiscreteOperator& op, std::span<const double> v_next,
                              std::span<const double> obstacle, const SolverConfig& cfg,
                              double theta_eff, double k_eff, LevelInfo* info = nullptr);

/// One unconstrained theta-step (European pricing).
std::vector<double> step_european(const DiscreteOperator& op, std::span<const double> v_next,
                                  const SolverConfig& cfg, double theta_eff, double k_eff,
                                  LevelInfo* info = nullptr);

/// Backward induction from the payoff with Rannacher startup: the first
/// rannacher_steps/2 intervals are integrated by two fully implicit half-steps
/// each, the rest by single theta-steps. Deterministic: identical inputs give
/// bitwise identical surfaces.
Surface price(const MarketModel& model, const Payoff& payoff, const Grid& grid,
              const SolverConfig& cfg);

/// Central-difference Delta surface (one-sided at the domain edges).
Surface delta(const Surface& surface);

/// Projected SOR on a standalone tridiagonal LCP min(Ax - b, x - c) = 0;
/// pass obstacle values of -inf for plain SOR. Exposed for direct testing.
std::vector<double> psor_solve(const Tridiagonal& a, std::span<const double> b,
                               std::span<const double> c, std::span<const double> start,
                               const PsorParams& params, int* sweeps = nullptr);

}  // namespace penlab

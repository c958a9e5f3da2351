#pragma once

#include <utility>
#include <vector>

#include "penlab/payoff.hpp"

namespace penlab {

/// Uniform tensor grid on [0, S_max] x [0, T]. Node i sits at i*h for
/// i = 0..N+1 with h = S_max/(N+1); time level m sits at m*k with k = T/M.
/// Every payoff breakpoint coincides with a grid node; N is the smallest
/// count at or above the requested one achieving that, and the adjustment
/// is recorded. The S=0 node carries the degenerate (no-diffusion) equation
/// and is solved for; only S_max is a Dirichlet node pinned to the payoff.
struct Grid {
    double s_max = 0.0;
    int n_interior = 0;   // N: nodes strictly between 0 and S_max
    double h = 0.0;
    double maturity = 0.0;
    int time_steps = 0;   // M
    double k = 0.0;
    double theta = 0.5;
    int rannacher_steps = 2;

    int requested_n = 0;
    bool n_adjusted = false;
    /// (breakpoint, node index) for each payoff breakpoint.
    std::vector<std::pair<double, int>> breakpoint_nodes;

    int node_count() const { return n_interior + 2; }
    double node(int i) const { return i * h; }
    double time(int m) const { return m * k; }
    std::vector<double> nodes() const;
};

/// Default truncation: S_max = 4 * (largest payoff breakpoint).
double default_s_max(const Payoff& payoff);

/// Build a breakpoint-aligned grid. theta in [1/2, 1]; rannacher_steps is the
/// even count of fully implicit half-steps taken before theta-stepping begins.
Grid build_grid(const Payoff& payoff, int n, int m, double s_max, double maturity,
                double theta = 0.5, int rannacher_steps = 2);

}  // namespace penlab

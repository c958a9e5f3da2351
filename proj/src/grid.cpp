#include "penlab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace penlab {

namespace {

/// Node index for breakpoint b under h = s_max/(n+1), or -1 if misaligned.
int aligned_index(double b, double s_max, int n) {
    const double exact = b * (n + 1) / s_max;
    const double rounded = std::round(exact);
    if (std::fabs(exact - rounded) > 1e-9 * (n + 1)) return -1;
    if (rounded < 1.0 || rounded > n) return -1;
    return static_cast<int>(rounded);
}

}  // namespace

std::vector<double> Grid::nodes() const {
    std::vector<double> out(node_count());
    for (int i = 0; i < node_count(); ++i) out[i] = node(i);
    return out;
}

double default_s_max(const Payoff& payoff) { return 4.0 * payoff.breakpoints().back(); }

Grid build_grid(const Payoff& payoff, int n, int m, double s_max, double maturity,
                double theta, int rannacher_steps) {
    if (n < 16) throw std::invalid_argument("grid: N must be at least 16");
    if (m < 4) throw std::invalid_argument("grid: M must be at least 4");
    if (!(s_max > 0.0)) throw std::invalid_argument("grid: S_max must be positive");
    if (!(maturity > 0.0)) throw std::invalid_argument("grid: maturity must be positive");
    if (!(theta >= 0.5 && theta <= 1.0)) throw std::invalid_argument("grid: theta must be in [1/2, 1]");
    if (rannacher_steps < 0 || rannacher_steps % 2 != 0)
        throw std::invalid_argument("grid: rannacher_steps must be even and nonnegative");
    for (double b : payoff.breakpoints())
        if (!(b > 0.0 && b < s_max))
            throw std::invalid_argument("grid: payoff breakpoint outside (0, S_max)");

    Grid g;
    g.s_max = s_max;
    g.maturity = maturity;
    g.time_steps = m;
    g.k = maturity / m;
    g.theta = theta;
    g.rannacher_steps = rannacher_steps;
    g.requested_n = n;

    const auto& bps = payoff.breakpoints();
    const int n_cap = std::max(8 * n, n + 4096);
    for (int cand = n; cand <= n_cap; ++cand) {
        bool ok = true;
        std::vector<std::pair<double, int>> hits;
        hits.reserve(bps.size());
        for (double b : bps) {
            const int idx = aligned_index(b, s_max, cand);
            if (idx < 0) { ok = false; break; }
            hits.emplace_back(b, idx);
        }
        if (!ok) continue;
        g.n_interior = cand;
        g.h = s_max / (cand + 1);
        g.n_adjusted = cand != n;
        g.breakpoint_nodes = std::move(hits);
        return g;
    }
    throw std::invalid_argument("grid: could not align payoff breakpoints with grid nodes");
}

}  // namespace penlab

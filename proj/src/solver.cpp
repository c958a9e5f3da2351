#include "penlab/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace penlab {

namespace {

double sup_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

double sup_abs(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::fabs(x));
    return m;
}

/// rhs of the theta-step: v+ + k(1-theta) * (matrix part applied to v+) + k * constants.
std::vector<double> step_rhs(const DiscreteOperator& op, std::span<const double> v_next,
                             double theta_eff, double k_eff) {
    std::vector<double> av = op.apply_tridiagonal_part(v_next);
    if (op.has_jump()) {
        const std::vector<double> jv = op.apply_jump_matrix(v_next);
        for (std::size_t i = 0; i < av.size(); ++i) av[i] += jv[i];
    }
    const std::vector<double> c = op.constant_term();
    std::vector<double> rhs(av.size());
    for (std::size_t i = 0; i < av.size(); ++i)
        rhs[i] = v_next[i] + k_eff * (1.0 - theta_eff) * av[i] + k_eff * c[i];
    return rhs;
}

double min_gap_of(std::span<const double> v, std::span<const double> obstacle) {
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v.size(); ++i) g = std::min(g, v[i] - obstacle[i]);
    return g;
}

/// Penalised solve against a fixed tridiagonal matrix: semismooth Newton with
/// exact termination once the active set stabilises.
std::vector<double> newton_penalty_tri(const Tridiagonal& a, std::span<const double> rhs,
                                       std::span<const double> obstacle, double large,
                                       std::span<const double> start, const NewtonParams& np,
                                       int* iters_out, double* residual_out) {
    const std::size_t n = a.size();
    std::vector<double> v(start.begin(), start.end());
    std::vector<char> active(n, 0), prev_active(n, 2);
    const double scale = std::max(1.0, sup_abs(obstacle));
    double residual = 0.0;
    int it = 0;
    Tridiagonal mod;
    std::vector<double> b(n);
    for (; it < np.max_iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) active[i] = v[i] < obstacle[i] ? 1 : 0;
        if (active == prev_active && it > 0) break;
        prev_active = active;
        mod = a;
        for (std::size_t i = 0; i < n; ++i) {
            b[i] = rhs[i];
            if (active[i]) {
                mod.diag[i] += large;
                b[i] += large * obstacle[i];
            }
        }
        const std::vector<double> v_new = solve_tridiagonal(mod, b);
        const double upd = sup_diff(v_new, v);
        v = v_new;
        if (upd <= np.tol * scale) {
            // converged by update size: confirm the set is consistent
            bool same = true;
            for (std::size_t i = 0; i < n; ++i)
                if ((v[i] < obstacle[i] ? 1 : 0) != active[i]) { same = false; break; }
            if (same) { ++it; break; }
        }
    }
    // final residual of the nonlinear system
    {
        std::vector<double> f(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double av = a.diag[i] * v[i];
            if (i > 0) av += a.sub[i] * v[i - 1];
            if (i + 1 < n) av += a.sup[i] * v[i + 1];
            f[i] = av - large * std::max(obstacle[i] - v[i], 0.0) - rhs[i];
        }
        residual = sup_abs(f) / scale;
    }
    if (residual_out) *residual_out = residual;
    if (iters_out) *iters_out = it;
    if (residual > std::max(1e-7, 100.0 * np.tol))
        throw SolverError("penalty newton: no convergence within iteration limit", residual);
    return v;
}

/// Fully coupled penalised solve with dense jump rows; dense LU per iteration.
std::vector<double> newton_penalty_dense(const DiscreteOperator& op, std::span<const double> rhs,
                                         std::span<const double> obstacle, double large,
                                         std::span<const double> start, double theta_eff,
                                         double k_eff, const NewtonParams& np, int* iters_out,
                                         double* residual_out) {
    const std::size_t n = op.size();
    const std::vector<std::vector<double>> base = op.system_dense(theta_eff, k_eff);
    Eigen::MatrixXd a0(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a0(i, j) = base[i][j];
    std::vector<double> v(start.begin(), start.end());
    std::vector<char> active(n, 0), prev_active(n, 2);
    const double scale = std::max(1.0, sup_abs(obstacle));
    int it = 0;
    double residual = 0.0;
    for (; it < np.max_iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) active[i] = v[i] < obstacle[i] ? 1 : 0;
        if (active == prev_active && it > 0) break;
        prev_active = active;
        Eigen::MatrixXd a = a0;
        Eigen::VectorXd b(n);
        for (std::size_t i = 0; i < n; ++i) {
            b(i) = rhs[i];
            if (active[i]) {
                a(i, i) += large;
                b(i) += large * obstacle[i];
            }
        }
        const Eigen::VectorXd x = a.partialPivLu().solve(b);
        double upd = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            upd = std::max(upd, std::fabs(x(i) - v[i]));
            v[i] = x(i);
        }
        if (upd <= np.tol * scale) { ++it; break; }
    }
    {
        Eigen::VectorXd vv(n);
        for (std::size_t i = 0; i < n; ++i) vv(i) = v[i];
        Eigen::VectorXd f = a0 * vv;
        double sup = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double fi = f(i) - large * std::max(obstacle[i] - v[i], 0.0) - rhs[i];
            sup = std::max(sup, std::fabs(fi));
        }
        residual = sup / scale;
    }
    if (residual_out) *residual_out = residual;
    if (iters_out) *iters_out = it;
    if (residual > std::max(1e-7, 100.0 * np.tol))
        throw SolverError("penalty newton (dense): no convergence within iteration limit",
                          residual);
    return v;
}

}  // namespace

double Surface::interpolate(int level, double S) const {
    if (S < 0.0 || S > grid.s_max) throw std::invalid_argument("surface: S outside domain");
    const double x = S / grid.h;
    const int j = std::min(static_cast<int>(x), grid.n_interior);
    const double w = x - j;
    return values[level][j] * (1.0 - w) + values[level][j + 1] * w;
}

std::vector<double> psor_solve(const Tridiagonal& a, std::span<const double> b,
                               std::span<const double> c, std::span<const double> start,
                               const PsorParams& params, int* sweeps_out) {
    const std::size_t n = a.size();
    std::vector<double> v(start.begin(), start.end());
    for (std::size_t i = 0; i < n; ++i) v[i] = std::max(v[i], c[i]);
    long sweep = 0;
    for (; sweep < params.max_sweeps; ++sweep) {
        double delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double y = b[i];
            if (i > 0) y -= a.sub[i] * v[i - 1];
            if (i + 1 < n) y -= a.sup[i] * v[i + 1];
            y /= a.diag[i];
            const double vn = std::max(c[i], v[i] + params.omega * (y - v[i]));
            delta = std::max(delta, std::fabs(vn - v[i]));
            v[i] = vn;
        }
        if (delta <= params.tol) { ++sweep; break; }
    }
    if (sweep >= params.max_sweeps)
        throw SolverError("psor: sweep limit reached", 0.0);
    if (sweeps_out) *sweeps_out = static_cast<int>(sweep);
    return v;
}

std::vector<double> step_penalty(const DiscreteOperator& op, std::span<const double> v_next,
                                 std::span<const double> obstacle, double epsilon,
                                 const SolverConfig& cfg, double theta_eff, double k_eff,
                                 LevelInfo* info) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("step_penalty: epsilon must be positive");
    const double large = k_eff / epsilon;  // discrete penalty weight
    const std::vector<double> rhs = step_rhs(op, v_next, theta_eff, k_eff);
    int iters = 0;
    double residual = 0.0;
    std::vector<double> v;

    if (!op.has_jump()) {
        const Tridiagonal a = op.system_tridiagonal(theta_eff, k_eff);
        v = newton_penalty_tri(a, rhs, obstacle, large, v_next, cfg.newton, &iters, &residual);
        if (info) *info = LevelInfo{iters, residual, min_gap_of(v, obstacle), 0};
        return v;
    }

    if (cfg.jump_coupling == JumpCoupling::implicit) {
        v = newton_penalty_dense(op, rhs, obstacle, large, v_next, theta_eff, k_eff, cfg.newton,
                                 &iters, &residual);
        if (info) *info = LevelInfo{iters, residual, min_gap_of(v, obstacle), 0};
        return v;
    }

    // lagged coupling: dense jump term on the rhs, refreshed to a fixed point
    const Tridiagonal a = op.system_tridiagonal(theta_eff, k_eff);
    v.assign(v_next.begin(), v_next.end());
    std::vector<double> rhs_p(rhs.size());
    int outer = 0;
    for (; outer < cfg.jump_max_outer; ++outer) {
        const std::vector<double> jv = op.apply_jump_matrix(v);
        for (std::size_t i = 0; i < rhs.size(); ++i)
            rhs_p[i] = rhs[i] + k_eff * theta_eff * jv[i];
        const std::vector<double> v_new =
            newton_penalty_tri(a, rhs_p, obstacle, large, v, cfg.newton, &iters, &residual);
        const double change = sup_diff(v_new, v);
        v = v_new;
        if (change <= cfg.jump_tol) { ++outer; break; }
    }
    if (outer >= cfg.jump_max_outer)
        throw SolverError("step_penalty: lagged jump coupling did not reach a fixed point",
                          residual);
    if (info) *info = LevelInfo{iters, residual, min_gap_of(v, obstacle), outer};
    return v;
}

std::vector<double> step_psor(const DiscreteOperator& op, std::span<const double> v_next,
                              std::span<const double> obstacle, const SolverConfig& cfg,
                              double theta_eff, double k_eff, LevelInfo* info) {
    const std::vector<double> rhs = step_rhs(op, v_next, theta_eff, k_eff);
    const Tridiagonal a = op.system_tridiagonal(theta_eff, k_eff);
    int sweeps = 0;
    std::vector<double> v;

    if (!op.has_jump()) {
        v = psor_solve(a, rhs, obstacle, v_next, cfg.psor, &sweeps);
        if (info) *info = LevelInfo{sweeps, cfg.psor.tol, min_gap_of(v, obstacle), 0};
        return v;
    }

    // jump rows enter through the rhs; outer fixed point to the coupled LCP
    v.assign(v_next.begin(), v_next.end());
    std::vector<double> rhs_p(rhs.size());
    int outer = 0;
    int total_sweeps = 0;
    for (; outer < cfg.jump_max_outer; ++outer) {
        const std::vector<double> jv = op.apply_jump_matrix(v);
        for (std::size_t i = 0; i < rhs.size(); ++i)
            rhs_p[i] = rhs[i] + k_eff * theta_eff * jv[i];
        const std::vector<double> v_new = psor_solve(a, rhs_p, obstacle, v, cfg.psor, &sweeps);
        total_sweeps += sweeps;
        const double change = sup_diff(v_new, v);
        v = v_new;
        if (change <= cfg.jump_tol) { ++outer; break; }
    }
    if (outer >= cfg.jump_max_outer)
        throw SolverError("step_psor: lagged jump coupling did not reach a fixed point", 0.0);
    if (info) *info = LevelInfo{total_sweeps, cfg.psor.tol, min_gap_of(v, obstacle), outer};
    return v;
}

std::vector<double> step_european(const DiscreteOperator& op, std::span<const double> v_next,
                                  const SolverConfig& cfg, double theta_eff, double k_eff,
                                  LevelInfo* info) {
    const std::vector<double> rhs = step_rhs(op, v_next, theta_eff, k_eff);
    const Tridiagonal a = op.system_tridiagonal(theta_eff, k_eff);
    std::vector<double> v;
    int outer = 0;
    if (!op.has_jump()) {
        v = solve_tridiagonal(a, rhs);
    } else if (cfg.jump_coupling == JumpCoupling::implicit) {
        const std::size_t n = op.size();
        const auto base = op.system_dense(theta_eff, k_eff);
        Eigen::MatrixXd m(n, n);
        Eigen::VectorXd b(n);
        for (std::size_t i = 0; i < n; ++i) {
            b(i) = rhs[i];
            for (std::size_t j = 0; j < n; ++j) m(i, j) = base[i][j];
        }
        const Eigen::VectorXd x = m.partialPivLu().solve(b);
        v.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) v[i] = x(i);
    } else {
        v.assign(v_next.begin(), v_next.end());
        std::vector<double> rhs_p(rhs.size());
        for (; outer < cfg.jump_max_outer; ++outer) {
            const std::vector<double> jv = op.apply_jump_matrix(v);
            for (std::size_t i = 0; i < rhs.size(); ++i)
                rhs_p[i] = rhs[i] + k_eff * theta_eff * jv[i];
            const std::vector<double> v_new = solve_tridiagonal(a, rhs_p);
            const double change = sup_diff(v_new, v);
            v = v_new;
            if (change <= cfg.jump_tol) { ++outer; break; }
        }
        if (outer >= cfg.jump_max_outer)
            throw SolverError("step_european: lagged jump coupling did not reach a fixed point",
                              0.0);
    }
    if (info) *info = LevelInfo{1, 0.0, 0.0, outer};
    return v;
}

Surface price(const MarketModel& model, const Payoff& payoff, const Grid& grid,
              const SolverConfig& cfg) {
    if (cfg.mode == SolveMode::penalty && !(cfg.epsilon > 0.0))
        throw std::invalid_argument("price: penalty mode needs epsilon > 0");
    if (!(cfg.psor.omega > 0.0 && cfg.psor.omega < 2.0))
        throw std::invalid_argument("price: psor omega must be in (0, 2)");

    const DiscreteOperator op = assemble_operator(model, grid, payoff);
    const int n_unknown = grid.n_interior + 1;
    const int n_nodes = grid.node_count();

    Surface surf{grid, model, cfg, {}, {}, {}, {}};
    surf.payoff_values.resize(n_nodes);
    for (int i = 0; i < n_nodes; ++i) surf.payoff_values[i] = payoff(grid.node(i));
    const double ratio = grid.k / grid.h;
    if (ratio < 1e-6 || ratio > 1e2)
        surf.warnings.push_back("degenerate k/h ratio: " + std::to_string(ratio));

    surf.values.assign(grid.time_steps + 1, {});
    surf.level_info.assign(grid.time_steps, LevelInfo{});
    surf.values[grid.time_steps] = surf.payoff_values;

    std::vector<double> obstacle(surf.payoff_values.begin(),
                                 surf.payoff_values.begin() + n_unknown);
    std::vector<double> v(obstacle);

    const int startup_intervals = grid.rannacher_steps / 2;
    for (int m = grid.time_steps - 1; m >= 0; --m) {
        const int step_index = grid.time_steps - 1 - m;
        LevelInfo info;
        auto advance = [&](std::span<const double> prev, double th, double kk,
                           LevelInfo* li) -> std::vector<double> {
            switch (cfg.mode) {
                case SolveMode::penalty:
                    return step_penalty(op, prev, obstacle, cfg.epsilon, cfg, th, kk, li);
                case SolveMode::lcp:
                    return step_psor(op, prev, obstacle, cfg, th, kk, li);
                case SolveMode::european:
                    return step_european(op, prev, cfg, th, kk, li);
            }
            throw std::logic_error("price: unknown mode");
        };
        if (step_index < startup_intervals) {
            LevelInfo half;
            const std::vector<double> mid = advance(v, 1.0, 0.5 * grid.k, &half);
            v = advance(mid, 1.0, 0.5 * grid.k, &info);
            info.iterations += half.iterations;
            info.jump_outer += half.jump_outer;
        } else {
            v = advance(v, grid.theta, grid.k, &info);
        }
        surf.level_info[m] = info;
        surf.values[m].resize(n_nodes);
        std::copy(v.begin(), v.end(), surf.values[m].begin());
        surf.values[m][n_nodes - 1] = op.far_value();
    }
    return surf;
}

Surface delta(const Surface& surface) {
    const Grid& g = surface.grid;
    if (g.n_interior < 3) throw std::invalid_argument("delta: needs at least 3 interior nodes");
    Surface d{g, surface.model, surface.config, surface.payoff_values, {}, {}, {}};
    d.values.assign(surface.values.size(), std::vector<double>(g.node_count()));
    const double h = g.h;
    const int last = g.node_count() - 1;
    for (std::size_t m = 0; m < surface.values.size(); ++m) {
        const auto& v = surface.values[m];
        auto& dv = d.values[m];
        dv[0] = (v[1] - v[0]) / h;
        for (int i = 1; i < last; ++i) dv[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
        dv[last] = (v[last] - v[last - 1]) / h;
    }
    return d;
}

}  // namespace penlab

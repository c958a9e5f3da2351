#include "penlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "penlab/market_model.hpp"

namespace penlab {

namespace {

void require_same_grid(const Grid& a, const Grid& b, const char* who) {
    if (a.n_interior != b.n_interior || a.time_steps != b.time_steps ||
        a.s_max != b.s_max || a.maturity != b.maturity)
        throw std::invalid_argument(std::string(who) + ": surfaces on different grids");
}

/// Trapezoid weight over the node line: h/2 at the ends, h inside.
double space_weight(const Grid& g, int i) {
    return (i == 0 || i == g.node_count() - 1) ? 0.5 * g.h : g.h;
}

double time_weight(const Grid& g, int m, int last_level) {
    return (m == 0 || m == last_level) ? 0.5 * g.k : g.k;
}

}  // namespace

ErrorReport error_norms(const Surface& test, const Surface& reference) {
    require_same_grid(test.grid, reference.grid, "error_norms");
    const Grid& g = test.grid;
    const int levels = test.levels();
    const int nodes = g.node_count();

    const Surface d_test = delta(test);
    const Surface d_ref = delta(reference);

    ErrorReport rep;
    rep.times.resize(levels);
    rep.sup_value.assign(levels, 0.0);
    rep.sup_delta.assign(levels, 0.0);

    double l2_sq = 0.0, h1_deriv_sq = 0.0;
    for (int m = 0; m < levels; ++m) {
        rep.times[m] = g.time(m);
        double slice_val_sq = 0.0, slice_del_sq = 0.0;
        for (int i = 0; i < nodes; ++i) {
            const double ev = test.values[m][i] - reference.values[m][i];
            const double ed = d_test.values[m][i] - d_ref.values[m][i];
            rep.sup_value[m] = std::max(rep.sup_value[m], std::fabs(ev));
            rep.sup_delta[m] = std::max(rep.sup_delta[m], std::fabs(ed));
            slice_val_sq += space_weight(g, i) * ev * ev;
            slice_del_sq += space_weight(g, i) * ed * ed;
        }
        l2_sq += time_weight(g, m, levels - 1) * slice_val_sq;
        if (m < levels - 1)  // Delta part excludes the payoff level
            h1_deriv_sq += time_weight(g, m, levels - 2) * slice_del_sq;
    }
    rep.sup_delta[levels - 1] = 0.0;  // both surfaces hold the payoff at t=T
    rep.l2_value = std::sqrt(l2_sq);
    rep.h1 = std::sqrt(l2_sq + h1_deriv_sq);
    return rep;
}

int level_for_tte(const Grid& grid, double tau) {
    if (tau < 0.0 || tau > grid.maturity)
        throw std::invalid_argument("level_for_tte: tau outside [0, T]");
    const double t = grid.maturity - tau;
    const double exact = t / grid.k;
    const int m = static_cast<int>(std::round(exact));
    if (std::fabs(exact - m) > 1e-9 * std::max(1.0, exact))
        throw std::invalid_argument("level_for_tte: tau does not land on a time level");
    return m;
}

BoundaryCurve exercise_boundary(const Surface& surface, const Payoff& payoff, double tol,
                                Topology topology, double stagnation_tol) {
    const Grid& g = surface.grid;
    if (stagnation_tol < 0.0) stagnation_tol = g.h / 20.0;

    // butterfly: only the region right of the concave peak is scanned
    double scan_floor = 0.0;
    if (topology == Topology::butterfly) {
        double peak = -1.0;
        for (const Kink& k : payoff.kinks())
            if (k.convexity == Convexity::concave) peak = std::max(peak, k.location);
        if (peak < 0.0)
            throw std::invalid_argument("exercise_boundary: butterfly payoff has no concave kink");
        scan_floor = peak;
    }

    const int top = g.n_interior;  // topmost non-Dirichlet node
    BoundaryCurve curve;
    curve.location.assign(surface.levels(), std::numeric_limits<double>::quiet_NaN());
    for (int m = 0; m < surface.levels(); ++m) {
        const auto& v = surface.values[m];
        for (int i = top; i >= 0 && g.node(i) >= scan_floor; --i) {
            const double d = v[i] - surface.payoff_values[i];
            if (d > tol) continue;
            if (i == top) {
                curve.location[m] = g.node(i);  // everything on the side qualifies
            } else {
                const double d_up = v[i + 1] - surface.payoff_values[i + 1];
                curve.location[m] = g.node(i) + g.h * (tol - d) / (d_up - d);
            }
            break;
        }
    }

    // waiting-time detection: runs of at least 3 levels with tiny movement
    const int last = surface.levels() - 2;  // exclude the payoff level
    int run_start = -1;
    for (int m = 0; m <= last; ++m) {
        const bool linked =
            m > 0 && std::isfinite(curve.location[m]) && std::isfinite(curve.location[m - 1]) &&
            std::fabs(curve.location[m] - curve.location[m - 1]) <= stagnation_tol;
        if (linked) {
            if (run_start < 0) run_start = m - 1;
            if (m < last) continue;
        }
        const int run_end = linked ? m : m - 1;
        if (run_start >= 0 && run_end - run_start >= 2) {
            double mean = 0.0;
            for (int j = run_start; j <= run_end; ++j) mean += curve.location[j];
            curve.stagnations.push_back(
                Stagnation{run_start, run_end, mean / (run_end - run_start + 1)});
        }
        run_start = -1;
    }
    return curve;
}

OrderFit regress_order(std::span<const double> eps, std::span<const double> errors) {
    if (eps.size() != errors.size()) throw std::invalid_argument("regress_order: size mismatch");
    if (eps.size() < 3) throw std::invalid_argument("regress_order: need at least 3 pairs");
    double err_scale = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0.0)) throw std::invalid_argument("regress_order: eps must be positive");
        if (i > 0 && !(eps[i] < eps[i - 1]))
            throw std::invalid_argument("regress_order: eps must be strictly decreasing");
        if (!(errors[i] > 0.0))
            throw std::invalid_argument("regress_order: errors must be positive");
        err_scale = std::max(err_scale, errors[i]);
    }

    OrderFit fit;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (errors[i] < 1e-14 * err_scale) {
            fit.warnings.push_back("excluded machine-zero error at eps = " +
                                   std::to_string(eps[i]));
            continue;
        }
        lx.push_back(std::log(eps[i]));
        ly.push_back(std::log(errors[i]));
    }
    if (lx.size() < 3)
        throw std::invalid_argument("regress_order: fewer than 3 usable pairs after exclusions");

    const std::size_t n = lx.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) { mx += lx[i]; my += ly[i]; }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    fit.order = sxy / sxx;
    fit.intercept = my - fit.order * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - (fit.intercept + fit.order * lx[i]);
        rss += r * r;
    }
    fit.residual_rms = std::sqrt(rss / n);
    fit.points_used = static_cast<int>(n);
    return fit;
}

BoundsPair bounds(const Surface& penalty_surface, const Payoff& payoff) {
    if (penalty_surface.config.mode != SolveMode::penalty)
        throw std::invalid_argument("bounds: needs a penalty-mode surface");
    const Grid& g = penalty_surface.grid;
    BoundsPair out;
    out.epsilon = penalty_surface.config.epsilon;

    for (int m = 0; m < penalty_surface.levels(); ++m) {
        for (int i = 0; i < g.node_count(); ++i) {
            const double viol = penalty_surface.payoff_values[i] - penalty_surface.values[m][i];
            if (viol > out.lambda_eps) {
                out.lambda_eps = viol;
                out.argmax_level = m;
                out.argmax_node = i;
            }
        }
    }

    // classify the violation site
    std::vector<std::pair<int, Convexity>> kink_nodes;
    for (const Kink& k : payoff.kinks())
        for (const auto& [bp, idx] : g.breakpoint_nodes)
            if (std::fabs(bp - k.location) <= 1e-9 * std::max(1.0, k.location))
                kink_nodes.emplace_back(idx, k.convexity);
    out.binds = ViolationSite::smooth;
    if (out.argmax_node == 0 || out.argmax_node >= g.n_interior) {
        out.binds = ViolationSite::boundary;
    } else {
        for (const auto& [idx, conv] : kink_nodes)
            if (idx == out.argmax_node)
                out.binds = conv == Convexity::concave ? ViolationSite::concave_kink
                                                       : ViolationSite::convex_kink;
    }

    // maximum-principle estimate at smooth nodes: payoff + eps * L(payoff)
    const MarketModel& model = penalty_surface.model;
    out.analytic_lower.assign(g.node_count(), std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < g.node_count(); ++i) {
        const bool on_kink = std::any_of(kink_nodes.begin(), kink_nodes.end(),
                                         [&](const auto& kn) { return kn.first == i; });
        if (on_kink) continue;
        out.analytic_lower[i] =
            penalty_surface.payoff_values[i] +
            out.epsilon * apply_generator(model, payoff, g.node(i));
    }
    return out;
}

Surface restrict_to(const Surface& fine, const Grid& coarse) {
    const Grid& gf = fine.grid;
    if (gf.s_max != coarse.s_max || gf.maturity != coarse.maturity)
        throw std::invalid_argument("restrict: domains differ");
    const int rs = (gf.n_interior + 1) / (coarse.n_interior + 1);
    const int rt = gf.time_steps / coarse.time_steps;
    if (rs * (coarse.n_interior + 1) != gf.n_interior + 1 ||
        rt * coarse.time_steps != gf.time_steps)
        throw std::invalid_argument("restrict: grids are not nested");

    Surface out{coarse, fine.model, fine.config, {}, {}, {}, fine.warnings};
    out.payoff_values.resize(coarse.node_count());
    for (int i = 0; i < coarse.node_count(); ++i)
        out.payoff_values[i] = fine.payoff_values[i * rs];
    out.values.assign(coarse.time_steps + 1, std::vector<double>(coarse.node_count()));
    for (int m = 0; m <= coarse.time_steps; ++m)
        for (int i = 0; i < coarse.node_count(); ++i)
            out.values[m][i] = fine.values[m * rt][i * rs];
    return out;
}

Surface richardson(const Surface& v_eps, const Surface& v_2eps) {
    if (v_eps.config.mode != SolveMode::penalty || v_2eps.config.mode != SolveMode::penalty)
        throw std::invalid_argument("richardson: both surfaces must be penalty runs");
    const double e1 = v_eps.config.epsilon, e2 = v_2eps.config.epsilon;
    if (std::fabs(e2 - 2.0 * e1) > 1e-9 * e2)
        throw std::invalid_argument("richardson: epsilons must be (eps, 2*eps)");

    const bool coarse_is_second = v_2eps.grid.n_interior <= v_eps.grid.n_interior;
    const Grid& coarse = coarse_is_second ? v_2eps.grid : v_eps.grid;
    const Surface a = restrict_to(v_eps, coarse);    // fine run (eps)
    const Surface b = restrict_to(v_2eps, coarse);   // coarse run (2*eps)

    Surface out{coarse, v_eps.model, v_eps.config, a.payoff_values, {}, {}, {}};
    out.values.assign(coarse.time_steps + 1, std::vector<double>(coarse.node_count()));
    for (int m = 0; m <= coarse.time_steps; ++m)
        for (int i = 0; i < coarse.node_count(); ++i)
            out.values[m][i] = 2.0 * a.values[m][i] - b.values[m][i];
    return out;
}

}  // namespace penlab

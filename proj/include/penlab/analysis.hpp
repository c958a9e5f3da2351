#pragma once

#include <span>
#include <string>
#include <vector>

#include "penlab/payoff.hpp"
#include "penlab/solver.hpp"

namespace penlab {

/// Error norms of one surface against a reference on the same grid.
/// sup norms are nodewise per time level; l2_value and h1 are space-time
/// trapezoid integrals, the Delta part of h1 excluding the payoff level t=T
/// where both surfaces coincide by construction.
struct ErrorReport {
    std::vector<double> times;
    std::vector<double> sup_value;  // per level
    std::vector<double> sup_delta;  // per level (entry at t=T is 0 by definition)
    double l2_value = 0.0;
    double h1 = 0.0;

    double sup_value_at(int level) const { return sup_value[level]; }
    double sup_delta_at(int level) const { return sup_delta[level]; }
};

ErrorReport error_norms(const Surface& test, const Surface& reference);

/// Level index for time-to-expiry tau; rejects tau not landing on a level
/// within 1e-9 relative.
int level_for_tte(const Grid& grid, double tau);

enum class Topology { put_like, butterfly };

/// Exercise boundary per time level: the largest S on the declared exercise
/// side with V <= payoff + tol, refined by linear interpolation between the
/// bracketing nodes. NaN when no node qualifies. Runs of levels where the
/// boundary stalls (moves less than stagnation_tol between adjacent levels,
/// for at least three levels) are reported as waiting-time stagnations.
struct Stagnation {
    int first_level = 0;
    int last_level = 0;
    double location = 0.0;
};

struct BoundaryCurve {
    std::vector<double> location;  // per level 0..M; NaN = absent
    std::vector<Stagnation> stagnations;
};

BoundaryCurve exercise_boundary(const Surface& surface, const Payoff& payoff, double tol,
                                Topology topology, double stagnation_tol = -1.0);

/// Least-squares order fit log(err) = intercept + order*log(eps).
/// eps must be strictly decreasing and positive; errors must be positive,
/// with values at machine-zero scale excluded (warned); at least three pairs
/// must survive.
struct OrderFit {
    double order = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
    int points_used = 0;
    std::vector<std::string> warnings;
};

OrderFit regress_order(std::span<const double> eps, std::span<const double> errors);

/// Where the maximum obstacle violation of a penalty surface sits.
enum class ViolationSite { smooth, convex_kink, concave_kink, boundary };

/// Sandwich data for a penalty solution: lambda_eps = max (payoff - V)+ over
/// all nodes and levels, so V <= V_exact <= V + lambda_eps. analytic_lower
/// holds the maximum-principle estimate payoff + eps * L(payoff) per node
/// (NaN at kink nodes where the generator is undefined).
struct BoundsPair {
    double epsilon = 0.0;
    double lambda_eps = 0.0;
    int argmax_level = 0;
    int argmax_node = 0;
    ViolationSite binds = ViolationSite::smooth;
    std::vector<double> analytic_lower;
};

BoundsPair bounds(const Surface& penalty_surface, const Payoff& payoff);

/// Restriction of a surface to a coarser nested grid (spatial node counts
/// with (N_fine+1) divisible by (N_coarse+1); time steps likewise). Rejects
/// non-nested grids.
Surface restrict_to(const Surface& fine, const Grid& coarse);

/// Penalty-error extrapolation 2*fine - coarse for runs at eps and 2*eps,
/// after restriction to the coarser of the two (possibly identical) grids.
Surface richardson(const Surface& v_eps, const Surface& v_2eps);

}  // namespace penlab

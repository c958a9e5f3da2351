#pragma once

#include <vector>

#include "penlab/market_model.hpp"
#include "penlab/solver.hpp"

namespace penlab {

/// Closed-form penalisation corrections for the American put. delta_param is
/// the boundary-layer width sigma*sqrt(epsilon); the penalty solution crosses
/// the payoff above the true boundary at S*(1 + crossing_offset_factor). The
/// error is exercise_plateau = -epsilon*r*K deep in the exercise region and
/// boundary_value_correction = -(1/2)*epsilon*r*K just on the hold side.
struct PutCorrection {
    double epsilon = 0.0;
    double delta_param = 0.0;
    double crossing_offset_factor = 0.0;
    double boundary_value_correction = 0.0;
    double exercise_plateau = 0.0;
};

PutCorrection put_correction(const MarketModel& model, double strike, double epsilon);

/// Inner-coordinate crossing for a concave kink with payoff slopes +alpha1
/// (left) and -alpha2 (right): x* = -(1/sqrt(2)) log((a1+a2)/(a1-B)) where B
/// is the solution slope at the boundary. value_correction_factor = alpha1*x*;
/// the value error at the kink is approximately delta * K * that factor, an
/// O(sqrt(epsilon)) quantity rather than the put's O(epsilon).
struct ButterflyCorrection {
    double x_star = 0.0;
    double value_correction_factor = 0.0;
};

ButterflyCorrection butterfly_crossing(double alpha1, double alpha2, double b_at_boundary);

/// Boundary Gamma of the put under jumps, from the smooth-pasting balance:
///   Gamma* = (r K - (q + omega*lambda) S* - lambda E[P(J S*) - P(S*)]) / sigma^2,
/// with d2P/dS2 -> 2 Gamma* / S*^2 just above the boundary. The hold-side
/// error at the penalty crossing is -delta^2 * Gamma* * (x*^2 - sqrt(2) x*)
/// = (1/2) delta^2 Gamma* with x* = 1/sqrt(2), reducing to (1/2) eps r K
/// without jumps and dividends.
struct JumpBoundaryGamma {
    double gamma_star = 0.0;
    double second_derivative = 0.0;          // 2 Gamma*/S*^2
    double boundary_value_correction = 0.0;  // -Gamma*/2, per unit delta^2
};

JumpBoundaryGamma jump_boundary_gamma(const MarketModel& model, double strike, double s_star,
                                      const Surface& put_surface, int level = 0);

/// Exercise-region error profile W2(S,t) for S below the boundary:
///   W2 = -((rK - qS) - lambda E[P(SJ) - P(S) + (J-1) S]) / sigma^2,
/// with W2(0,t) = -r K / sigma^2 exactly. The predicted penalisation error is
/// -epsilon * sigma^2 * W2(S). Nonpositive and nondecreasing in S.
struct ExerciseRegionProfile {
    std::vector<double> s;
    std::vector<double> w2;
    double w2_at_zero = 0.0;
};

ExerciseRegionProfile exercise_region_error_profile(const MarketModel& model, double strike,
                                                    const Surface& put_surface, double s_star,
                                                    int level = 0);

}  // namespace penlab

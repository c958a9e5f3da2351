#include "penlab/asymptotics.hpp"

#include <cmath>
#include <stdexcept>

namespace penlab {

namespace {

/// Surface value extended beyond S_max along the payoff's final linear piece.
double extended_value(const Surface& surf, int level, double S) {
    const Grid& g = surf.grid;
    if (S <= g.s_max) return surf.interpolate(level, S);
    const int last = g.node_count() - 1;
    const double far_slope =
        (surf.payoff_values[last] - surf.payoff_values[last - 1]) / g.h;
    return surf.payoff_values[last] + far_slope * (S - g.s_max);
}

}  // namespace

PutCorrection put_correction(const MarketModel& model, double strike, double epsilon) {
    if (!(strike > 0.0)) throw std::invalid_argument("put_correction: strike must be positive");
    if (!(epsilon > 0.0)) throw std::invalid_argument("put_correction: epsilon must be positive");
    PutCorrection c;
    c.epsilon = epsilon;
    c.delta_param = model.sigma() * std::sqrt(epsilon);
    c.crossing_offset_factor = c.delta_param / std::sqrt(2.0);
    c.boundary_value_correction = -0.5 * model.r() * strike * epsilon;
    c.exercise_plateau = -model.r() * strike * epsilon;
    return c;
}

ButterflyCorrection butterfly_crossing(double alpha1, double alpha2, double b_at_boundary) {
    if (!(alpha1 > 0.0) || !(alpha2 >= 0.0))
        throw std::invalid_argument("butterfly_crossing: need alpha1 > 0 and alpha2 >= 0");
    if (!(b_at_boundary >= 0.0 && b_at_boundary < alpha1))
        throw std::invalid_argument("butterfly_crossing: need 0 <= B < alpha1");
    ButterflyCorrection c;
    c.x_star = -std::log((alpha1 + alpha2) / (alpha1 - b_at_boundary)) / std::sqrt(2.0);
    c.value_correction_factor = alpha1 * c.x_star;
    return c;
}

JumpBoundaryGamma jump_boundary_gamma(const MarketModel& model, double strike, double s_star,
                                      const Surface& put_surface, int level) {
    const Grid& g = put_surface.grid;
    if (!(s_star > 0.0 && s_star < g.s_max))
        throw std::invalid_argument("jump_boundary_gamma: boundary outside the domain");
    if (level < 0 || level >= put_surface.levels())
        throw std::invalid_argument("jump_boundary_gamma: bad level");

    double expectation = 0.0;
    if (model.has_jumps()) {
        const auto f = [&](double s) { return extended_value(put_surface, level, s); };
        expectation = model.jump_expectation(f, s_star);
    }
    const double sig2 = model.sigma() * model.sigma();
    JumpBoundaryGamma out;
    out.gamma_star = (model.r() * strike - (model.q() + model.omega() * model.lambda()) * s_star -
                      model.lambda() * expectation) /
                     sig2;
    out.second_derivative = 2.0 * out.gamma_star / (s_star * s_star);
    // x* = 1/sqrt(2): x*^2 - sqrt(2) x* = -1/2
    out.boundary_value_correction = -0.5 * out.gamma_star;
    return out;
}

ExerciseRegionProfile exercise_region_error_profile(const MarketModel& model, double strike,
                                                    const Surface& put_surface, double s_star,
                                                    int level) {
    const Grid& g = put_surface.grid;
    if (level < 0 || level >= put_surface.levels())
        throw std::invalid_argument("error_profile: bad level");
    if (!(s_star > 0.0)) throw std::invalid_argument("error_profile: boundary must be positive");

    const double sig2 = model.sigma() * model.sigma();
    ExerciseRegionProfile prof;
    prof.w2_at_zero = -model.r() * strike / sig2;
    for (int i = 0; i < g.node_count() && g.node(i) < s_star; ++i) {
        const double s = g.node(i);
        double expectation = 0.0;
        if (model.has_jumps() && s > 0.0) {
            const auto f = [&](double sp) { return extended_value(put_surface, level, sp); };
            // E[P(SJ) - P(S) + (J-1)S] = (E[P(SJ)] - P(S)) + omega*S
            expectation = model.jump_expectation(f, s) + model.omega() * s;
        }
        const double w2 =
            -((model.r() * strike - model.q() * s) - model.lambda() * expectation) / sig2;
        prof.s.push_back(s);
        prof.w2.push_back(w2);
    }
    return prof;
}

}  // namespace penlab

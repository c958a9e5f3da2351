#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "penlab/asymptotics.hpp"
#include "penlab/solver.hpp"

using penlab::JumpSpec;
using penlab::MarketModel;
using penlab::Payoff;

namespace {

penlab::Surface solve_lcp_put(const MarketModel& m, int n, int steps) {
    const auto put = Payoff::put(100.0);
    const auto g = penlab::build_grid(put, n, steps, 400.0, 1.0);
    penlab::SolverConfig cfg;
    cfg.mode = penlab::SolveMode::lcp;
    return penlab::price(m, put, g, cfg);
}

}  // namespace

TEST_CASE("put correction closed forms") {
    const MarketModel m(0.4, 0.05, 0.0);
    const auto pc = penlab::put_correction(m, 100.0, 1e-4);
    CHECK(pc.epsilon == 1e-4);
    CHECK(pc.delta_param == doctest::Approx(0.4 * 0.01).epsilon(1e-14));
    CHECK(pc.boundary_value_correction == doctest::Approx(-2.5e-4).epsilon(1e-13));
    CHECK(pc.exercise_plateau == doctest::Approx(-5.0e-4).epsilon(1e-13));
    // Offset factor sigma*sqrt(eps)/sqrt(2).
    CHECK(pc.crossing_offset_factor ==
          doctest::Approx(2.8284271247461903e-3).epsilon(1e-12));
    // The boundary correction is exactly half the plateau.
    CHECK(pc.boundary_value_correction / pc.exercise_plateau == doctest::Approx(0.5));
    // delta^2 round-trips to sigma^2 * eps.
    CHECK(pc.delta_param * pc.delta_param ==
          doctest::Approx(0.16 * 1e-4).epsilon(1e-14));
}

TEST_CASE("put corrections vanish with epsilon") {
    const MarketModel m(0.4, 0.05, 0.0);
    const auto pc = penlab::put_correction(m, 100.0, 1e-16);
    CHECK(std::fabs(pc.exercise_plateau) < 1e-13);
    CHECK(std::fabs(pc.crossing_offset_factor) < 1e-6);
    CHECK_THROWS_AS(penlab::put_correction(m, 100.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(penlab::put_correction(m, -1.0, 1e-4), std::invalid_argument);
}

TEST_CASE("butterfly crossing location") {
    const auto bc = penlab::butterfly_crossing(1.0, 1.0, 0.0);
    // x* = -log(2)/sqrt(2).
    CHECK(bc.x_star == doctest::Approx(-0.4901290717342736).epsilon(1e-13));
    CHECK(bc.value_correction_factor == doctest::Approx(bc.x_star).epsilon(1e-13));

    // As the boundary slope approaches alpha1 the crossing runs away.
    const auto far = penlab::butterfly_crossing(1.0, 1.0, 1.0 - 1e-9);
    CHECK(far.x_star < -10.0);

    // Degenerate right wing with matching slope at the boundary: no offset.
    const auto none = penlab::butterfly_crossing(1.0, 0.0, 0.0);
    CHECK(none.x_star == doctest::Approx(0.0).epsilon(1e-14));

    CHECK_THROWS_AS(penlab::butterfly_crossing(1.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(penlab::butterfly_crossing(1.0, 1.0, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(penlab::butterfly_crossing(1.0, 1.0, -0.2), std::invalid_argument);
    CHECK_THROWS_AS(penlab::butterfly_crossing(0.0, 1.0, 0.0), std::invalid_argument);

    // Scaling: alpha1 = 2 doubles the value correction factor at fixed ratio.
    const auto scaled = penlab::butterfly_crossing(2.0, 2.0, 0.0);
    CHECK(scaled.x_star == doctest::Approx(bc.x_star).epsilon(1e-13));
    CHECK(scaled.value_correction_factor == doctest::Approx(2.0 * bc.x_star).epsilon(1e-13));
}

TEST_CASE("boundary gamma without jumps") {
    const MarketModel m(0.4, 0.05, 0.0);
    const auto surf = solve_lcp_put(m, 199, 50);
    const double s_star = 60.0;
    const auto jbg = penlab::jump_boundary_gamma(m, 100.0, s_star, surf);
    // Gamma* = r K / sigma^2 = 0.05 * 100 / 0.16.
    CHECK(jbg.gamma_star == doctest::Approx(31.25).epsilon(1e-12));
    CHECK(jbg.second_derivative == doctest::Approx(2.0 * 31.25 / (60.0 * 60.0)).epsilon(1e-12));
    CHECK(jbg.boundary_value_correction == doctest::Approx(-31.25 / 2.0).epsilon(1e-12));

    // Unit point mass: identical to the no-jump value.
    const MarketModel unit(0.4, 0.05, 0.0, 5.0, JumpSpec::point_mass(1.0));
    const auto jbg2 = penlab::jump_boundary_gamma(unit, 100.0, s_star, surf);
    CHECK(jbg2.gamma_star == doctest::Approx(31.25).epsilon(1e-10));

    // With dividends: Gamma* = (rK - qS*)/sigma^2.
    const MarketModel md(0.4, 0.05, 0.02);
    const auto jbg3 = penlab::jump_boundary_gamma(md, 100.0, s_star, surf);
    CHECK(jbg3.gamma_star == doctest::Approx((5.0 - 0.02 * 60.0) / 0.16).epsilon(1e-12));
}

TEST_CASE("boundary gamma is continuous as jump intensity vanishes") {
    const MarketModel base(0.4, 0.05, 0.0);
    const auto surf = solve_lcp_put(base, 199, 50);
    const double s_star = 60.0;
    const double g0 = penlab::jump_boundary_gamma(base, 100.0, s_star, surf).gamma_star;
    for (double lam : {1e-3, 1e-6}) {
        const MarketModel jm(0.4, 0.05, 0.0, lam, JumpSpec::lognormal(-0.02, 0.2));
        const double gl = penlab::jump_boundary_gamma(jm, 100.0, s_star, surf).gamma_star;
        // The lambda-dependence is (omega S* + E[..]) / sigma^2 = O(100) here.
        CHECK(std::fabs(gl - g0) < 100.0 * lam + 1e-9);
    }
}

TEST_CASE("LCP curvature above the boundary approaches 2 Gamma*/S*^2") {
    const MarketModel m(0.4, 0.05, 0.0);
    const auto surf = solve_lcp_put(m, 1999, 500);
    // Measured boundary at t=0: first node from above where v meets the payoff.
    const auto& v0 = surf.values[0];
    const auto& psi = surf.payoff_values;
    int bidx = -1;
    for (int i = surf.grid.n_interior; i >= 0; --i) {
        if (v0[static_cast<std::size_t>(i)] - psi[static_cast<std::size_t>(i)] <= 1e-12) {
            bidx = i;
            break;
        }
    }
    REQUIRE(bidx > 0);
    const double s_star = surf.grid.node(bidx);
    const auto jbg = penlab::jump_boundary_gamma(m, 100.0, s_star, surf);
    // One-sided second difference two cells above the contact node.
    const int j = bidx + 2;
    const double h = surf.grid.h;
    const double fd = (v0[static_cast<std::size_t>(j + 1)] - 2.0 * v0[static_cast<std::size_t>(j)] +
                       v0[static_cast<std::size_t>(j - 1)]) /
                      (h * h);
    CHECK(std::fabs(fd - jbg.second_derivative) < 0.10 * jbg.second_derivative);
}

TEST_CASE("exercise region error profile") {
    const MarketModel m(0.4, 0.05, 0.0);
    const auto surf = solve_lcp_put(m, 199, 50);
    const double s_star = 60.0;
    const auto prof = penlab::exercise_region_error_profile(m, 100.0, surf, s_star);
    CHECK(prof.w2_at_zero == doctest::Approx(-0.05 * 100.0 / 0.16).epsilon(1e-13));
    REQUIRE(!prof.s.empty());
    REQUIRE(prof.s.size() == prof.w2.size());
    // Without jumps W2 is the linear profile -(rK - qS)/sigma^2.
    for (std::size_t i = 0; i < prof.s.size(); ++i) {
        const double expect = -(5.0 - 0.0 * prof.s[i]) / 0.16;
        CHECK(prof.w2[i] == doctest::Approx(expect).epsilon(1e-10));
    }
    CHECK(prof.w2.front() == doctest::Approx(prof.w2_at_zero).epsilon(1e-12));

    // With jumps: still nonpositive, nondecreasing, exact at S=0.
    const MarketModel jm(0.4, 0.05, 0.0, 0.5, JumpSpec::lognormal(-0.02, 0.2));
    penlab::SolverConfig cfg;
    cfg.mode = penlab::SolveMode::lcp;
    const auto put = Payoff::put(100.0);
    const auto g = penlab::build_grid(put, 199, 50, 400.0, 1.0);
    const auto jsurf = penlab::price(jm, put, g, cfg);
    const auto jprof = penlab::exercise_region_error_profile(jm, 100.0, jsurf, 55.0);
    CHECK(jprof.w2_at_zero == doctest::Approx(-0.05 * 100.0 / 0.16).epsilon(1e-13));
    for (std::size_t i = 0; i < jprof.w2.size(); ++i) {
        CHECK(jprof.w2[i] <= 1e-12);
        if (i > 0) CHECK(jprof.w2[i] >= jprof.w2[i - 1] - 1e-9);
    }
}

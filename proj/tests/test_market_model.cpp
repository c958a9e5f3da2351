#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "oracles.hpp"
#include "penlab/market_model.hpp"
#include "penlab/payoff.hpp"

using penlab::JumpSpec;
using penlab::MarketModel;
using penlab::Payoff;

TEST_CASE("omega closed forms") {
    CHECK(MarketModel(0.4, 0.05, 0.0).omega() == 0.0);
    CHECK(MarketModel(0.4, 0.05, 0.0, 2.0, JumpSpec::point_mass(1.0)).omega() == 0.0);
    // E[J] = exp(mu + sigma^2/2): chosen so omega vanishes exactly.
    CHECK(MarketModel(0.4, 0.05, 0.0, 1.0, JumpSpec::lognormal(-0.5 * 0.04, 0.2)).omega() ==
          doctest::Approx(0.0).epsilon(1e-15));
    CHECK(MarketModel(0.4, 0.05, 0.0, 1.0, JumpSpec::lognormal(-0.02, 0.2)).omega() ==
          doctest::Approx(0.0).epsilon(1e-15));
    // Kou: omega = p eta1/(eta1-1) + (1-p) eta2/(eta2+1) - 1.
    const MarketModel kou(0.4, 0.05, 0.0, 1.0, JumpSpec::double_exponential(0.6, 3.0, 2.0));
    CHECK(kou.omega() ==
          doctest::Approx(0.6 * 1.5 + 0.4 * (2.0 / 3.0) - 1.0).epsilon(1e-14));
    CHECK(MarketModel(0.4, 0.05, 0.0, 0.7, JumpSpec::point_mass(0.5)).omega() ==
          doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("drift includes the jump compensator") {
    const MarketModel m(0.4, 0.05, 0.01, 0.7, JumpSpec::point_mass(0.5));
    CHECK(m.drift() == doctest::Approx(0.05 - 0.01 - 0.7 * -0.5).epsilon(1e-15));
    CHECK(MarketModel(0.4, 0.05, 0.0).drift() == doctest::Approx(0.05));
}

TEST_CASE("quadrature weights sum to one exactly") {
    const MarketModel ln(0.4, 0.05, 0.0, 0.5, JumpSpec::lognormal(-0.02, 0.2));
    double mass = 0.0;
    for (double w : ln.quadrature().weight) mass += w;
    CHECK(std::fabs(mass - 1.0) < 1e-14);

    const MarketModel kou(0.4, 0.05, 0.0, 0.5, JumpSpec::double_exponential(0.4, 5.0, 3.0));
    mass = 0.0;
    for (double w : kou.quadrature().weight) mass += w;
    CHECK(std::fabs(mass - 1.0) < 1e-14);
}

TEST_CASE("quadrature omega agrees with the closed form") {
    // Sum_i w_i (e^{z_i} - 1) reproduces E[J-1] for both density kinds.
    auto quad_omega = [](const MarketModel& m) {
        double s = 0.0;
        const auto& q = m.quadrature();
        for (std::size_t i = 0; i < q.z.size(); ++i) s += q.weight[i] * (std::exp(q.z[i]) - 1.0);
        return s;
    };
    // Lognormal: smooth decaying integrand, error limited by the truncated
    // tail of e^z (a few times tail_tol). Kou: the density kink at z=0 costs
    // an O(dz^2) trapezoid term on top.
    const MarketModel ln(0.4, 0.05, 0.0, 0.5, JumpSpec::lognormal(-0.02, 0.2));
    CHECK(std::fabs(quad_omega(ln) - ln.omega()) < 5e-9);
    const MarketModel kou(0.4, 0.05, 0.0, 0.5, JumpSpec::double_exponential(0.6, 3.0, 2.0));
    CHECK(std::fabs(quad_omega(kou) - kou.omega()) < 5e-5);
}

TEST_CASE("omega stable under truncation refinement") {
    auto quad_omega = [](const MarketModel& m) {
        double s = 0.0;
        const auto& q = m.quadrature();
        for (std::size_t i = 0; i < q.z.size(); ++i) s += q.weight[i] * (std::exp(q.z[i]) - 1.0);
        return s;
    };
    JumpSpec loose = JumpSpec::lognormal(-0.02, 0.2);
    loose.tail_tol = 1e-10;
    JumpSpec tight = JumpSpec::lognormal(-0.02, 0.2);
    tight.tail_tol = 1e-13;
    tight.quad_node_count = 4001;
    const double a = quad_omega(MarketModel(0.4, 0.05, 0.0, 0.5, loose));
    const double b = quad_omega(MarketModel(0.4, 0.05, 0.0, 0.5, tight));
    CHECK(std::fabs(a - b) < 1e-9);
}

TEST_CASE("jump expectation of the identity recovers omega times S") {
    const MarketModel ln(0.4, 0.05, 0.0, 0.5, JumpSpec::lognormal(0.1, 0.3));
    const double S = 80.0;
    const double got = ln.jump_expectation([](double s) { return s; }, S);
    CHECK(got == doctest::Approx(ln.omega() * S).epsilon(1e-8));
}

TEST_CASE("generator on the put without jumps") {
    const MarketModel m(0.4, 0.05, 0.0);
    const auto put = Payoff::put(100.0);
    // Below the strike Psi = K - S: L Psi = -r(K-S) + (r-q)S(-1) = -rK + qS.
    CHECK(penlab::apply_generator(m, put, 60.0) == doctest::Approx(-0.05 * 100.0).epsilon(1e-14));
    CHECK(penlab::apply_generator(m, put, 99.0) == doctest::Approx(-5.0).epsilon(1e-14));
    // Above the strike Psi = 0.
    CHECK(penlab::apply_generator(m, put, 150.0) == doctest::Approx(0.0).epsilon(1e-14));
    const MarketModel md(0.4, 0.05, 0.02);
    CHECK(penlab::apply_generator(md, put, 60.0) ==
          doctest::Approx(-0.05 * 100.0 + 0.02 * 60.0).epsilon(1e-14));
    // At the kink the one-sided slopes disagree: rejected.
    CHECK_THROWS_AS(penlab::apply_generator(m, put, 100.0), std::invalid_argument);
}

TEST_CASE("generator matches closed form on random diffusion-only cases") {
    std::mt19937_64 rng(20240517u);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double sigma = 0.1 + 0.5 * u01(rng);
        const double r = 0.1 * u01(rng);
        const double q = 0.05 * u01(rng);
        const MarketModel m(sigma, r, q);
        Payoff p = Payoff::put(100.0);
        switch (trial % 4) {
            case 0: break;
            case 1: p = Payoff::straddle(80.0 + 40.0 * u01(rng)); break;
            case 2: p = Payoff::butterfly(30.0 + 20.0 * u01(rng), 1.0, 100.0); break;
            case 3: p = Payoff::custom({50.0, 90.0, 140.0}, {20.0, 5.0, 30.0}, -1.0, 0.5); break;
        }
        double S = 250.0 * u01(rng);
        // Nudge off kinks so the slope is well defined.
        for (const auto& kk : p.kinks())
            if (std::fabs(S - kk.location) < 1e-6) S += 1e-3;
        const double psi = p(S);
        const double slope = p.slope_right(S);
        const double expect = -r * psi + (r - q) * S * slope;
        CHECK(penlab::apply_generator(m, p, S) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("point mass at J=1 leaves the generator untouched") {
    const auto put = Payoff::put(100.0);
    const MarketModel plain(0.4, 0.05, 0.0);
    const MarketModel unit(0.4, 0.05, 0.0, 5.0, JumpSpec::point_mass(1.0));
    for (double S : {30.0, 70.0, 130.0})
        CHECK(penlab::apply_generator(unit, put, S) ==
              doctest::Approx(penlab::apply_generator(plain, put, S)).epsilon(1e-13));
}

TEST_CASE("generator with lognormal jumps matches a stratified Monte-Carlo oracle") {
    const double lambda = 0.5, mu_J = -0.02, sigma_J = 0.2;
    const MarketModel m(0.4, 0.05, 0.0, lambda, JumpSpec::lognormal(mu_J, sigma_J));
    const auto put = Payoff::put(100.0);
    const double S = 50.0;

    const double jump_term = oracles::lognormal_expectation_stratified(
        [&](double j) { return put(j * S) - put(S); }, mu_J, sigma_J, 10000, 1000, 91u);
    const double expect = -m.r() * put(S) + m.drift() * S * put.slope_right(S) +
                          lambda * jump_term;
    CHECK(std::fabs(penlab::apply_generator(m, put, S) - expect) < 1e-4);
}

TEST_CASE("value extension overrides the payoff inside the jump expectation") {
    const MarketModel m(0.4, 0.05, 0.0, 0.5, JumpSpec::lognormal(-0.02, 0.2));
    const auto put = Payoff::put(100.0);
    const double S = 50.0;
    const double base = penlab::apply_generator(m, put, S);
    // Extension equal to the payoff changes nothing.
    const double same = penlab::apply_generator(m, put, S, [&](double s) { return put(s); });
    CHECK(same == doctest::Approx(base).epsilon(1e-13));
    // Constant shifts cancel inside E[f(JS)] - f(S).
    const double shifted =
        penlab::apply_generator(m, put, S, [&](double s) { return put(s) + 3.0; });
    CHECK(shifted == doctest::Approx(base).epsilon(1e-10));
    // Adding the identity shifts the expectation by lambda * omega * S.
    const double tilted =
        penlab::apply_generator(m, put, S, [&](double s) { return put(s) + s; });
    CHECK(tilted - base == doctest::Approx(m.lambda() * m.omega() * S).epsilon(1e-6));
}

TEST_CASE("model validation") {
    CHECK_THROWS_AS(MarketModel(0.0, 0.05, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(MarketModel(-0.4, 0.05, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(MarketModel(0.4, -0.01, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(MarketModel(0.4, 0.05, -0.01), std::invalid_argument);
    CHECK_THROWS_AS(MarketModel(0.4, 0.05, 0.0, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(MarketModel(0.4, 0.05, 0.0, 0.5, JumpSpec::double_exponential(0.5, 1.0, 2.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(MarketModel(0.4, 0.05, 0.0, 0.5, JumpSpec::double_exponential(0.5, 3.0, 0.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(MarketModel(0.4, 0.05, 0.0, 0.5, JumpSpec::point_mass(-0.5)),
                    std::invalid_argument);
    CHECK_THROWS_AS(penlab::apply_generator(MarketModel(0.4, 0.05, 0.0), Payoff::put(100.0), -1.0),
                    std::invalid_argument);
}

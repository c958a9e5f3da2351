#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "penlab/payoff.hpp"

namespace penlab {

enum class JumpKind { none, point_mass, lognormal, double_exponential };

/// Distribution of the jump multiplier J (Z = log J where a density exists).
/// The density is truncated to a window whose excluded tail mass is below
/// tail_tol and renormalised; quadrature weights over the window sum to one
/// exactly so discrete jump rows conserve mass.
struct JumpSpec {
    JumpKind kind = JumpKind::none;

    double J0 = 1.0;        // point_mass: J = J0 with probability one, J0 >= 0
    double mu_J = 0.0;      // lognormal: Z ~ N(mu_J, sigma_J^2)
    double sigma_J = 0.0;   // sigma_J = 0 degenerates to a point mass at exp(mu_J)
    double p = 0.0;         // double_exponential: P(up jump)
    double eta_up = 0.0;    // up-tail rate, > 1 so E[J] is finite
    double eta_down = 0.0;  // down-tail rate, > 0

    double tail_tol = 1e-10;
    int quad_node_count = 2001;
    std::optional<double> z_min_override;
    std::optional<double> z_max_override;

    static JumpSpec none();
    static JumpSpec point_mass(double J0);
    static JumpSpec lognormal(double mu_J, double sigma_J);
    static JumpSpec double_exponential(double p, double eta_up, double eta_down);

    /// True when the spec carries no randomness requiring quadrature.
    bool degenerate() const;
    /// The single jump multiplier of a degenerate spec.
    double degenerate_multiplier() const;
};

/// Precomputed quadrature for E[g(e^Z)]: trapezoid nodes z_i over the
/// truncated window with probability weights normalised to sum to one.
struct JumpQuadrature {
    std::vector<double> z;
    std::vector<double> weight;
    double z_min = 0.0;
    double z_max = 0.0;
};

/// Diffusion-with-jumps market: volatility sigma, rates r and q, jump
/// intensity lambda and jump-size law. Immutable after construction.
class MarketModel {
public:
    MarketModel(double sigma, double r, double q, double lambda = 0.0,
                JumpSpec jump = JumpSpec::none());

    double sigma() const { return sigma_; }
    double r() const { return r_; }
    double q() const { return q_; }
    double lambda() const { return lambda_; }
    const JumpSpec& jump() const { return jump_; }
    bool has_jumps() const { return lambda_ > 0.0 && jump_.kind != JumpKind::none; }

    /// omega = E[J - 1], closed form per jump kind; 0 without jumps.
    double omega() const { return omega_; }
    /// Risk-neutral drift coefficient of S dV/dS: r - q - omega*lambda.
    double drift() const { return r_ - q_ - omega_ * lambda_; }

    /// Quadrature for the jump law; empty for none/degenerate kinds.
    const JumpQuadrature& quadrature() const { return quad_; }

    /// E[f(J*S)] - f(S) under the (truncated, renormalised) jump law.
    double jump_expectation(const std::function<double(double)>& f, double S) const;

private:
    double sigma_, r_, q_, lambda_;
    JumpSpec jump_;
    double omega_ = 0.0;
    JumpQuadrature quad_;
};

/// Generator applied to the payoff at a smooth point S:
///   L Psi = -r Psi + (r - q - omega*lambda) S Psi' + lambda E[Psi(JS) - Psi(S)].
/// The second-derivative term vanishes on linear pieces. S exactly at a kink is
/// rejected. value_extension, when given, replaces payoff evaluation inside the
/// jump expectation (used to apply the generator to functions known only on a
/// sub-domain, extended by the payoff beyond it).
double apply_generator(const MarketModel& model, const Payoff& payoff, double S,
                       const std::function<double(double)>& value_extension = nullptr);

}  // namespace penlab

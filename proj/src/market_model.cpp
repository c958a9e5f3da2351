#include "penlab/market_model.hpp"

#include <cmath>
#include <stdexcept>

namespace penlab {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Smallest c (on a 0.01 lattice) with P(|N(0,1)| > c) <= tol.
double normal_tail_width(double tol) {
    double c = 1.0;
    while (2.0 * normal_cdf(-c) > tol && c < 60.0) c += 0.01;
    return c;
}

double density_value(const JumpSpec& s, double z) {
    switch (s.kind) {
        case JumpKind::lognormal: {
            const double u = (z - s.mu_J) / s.sigma_J;
            return std::exp(-0.5 * u * u) / (s.sigma_J * std::sqrt(2.0 * M_PI));
        }
        case JumpKind::double_exponential:
            return z >= 0.0 ? s.p * s.eta_up * std::exp(-s.eta_up * z)
                            : (1.0 - s.p) * s.eta_down * std::exp(s.eta_down * z);
        default:
            return 0.0;
    }
}

JumpQuadrature build_quadrature(const JumpSpec& s) {
    JumpQuadrature q;
    if (s.kind == JumpKind::none || s.degenerate()) return q;

    double z_min, z_max;
    const double half_tail = 0.5 * s.tail_tol;
    if (s.kind == JumpKind::lognormal) {
        const double c = normal_tail_width(s.tail_tol);
        z_min = s.mu_J - c * s.sigma_J;
        z_max = s.mu_J + c * s.sigma_J;
    } else {  // double_exponential: tails P(Z>z) = p e^{-eta_up z}, P(Z<-z) = (1-p) e^{-eta_down z}
        z_max = s.p > 0.0 ? std::log(s.p / half_tail) / s.eta_up : 0.0;
        z_min = s.p < 1.0 ? -std::log((1.0 - s.p) / half_tail) / s.eta_down : 0.0;
        if (z_max <= z_min) {  // one-sided edge cases p=0 or p=1
            z_max = std::max(z_max, z_min + 1.0);
            z_min = std::min(z_min, z_max - 1.0);
        }
    }
    if (s.z_min_override) z_min = *s.z_min_override;
    if (s.z_max_override) z_max = *s.z_max_override;
    if (!(z_max > z_min)) throw std::invalid_argument("jump: empty truncation window");

    const int n = s.quad_node_count;
    const double dz = (z_max - z_min) / (n - 1);
    q.z.resize(n);
    q.weight.resize(n);
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
        q.z[i] = z_min + i * dz;
        const double trap = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        q.weight[i] = trap * dz * density_value(s, q.z[i]);
        mass += q.weight[i];
    }
    // exact unit mass so assembled jump rows conserve probability
    for (double& w : q.weight) w /= mass;
    q.z_min = z_min;
    q.z_max = z_max;
    return q;
}

double closed_form_omega(const JumpSpec& s) {
    switch (s.kind) {
        case JumpKind::none:
            return 0.0;
        case JumpKind::point_mass:
            return s.J0 - 1.0;
        case JumpKind::lognormal:
            return std::exp(s.mu_J + 0.5 * s.sigma_J * s.sigma_J) - 1.0;
        case JumpKind::double_exponential:
            return s.p * s.eta_up / (s.eta_up - 1.0) +
                   (1.0 - s.p) * s.eta_down / (s.eta_down + 1.0) - 1.0;
    }
    return 0.0;
}

void validate_spec(const JumpSpec& s) {
    switch (s.kind) {
        case JumpKind::none:
            break;
        case JumpKind::point_mass:
            if (!(s.J0 >= 0.0)) throw std::invalid_argument("jump: J0 must be nonnegative");
            break;
        case JumpKind::lognormal:
            if (!(s.sigma_J >= 0.0)) throw std::invalid_argument("jump: sigma_J must be nonnegative");
            break;
        case JumpKind::double_exponential:
            if (!(s.p >= 0.0 && s.p <= 1.0)) throw std::invalid_argument("jump: p must be in [0,1]");
            if (!(s.eta_up > 1.0))  // eta_up <= 1 makes E[J] diverge
                throw std::invalid_argument("jump: eta_up must exceed 1");
            if (!(s.eta_down > 0.0)) throw std::invalid_argument("jump: eta_down must be positive");
            break;
    }
    if (s.quad_node_count < 3) throw std::invalid_argument("jump: too few quadrature nodes");
    if (!(s.tail_tol > 0.0)) throw std::invalid_argument("jump: tail_tol must be positive");
}

}  // namespace

JumpSpec JumpSpec::none() { return JumpSpec{}; }

JumpSpec JumpSpec::point_mass(double J0) {
    JumpSpec s;
    s.kind = JumpKind::point_mass;
    s.J0 = J0;
    return s;
}

JumpSpec JumpSpec::lognormal(double mu_J, double sigma_J) {
    JumpSpec s;
    s.kind = JumpKind::lognormal;
    s.mu_J = mu_J;
    s.sigma_J = sigma_J;
    return s;
}

JumpSpec JumpSpec::double_exponential(double p, double eta_up, double eta_down) {
    JumpSpec s;
    s.kind = JumpKind::double_exponential;
    s.p = p;
    s.eta_up = eta_up;
    s.eta_down = eta_down;
    return s;
}

bool JumpSpec::degenerate() const {
    return kind == JumpKind::point_mass ||
           (kind == JumpKind::lognormal && sigma_J == 0.0);
}

double JumpSpec::degenerate_multiplier() const {
    if (kind == JumpKind::point_mass) return J0;
    if (kind == JumpKind::lognormal && sigma_J == 0.0) return std::exp(mu_J);
    throw std::logic_error("jump: not a degenerate spec");
}

MarketModel::MarketModel(double sigma, double r, double q, double lambda, JumpSpec jump)
    : sigma_(sigma), r_(r), q_(q), lambda_(lambda), jump_(std::move(jump)) {
    if (!(sigma_ > 0.0)) throw std::invalid_argument("model: sigma must be positive");
    if (r_ < 0.0) throw std::invalid_argument("model: r must be nonnegative");
    if (q_ < 0.0) throw std::invalid_argument("model: q must be nonnegative");
    if (lambda_ < 0.0) throw std::invalid_argument("model: lambda must be nonnegative");
    validate_spec(jump_);
    omega_ = closed_form_omega(jump_);
    if (lambda_ > 0.0) quad_ = build_quadrature(jump_);
}

double MarketModel::jump_expectation(const std::function<double(double)>& f, double S) const {
    if (!has_jumps()) return 0.0;
    if (jump_.degenerate()) return f(jump_.degenerate_multiplier() * S) - f(S);
    double acc = 0.0;
    for (std::size_t i = 0; i < quad_.z.size(); ++i)
        acc += quad_.weight[i] * f(S * std::exp(quad_.z[i]));
    return acc - f(S);
}

double apply_generator(const MarketModel& model, const Payoff& payoff, double S,
                       const std::function<double(double)>& value_extension) {
    if (!(S >= 0.0)) throw std::invalid_argument("apply_generator: S must be nonnegative");
    const double sl = payoff.slope_left(S), sr = payoff.slope_right(S);
    if (S > 0.0 && std::fabs(sl - sr) > 1e-12 * std::max({1.0, std::fabs(sl), std::fabs(sr)}))
        throw std::invalid_argument("apply_generator: S sits on a payoff kink");

    const double psi = payoff(S);
    double value = -model.r() * psi + model.drift() * S * sr;
    if (model.has_jumps()) {
        const auto f = value_extension
                           ? value_extension
                           : std::function<double(double)>([&](double s) { return payoff(s); });
        value += model.lambda() * model.jump_expectation(f, S);
    }
    return value;
}

}  // namespace penlab

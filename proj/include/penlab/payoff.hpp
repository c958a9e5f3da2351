#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace penlab {

enum class Convexity { convex, concave };

/// A point where the payoff slope changes. Convex means the slope increases
/// across the point (put kink), concave means it decreases (butterfly peak).
struct Kink {
    double location = 0.0;
    double left_slope = 0.0;
    double right_slope = 0.0;
    Convexity convexity = Convexity::convex;
};

/// Continuous piecewise-linear payoff on [0, inf), nonnegative, with at most
/// linear growth. Stored as strictly increasing breakpoints with values at
/// each breakpoint plus the two extension slopes. Immutable after construction.
class Payoff {
public:
    static Payoff put(double strike);
    static Payoff call(double strike);
    static Payoff straddle(double strike);
    /// max(peak_value - alpha*|S - centre|, 0); kinks at centre +- peak_value/alpha.
    static Payoff butterfly(double peak_value, double alpha, double centre);
    /// put(strike) plus a butterfly whose peak sits above the put strike,
    /// producing a concave kink at kink_location on an otherwise put-like profile.
    static Payoff modified_put(double strike = 100.0, double peak_value = 32.0,
                               double alpha = 1.0, double kink_location = 105.0);
    static Payoff custom(std::vector<double> breakpoints, std::vector<double> values,
                         double left_slope, double right_slope,
                         std::string name = "custom");

    double operator()(double S) const;
    /// Payoff seen in log coordinates anchored at S_ref: psi(x) = Psi(S_ref * e^x).
    double eval_log(double x, double S_ref) const;

    /// Sum of two payoffs: merged breakpoints, values and slopes added.
    Payoff operator+(const Payoff& other) const;

    /// Breakpoints where the slope actually changes, labelled by convexity.
    std::vector<Kink> kinks() const;

    /// Slope immediately left / right of S (S need not be a breakpoint).
    double slope_left(double S) const;
    double slope_right(double S) const;

    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<double>& values() const { return values_; }
    double left_slope() const { return left_slope_; }
    double right_slope() const { return right_slope_; }
    const std::string& name() const { return name_; }
    /// True for call-type payoffs growing linearly as S -> inf. Such payoffs
    /// are priced on a clamped domain with the far-field value pinned to the payoff.
    bool unbounded() const { return right_slope_ > 0.0; }

private:
    Payoff(std::vector<double> bp, std::vector<double> vals, double sl, double sr,
           std::string name);
    void validate() const;

    std::vector<double> breakpoints_;
    std::vector<double> values_;
    double left_slope_ = 0.0;
    double right_slope_ = 0.0;
    std::string name_;
};

/// Evaluate the payoff; rejects S < 0.
inline double payoff_eval(const Payoff& p, double S) { return p(S); }

/// Kink classification of the payoff.
inline std::vector<Kink> classify_kinks(const Payoff& p) { return p.kinks(); }

}  // namespace penlab

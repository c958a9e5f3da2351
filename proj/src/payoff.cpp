#include "penlab/payoff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace penlab {

namespace {

constexpr double kSlopeTol = 1e-12;

bool slopes_equal(double a, double b) {
    return std::fabs(a - b) <= kSlopeTol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace

Payoff::Payoff(std::vector<double> bp, std::vector<double> vals, double sl, double sr,
               std::string name)
    : breakpoints_(std::move(bp)),
      values_(std::move(vals)),
      left_slope_(sl),
      right_slope_(sr),
      name_(std::move(name)) {
    validate();
}

void Payoff::validate() const {
    if (breakpoints_.empty()) throw std::invalid_argument("payoff: needs at least one breakpoint");
    if (breakpoints_.size() != values_.size())
        throw std::invalid_argument("payoff: breakpoints/values size mismatch");
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
        if (!(breakpoints_[i] > 0.0))
            throw std::invalid_argument("payoff: breakpoints must be positive");
        if (i > 0 && !(breakpoints_[i] > breakpoints_[i - 1]))
            throw std::invalid_argument("payoff: breakpoints must be strictly increasing");
        if (values_[i] < 0.0) throw std::invalid_argument("payoff: negative value at breakpoint");
    }
    // a negative tail slope eventually crosses zero: not representable here
    if (right_slope_ < 0.0)
        throw std::invalid_argument("payoff: negative right slope would go below zero");
    const double at_zero = values_.front() - left_slope_ * breakpoints_.front();
    if (at_zero < -kSlopeTol * std::max(1.0, values_.front()))
        throw std::invalid_argument("payoff: negative value at S=0");
}

double Payoff::operator()(double S) const {
    if (S < 0.0) throw std::invalid_argument("payoff: S must be nonnegative");
    if (S <= breakpoints_.front())
        return values_.front() - left_slope_ * (breakpoints_.front() - S);
    if (S >= breakpoints_.back())
        return values_.back() + right_slope_ * (S - breakpoints_.back());
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), S);
    const std::size_t j = static_cast<std::size_t>(it - breakpoints_.begin());
    const double s0 = breakpoints_[j - 1], s1 = breakpoints_[j];
    const double w = (S - s0) / (s1 - s0);
    return values_[j - 1] * (1.0 - w) + values_[j] * w;
}

double Payoff::eval_log(double x, double S_ref) const {
    if (!(S_ref > 0.0)) throw std::invalid_argument("payoff: S_ref must be positive");
    return (*this)(S_ref * std::exp(x));
}

double Payoff::slope_left(double S) const {
    if (S <= breakpoints_.front()) return left_slope_;
    const auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), S);
    const std::size_t j = static_cast<std::size_t>(it - breakpoints_.begin());
    if (j >= breakpoints_.size()) return right_slope_;
    // slope of the segment ending at breakpoint j (or at S if S is interior to it)
    if (j == 0) return left_slope_;
    return (values_[j] - values_[j - 1]) / (breakpoints_[j] - breakpoints_[j - 1]);
}

double Payoff::slope_right(double S) const {
    if (S >= breakpoints_.back()) return right_slope_;
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), S);
    const std::size_t j = static_cast<std::size_t>(it - breakpoints_.begin());
    if (j == 0) return left_slope_;
    return (values_[j] - values_[j - 1]) / (breakpoints_[j] - breakpoints_[j - 1]);
}

std::vector<Kink> Payoff::kinks() const {
    std::vector<Kink> out;
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
        double sl = (i == 0) ? left_slope_
                             : (values_[i] - values_[i - 1]) / (breakpoints_[i] - breakpoints_[i - 1]);
        double sr = (i + 1 == breakpoints_.size())
                        ? right_slope_
                        : (values_[i + 1] - values_[i]) / (breakpoints_[i + 1] - breakpoints_[i]);
        if (slopes_equal(sl, sr)) continue;
        out.push_back(Kink{breakpoints_[i], sl, sr,
                           sl < sr ? Convexity::convex : Convexity::concave});
    }
    return out;
}

Payoff Payoff::operator+(const Payoff& other) const {
    std::vector<double> merged;
    merged.reserve(breakpoints_.size() + other.breakpoints_.size());
    std::merge(breakpoints_.begin(), breakpoints_.end(), other.breakpoints_.begin(),
               other.breakpoints_.end(), std::back_inserter(merged));
    merged.erase(std::unique(merged.begin(), merged.end(),
                             [](double a, double b) { return std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(a)); }),
                 merged.end());
    std::vector<double> vals(merged.size());
    for (std::size_t i = 0; i < merged.size(); ++i) vals[i] = (*this)(merged[i]) + other(merged[i]);
    return Payoff(std::move(merged), std::move(vals), left_slope_ + other.left_slope_,
                  right_slope_ + other.right_slope_, "custom");
}

Payoff Payoff::put(double strike) {
    if (!(strike > 0.0)) throw std::invalid_argument("put: strike must be positive");
    return Payoff({strike}, {0.0}, -1.0, 0.0, "put");
}

Payoff Payoff::call(double strike) {
    if (!(strike > 0.0)) throw std::invalid_argument("call: strike must be positive");
    return Payoff({strike}, {0.0}, 0.0, 1.0, "call");
}

Payoff Payoff::straddle(double strike) {
    if (!(strike > 0.0)) throw std::invalid_argument("straddle: strike must be positive");
    return Payoff({strike}, {0.0}, -1.0, 1.0, "straddle");
}

Payoff Payoff::butterfly(double peak_value, double alpha, double centre) {
    if (!(peak_value > 0.0) || !(alpha > 0.0))
        throw std::invalid_argument("butterfly: peak_value and alpha must be positive");
    const double half = peak_value / alpha;
    if (!(centre - half > 0.0))
        throw std::invalid_argument("butterfly: lower zero must be positive");
    return Payoff({centre - half, centre, centre + half}, {0.0, peak_value, 0.0}, 0.0, 0.0,
                  "butterfly");
}

Payoff Payoff::modified_put(double strike, double peak_value, double alpha,
                            double kink_location) {
    if (!(kink_location > strike))
        throw std::invalid_argument("modified_put: kink must sit above the strike");
    Payoff sum = put(strike) + butterfly(peak_value, alpha, kink_location);
    return Payoff(sum.breakpoints_, sum.values_, sum.left_slope_, sum.right_slope_,
                  "modified_put");
}

Payoff Payoff::custom(std::vector<double> breakpoints, std::vector<double> values,
                      double left_slope, double right_slope, std::string name) {
    return Payoff(std::move(breakpoints), std::move(values), left_slope, right_slope,
                  std::move(name));
}

}  // namespace penlab

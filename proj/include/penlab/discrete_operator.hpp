#pragma once

#include <optional>
#include <span>
#include <vector>

#include "penlab/grid.hpp"
#include "penlab/market_model.hpp"
#include "penlab/payoff.hpp"

namespace penlab {

/// Tridiagonal system rows: (A v)_i = sub[i] v_{i-1} + diag[i] v_i + sup[i] v_{i+1}.
struct Tridiagonal {
    std::vector<double> sub, diag, sup;
    std::size_t size() const { return diag.size(); }
};

/// In-place Thomas solve of A x = rhs; A must be factorisable without pivoting
/// (guaranteed for the M-matrices assembled here).
std::vector<double> solve_tridiagonal(const Tridiagonal& a, std::span<const double> rhs);

/// One dense row of the discretised jump integral, stored over the contiguous
/// column range [first_col, first_col + weights.size()). Includes the -lambda
/// diagonal term. routed_mass is the probability mass (times lambda) whose
/// destination lies outside the unknowns and was folded into the f vector.
struct JumpRow {
    int first_col = 0;
    std::vector<double> weights;
    double routed_mass = 0.0;
};

/// Jump part of the generator: lambda * (E[v(J S_i)] - v_i) with linear
/// interpolation between nodes in-domain and payoff extension beyond S_max,
/// the latter accumulated into the constant vector f.
struct JumpPart {
    std::vector<JumpRow> rows;
    std::vector<double> f;
};

/// Spatial generator of the pricing equation discretised on a Grid, acting on
/// the unknowns v_0..v_N (node N+1 is pinned to the payoff). Row 0 carries the
/// degenerate S=0 equation -r v_0. Rows use central differences, switching the
/// first-derivative stencil to one-sided per row when central weights would
/// break the M-matrix sign pattern.
class DiscreteOperator {
public:
    /// (generator v): tridiagonal part + Dirichlet contribution + jump part.
    std::vector<double> apply(std::span<const double> v) const;
    std::vector<double> apply_tridiagonal_part(std::span<const double> v) const;
    /// Jump matrix times v (no f); zero vector when no jump part is attached.
    std::vector<double> apply_jump_matrix(std::span<const double> v) const;

    /// Constant terms of the generator: Dirichlet contribution plus jump f.
    std::vector<double> constant_term() const;

    /// System matrix I - theta_eff * k_eff * (tridiagonal part) as Thomas input.
    Tridiagonal system_tridiagonal(double theta_eff, double k_eff) const;
    /// Same including dense jump rows, for the fully coupled solve.
    std::vector<std::vector<double>> system_dense(double theta_eff, double k_eff) const;

    /// True when system_tridiagonal has positive diagonal, nonpositive
    /// off-diagonals and strict row dominance. first_bad reports a violator.
    bool is_m_matrix(double theta_eff, double k_eff, int* first_bad = nullptr) const;

    std::size_t size() const { return diag_.size(); }
    bool has_jump() const { return jump_.has_value(); }
    const JumpPart& jump_part() const { return *jump_; }
    const std::vector<bool>& upwinded_rows() const { return upwinded_; }
    const std::vector<double>& dirichlet_term() const { return boundary_; }
    double h() const { return h_; }
    double k() const { return k_; }
    double theta() const { return theta_; }
    double far_value() const { return far_value_; }

    void attach_jump(JumpPart part);

    friend DiscreteOperator assemble_bs_rows(const MarketModel& model, const Grid& grid,
                                             const Payoff& payoff);

private:
    std::vector<double> sub_, diag_, sup_;  // generator rows over unknowns 0..N
    std::vector<double> boundary_;          // Dirichlet node contribution
    std::vector<bool> upwinded_;
    std::optional<JumpPart> jump_;
    double h_ = 0.0, k_ = 0.0, theta_ = 0.5;
    double lambda_ = 0.0;
    double far_value_ = 0.0;  // payoff at S_max
};

/// Diffusion/drift/discount rows of the generator on the given grid.
DiscreteOperator assemble_bs_rows(const MarketModel& model, const Grid& grid,
                                  const Payoff& payoff);

/// Dense jump rows and boundary vector f for the given model and payoff.
JumpPart assemble_jump_rows(const MarketModel& model, const Grid& grid,
                            const Payoff& payoff);

/// assemble_bs_rows plus, when the model jumps, assemble_jump_rows attached.
DiscreteOperator assemble_operator(const MarketModel& model, const Grid& grid,
                                   const Payoff& payoff);

}  // namespace penlab

#include "penlab/discrete_operator.hpp"

#include <cmath>
#include <stdexcept>

namespace penlab {

std::vector<double> solve_tridiagonal(const Tridiagonal& a, std::span<const double> rhs) {
    const std::size_t n = a.size();
    if (rhs.size() != n) throw std::invalid_argument("thomas: size mismatch");
    std::vector<double> c(n), d(n), x(n);
    double piv = a.diag[0];
    if (piv == 0.0) throw std::runtime_error("thomas: zero pivot");
    c[0] = a.sup[0] / piv;
    d[0] = rhs[0] / piv;
    for (std::size_t i = 1; i < n; ++i) {
        piv = a.diag[i] - a.sub[i] * c[i - 1];
        if (piv == 0.0) throw std::runtime_error("thomas: zero pivot");
        c[i] = a.sup[i] / piv;
        d[i] = (rhs[i] - a.sub[i] * d[i - 1]) / piv;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    return x;
}

DiscreteOperator assemble_bs_rows(const MarketModel& model, const Grid& grid,
                                  const Payoff& payoff) {
    const int n = grid.n_interior;
    const double h = grid.h;
    const double r = model.r();
    const double mu = model.drift();
    DiscreteOperator op;
    op.h_ = h;
    op.k_ = grid.k;
    op.theta_ = grid.theta;
    op.lambda_ = model.has_jumps() ? model.lambda() : 0.0;
    op.far_value_ = payoff(grid.s_max);
    op.sub_.assign(n + 1, 0.0);
    op.diag_.assign(n + 1, 0.0);
    op.sup_.assign(n + 1, 0.0);
    op.boundary_.assign(n + 1, 0.0);
    op.upwinded_.assign(n + 1, false);

    // S=0: diffusion, drift and jump all vanish; only discounting survives.
    op.diag_[0] = -r;

    for (int i = 1; i <= n; ++i) {
        const double s = grid.node(i);
        const double a = 0.5 * model.sigma() * model.sigma() * s * s;
        const double b = mu * s;
        double lo = a / (h * h) - b / (2.0 * h);
        double up = a / (h * h) + b / (2.0 * h);
        double di = -2.0 * a / (h * h) - r;
        if (lo < 0.0 || up < 0.0) {
            // drift-dominated row: one-sided first derivative keeps signs
            op.upwinded_[i] = true;
            if (b >= 0.0) {
                lo = a / (h * h);
                up = a / (h * h) + b / h;
                di = -2.0 * a / (h * h) - b / h - r;
            } else {
                lo = a / (h * h) - b / h;
                up = a / (h * h);
                di = -2.0 * a / (h * h) + b / h - r;
            }
        }
        op.sub_[i] = lo;
        op.diag_[i] = di;
        op.sup_[i] = up;
    }
    // row N references the Dirichlet node: fold it into the constant term
    op.boundary_[n] = op.sup_[n] * op.far_value_;
    op.sup_[n] = 0.0;
    return op;
}

JumpPart assemble_jump_rows(const MarketModel& model, const Grid& grid,
                            const Payoff& payoff) {
    if (!model.has_jumps()) throw std::invalid_argument("jump rows: model has no jumps");
    const int n = grid.n_interior;
    const double h = grid.h;
    const double lam = model.lambda();
    JumpPart part;
    part.rows.resize(n + 1);
    part.f.assign(n + 1, 0.0);

    const bool point = model.jump().degenerate();
    const double point_mult = point ? model.jump().degenerate_multiplier() : 0.0;
    const auto& quad = model.quadrature();

    for (int i = 1; i <= n; ++i) {
        const double s = grid.node(i);
        const std::size_t nq = point ? 1 : quad.z.size();

        // destination range in column space, extended to cover the diagonal
        int col_lo = i, col_hi = i;
        auto dest = [&](std::size_t qi) {
            return point ? point_mult * s : s * std::exp(quad.z[qi]);
        };
        for (std::size_t qi = 0; qi < nq; ++qi) {
            const double sp = dest(qi);
            if (sp >= grid.s_max) continue;
            const int j = static_cast<int>(sp / h);
            col_lo = std::min(col_lo, j);
            col_hi = std::min(std::max(col_hi, j + 1), n);
        }
        JumpRow row;
        row.first_col = col_lo;
        row.weights.assign(static_cast<std::size_t>(col_hi - col_lo) + 1, 0.0);
        auto add = [&](int col, double val) { row.weights[col - col_lo] += val; };

        for (std::size_t qi = 0; qi < nq; ++qi) {
            const double wq = point ? 1.0 : quad.weight[qi];
            const double sp = dest(qi);
            if (sp >= grid.s_max) {  // beyond the domain: payoff extension
                part.f[i] += lam * wq * payoff(sp);
                row.routed_mass += lam * wq;
                continue;
            }
            const int j = static_cast<int>(sp / h);
            const double frac = sp / h - j;
            const double w_lo = lam * wq * (1.0 - frac);
            const double w_hi = lam * wq * frac;
            if (j <= n) add(j, w_lo);
            if (j + 1 <= n) {
                add(j + 1, w_hi);
            } else {  // upper neighbour is the Dirichlet node
                part.f[i] += w_hi * payoff(grid.s_max);
                row.routed_mass += w_hi;
            }
        }
        add(i, -lam);
        part.rows[i] = std::move(row);
    }
    return part;
}

DiscreteOperator assemble_operator(const MarketModel& model, const Grid& grid,
                                   const Payoff& payoff) {
    DiscreteOperator op = assemble_bs_rows(model, grid, payoff);
    if (model.has_jumps()) op.attach_jump(assemble_jump_rows(model, grid, payoff));
    return op;
}

void DiscreteOperator::attach_jump(JumpPart part) {
    if (part.rows.size() != size() || part.f.size() != size())
        throw std::invalid_argument("attach_jump: size mismatch");
    jump_ = std::move(part);
}

std::vector<double> DiscreteOperator::apply_tridiagonal_part(std::span<const double> v) const {
    const std::size_t n = size();
    if (v.size() != n) throw std::invalid_argument("operator apply: size mismatch");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = diag_[i] * v[i];
        if (i > 0) acc += sub_[i] * v[i - 1];
        if (i + 1 < n) acc += sup_[i] * v[i + 1];
        out[i] = acc;
    }
    return out;
}

std::vector<double> DiscreteOperator::apply_jump_matrix(std::span<const double> v) const {
    std::vector<double> out(size(), 0.0);
    if (!jump_) return out;
    for (std::size_t i = 0; i < size(); ++i) {
        const JumpRow& row = jump_->rows[i];
        double acc = 0.0;
        for (std::size_t c = 0; c < row.weights.size(); ++c)
            acc += row.weights[c] * v[row.first_col + c];
        out[i] = acc;
    }
    return out;
}

std::vector<double> DiscreteOperator::constant_term() const {
    std::vector<double> out = boundary_;
    if (jump_)
        for (std::size_t i = 0; i < size(); ++i) out[i] += jump_->f[i];
    return out;
}

std::vector<double> DiscreteOperator::apply(std::span<const double> v) const {
    std::vector<double> out = apply_tridiagonal_part(v);
    if (jump_) {
        const std::vector<double> jv = apply_jump_matrix(v);
        for (std::size_t i = 0; i < size(); ++i) out[i] += jv[i];
    }
    const std::vector<double> c = constant_term();
    for (std::size_t i = 0; i < size(); ++i) out[i] += c[i];
    return out;
}

Tridiagonal DiscreteOperator::system_tridiagonal(double theta_eff, double k_eff) const {
    const std::size_t n = size();
    Tridiagonal a;
    a.sub.resize(n);
    a.diag.resize(n);
    a.sup.resize(n);
    const double c = theta_eff * k_eff;
    for (std::size_t i = 0; i < n; ++i) {
        a.sub[i] = -c * sub_[i];
        a.diag[i] = 1.0 - c * diag_[i];
        a.sup[i] = -c * sup_[i];
    }
    return a;
}

std::vector<std::vector<double>> DiscreteOperator::system_dense(double theta_eff,
                                                                double k_eff) const {
    const std::size_t n = size();
    const double c = theta_eff * k_eff;
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        a[i][i] = 1.0 - c * diag_[i];
        if (i > 0) a[i][i - 1] = -c * sub_[i];
        if (i + 1 < n) a[i][i + 1] = -c * sup_[i];
        if (jump_) {
            const JumpRow& row = jump_->rows[i];
            for (std::size_t cc = 0; cc < row.weights.size(); ++cc)
                a[i][row.first_col + cc] -= c * row.weights[cc];
        }
    }
    return a;
}

bool DiscreteOperator::is_m_matrix(double theta_eff, double k_eff, int* first_bad) const {
    const Tridiagonal a = system_tridiagonal(theta_eff, k_eff);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool ok = a.diag[i] > 0.0 && a.sub[i] <= 0.0 && a.sup[i] <= 0.0 &&
                        a.diag[i] > std::fabs(a.sub[i]) + std::fabs(a.sup[i]);
        if (!ok) {
            if (first_bad) *first_bad = static_cast<int>(i);
            return false;
        }
    }
    return true;
}

}  // namespace penlab

#pragma once

// Small dense linear programs.
//
//   minimize    c^T x
//   subject to  a_i^T x  (<= | = | >=)  b_i      for every row i
//               x_j >= 0 or x_j free
//
// Solved by a two-phase revised simplex method on the standard form that keeps
// an explicit basis inverse. Pricing is Dantzig's rule; after 10 * rows
// consecutive degenerate pivots it falls back to Bland's rule until the
// objective moves again. Problems here have at most a few thousand columns
// and rarely more than a hundred rows.
//
// Solver additionally supports appending nonnegative columns after a solve and
// re-optimizing from the previous basis, which is what a cutting-plane or
// column-generation loop needs.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace drq::lp {

enum class Sense { LessEqual, Equal, GreaterEqual };
enum class VarKind { NonNegative, Free };
enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(Status status) {
    switch (status) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::Unbounded: return "Unbounded";
    case Status::IterationLimit: return "IterationLimit";
    }
    return "Unknown";
}

using SparseVec = std::vector<std::pair<std::size_t, double>>;

struct Problem {
    struct Row {
        SparseVec coeffs;  // (variable index, coefficient)
        Sense sense = Sense::Equal;
        double rhs = 0.0;
    };

    std::vector<double> cost;
    std::vector<VarKind> kind;
    std::vector<Row> rows;

    std::size_t add_variable(double c, VarKind k = VarKind::NonNegative) {
        cost.push_back(c);
        kind.push_back(k);
        return cost.size() - 1;
    }

    std::size_t add_row(SparseVec coeffs, Sense sense, double rhs) {
        rows.push_back({std::move(coeffs), sense, rhs});
        return rows.size() - 1;
    }

    std::size_t num_variables() const { return cost.size(); }
    std::size_t num_rows() const { return rows.size(); }
};

struct Options {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-10;
    double pivot_tol = 1e-11;
    std::size_t max_iterations = 200000;
    std::size_t refactor_every = 64;
};

struct Solution {
    Status status = Status::IterationLimit;
    double value = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> x;      // one entry per problem variable
    std::vector<double> duals;  // one per row; value = sum duals_i * rhs_i at optimality
    std::size_t iterations = 0;

    bool optimal() const { return status == Status::Optimal; }
};

class Solver {
public:
    explicit Solver(const Problem& problem, Options options = {})
        : options_(options), num_rows_(problem.num_rows()) {
        const std::size_t m = num_rows_;
        flipped_.assign(m, false);
        rhs_.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            rhs_[i] = problem.rows[i].rhs;
            flipped_[i] = rhs_[i] < 0.0;
            if (flipped_[i]) rhs_[i] = -rhs_[i];
        }

        // Structural columns, transposed from the row-wise input.
        std::vector<SparseVec> by_var(problem.num_variables());
        for (std::size_t i = 0; i < m; ++i) {
            const double sign = flipped_[i] ? -1.0 : 1.0;
            for (auto [j, a] : problem.rows[i].coeffs) {
                assert(j < by_var.size());
                if (a != 0.0) by_var[j].emplace_back(i, sign * a);
            }
        }
        var_pos_.resize(problem.num_variables());
        var_neg_.assign(problem.num_variables(), kNone);
        for (std::size_t j = 0; j < problem.num_variables(); ++j) {
            var_pos_[j] = push_column(problem.cost[j], by_var[j], Role::Structural);
            if (problem.kind[j] == VarKind::Free) {
                SparseVec neg = by_var[j];
                for (auto& e : neg) e.second = -e.second;
                var_neg_[j] = push_column(-problem.cost[j], std::move(neg), Role::Structural);
            }
        }

        // Slack and surplus columns; a slack with +1 after flipping starts basic.
        basis_.assign(m, kNone);
        for (std::size_t i = 0; i < m; ++i) {
            const Sense sense = problem.rows[i].sense;
            if (sense == Sense::Equal) continue;
            double coef = sense == Sense::LessEqual ? 1.0 : -1.0;
            if (flipped_[i]) coef = -coef;
            const std::size_t col = push_column(0.0, {{i, coef}}, Role::Slack);
            if (coef > 0.0) basis_[i] = col;
        }
        for (std::size_t i = 0; i < m; ++i) {
            if (basis_[i] == kNone) basis_[i] = push_column(0.0, {{i, 1.0}}, Role::Artificial);
        }
        needs_phase_one_ = std::any_of(basis_.begin(), basis_.end(),
                                       [&](std::size_t c) { return role_[c] == Role::Artificial; });
        num_vars_ = problem.num_variables();
    }

    /// Appends a nonnegative variable. The current basis stays primal feasible,
    /// so the next solve() continues from it.
    std::size_t add_column(double cost, const SparseVec& coeffs) {
        SparseVec col;
        col.reserve(coeffs.size());
        for (auto [i, a] : coeffs) {
            assert(i < num_rows_);
            if (a != 0.0) col.emplace_back(i, flipped_[i] ? -a : a);
        }
        var_pos_.push_back(push_column(cost, std::move(col), Role::Structural));
        var_neg_.push_back(kNone);
        return num_vars_++;
    }

    Solution solve() {
        Solution out;
        iterations_ = 0;
        if (!factored_) refactor();

        if (needs_phase_one_) {
            const Status s = run(Phase::One);
            if (s != Status::Optimal) return finish(out, s == Status::Unbounded ? Status::Infeasible : s);
            double infeasibility = 0.0;
            for (std::size_t i = 0; i < num_rows_; ++i)
                if (role_[basis_[i]] == Role::Artificial) infeasibility += xb_[i];
            double scale = 1.0;
            for (double b : rhs_) scale = std::max(scale, std::abs(b));
            if (infeasibility > options_.feasibility_tol * scale) return finish(out, Status::Infeasible);
            drive_out_artificials();
            needs_phase_one_ = false;
        }
        return finish(out, run(Phase::Two));
    }

private:
    enum class Role { Structural, Slack, Artificial };
    enum class Phase { One, Two };
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

    std::size_t push_column(double cost, SparseVec col, Role role) {
        cols_.push_back(std::move(col));
        cost_.push_back(cost);
        role_.push_back(role);
        return cols_.size() - 1;
    }

    double phase_cost(std::size_t j, Phase phase) const {
        if (phase == Phase::One) return role_[j] == Role::Artificial ? 1.0 : 0.0;
        return role_[j] == Role::Artificial ? 0.0 : cost_[j];
    }

    // Gauss-Jordan inversion of the basis with partial pivoting.
    void refactor() {
        const std::size_t m = num_rows_;
        std::vector<double> b(m * m, 0.0);
        for (std::size_t k = 0; k < m; ++k)
            for (auto [i, a] : cols_[basis_[k]]) b[i * m + k] = a;
        binv_.assign(m * m, 0.0);
        for (std::size_t i = 0; i < m; ++i) binv_[i * m + i] = 1.0;
        std::vector<std::size_t> perm(m);
        for (std::size_t i = 0; i < m; ++i) perm[i] = i;
        for (std::size_t c = 0; c < m; ++c) {
            std::size_t p = c;
            for (std::size_t r = c + 1; r < m; ++r)
                if (std::abs(b[r * m + c]) > std::abs(b[p * m + c])) p = r;
            if (std::abs(b[p * m + c]) < 1e-14) {
                // Numerically singular basis: the column is dependent on the ones
                // before it, so swap in the artificial of a row not yet pivoted.
                repair_basis(c, perm[c]);
                refactor();
                return;
            }
            if (p != c) {
                std::swap(perm[p], perm[c]);
                for (std::size_t k = 0; k < m; ++k) {
                    std::swap(b[p * m + k], b[c * m + k]);
                    std::swap(binv_[p * m + k], binv_[c * m + k]);
                }
            }
            const double inv = 1.0 / b[c * m + c];
            for (std::size_t k = 0; k < m; ++k) {
                b[c * m + k] *= inv;
                binv_[c * m + k] *= inv;
            }
            for (std::size_t r = 0; r < m; ++r) {
                if (r == c) continue;
                const double f = b[r * m + c];
                if (f == 0.0) continue;
                for (std::size_t k = 0; k < m; ++k) {
                    b[r * m + k] -= f * b[c * m + k];
                    binv_[r * m + k] -= f * binv_[c * m + k];
                }
            }
        }
        xb_.assign(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < m; ++k) s += binv_[i * m + k] * rhs_[k];
            xb_[i] = std::max(s, 0.0);
        }
        factored_ = true;
        since_refactor_ = 0;
    }

    void repair_basis(std::size_t position, std::size_t row) {
        basis_[position] = push_column(0.0, {{row, 1.0}}, Role::Artificial);
        needs_phase_one_ = true;
    }

    // w = B^{-1} a_j
    void ftran(std::size_t j, std::vector<double>& w) const {
        const std::size_t m = num_rows_;
        w.assign(m, 0.0);
        for (auto [r, a] : cols_[j])
            for (std::size_t i = 0; i < m; ++i) w[i] += binv_[i * m + r] * a;
    }

    double reduced_cost(std::size_t j, const std::vector<double>& y, Phase phase) const {
        double d = phase_cost(j, phase);
        for (auto [r, a] : cols_[j]) d -= y[r] * a;
        return d;
    }

    void prices(Phase phase, std::vector<double>& y) const {
        const std::size_t m = num_rows_;
        y.assign(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double cb = phase_cost(basis_[i], phase);
            if (cb == 0.0) continue;
            for (std::size_t k = 0; k < m; ++k) y[k] += cb * binv_[i * m + k];
        }
    }

    void pivot(std::size_t row, std::size_t entering, const std::vector<double>& w, double step) {
        const std::size_t m = num_rows_;
        for (std::size_t i = 0; i < m; ++i) xb_[i] = std::max(xb_[i] - step * w[i], 0.0);
        xb_[row] = step;
        const double inv = 1.0 / w[row];
        for (std::size_t k = 0; k < m; ++k) binv_[row * m + k] *= inv;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == row || w[i] == 0.0) continue;
            const double f = w[i];
            for (std::size_t k = 0; k < m; ++k) binv_[i * m + k] -= f * binv_[row * m + k];
        }
        basis_[row] = entering;
        if (++since_refactor_ >= options_.refactor_every) refactor();
    }

    Status run(Phase phase) {
        const std::size_t m = num_rows_;
        std::vector<char> in_basis(cols_.size(), 0);
        for (std::size_t c : basis_) in_basis[c] = 1;

        double cost_scale = 1.0;
        for (std::size_t j = 0; j < cols_.size(); ++j)
            cost_scale = std::max(cost_scale, std::abs(phase_cost(j, phase)));
        const double dtol = options_.optimality_tol * cost_scale;

        std::vector<double> y, w;
        std::size_t degenerate_run = 0;
        bool bland = false;
        for (;;) {
            if (iterations_ >= options_.max_iterations) return Status::IterationLimit;
            prices(phase, y);

            std::size_t entering = kNone;
            double best = -dtol;
            for (std::size_t j = 0; j < cols_.size(); ++j) {
                if (in_basis[j]) continue;
                if (phase == Phase::Two && role_[j] == Role::Artificial) continue;
                const double d = reduced_cost(j, y, phase);
                if (bland) {
                    if (d < -dtol) {
                        entering = j;
                        break;
                    }
                } else if (d < best) {
                    best = d;
                    entering = j;
                }
            }
            if (entering == kNone) return Status::Optimal;

            ftran(entering, w);
            std::size_t leaving = kNone;
            double step = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m; ++i) {
                // An artificial left basic at zero (redundant row) must leave
                // before it could turn positive.
                const bool stuck = phase == Phase::Two && role_[basis_[i]] == Role::Artificial &&
                                   std::abs(w[i]) > options_.pivot_tol;
                if (!stuck && w[i] <= options_.pivot_tol) continue;
                const double t = stuck ? 0.0 : xb_[i] / w[i];
                if (leaving == kNone || t < step - 1e-12) {
                    step = t;
                    leaving = i;
                } else if (t <= step + 1e-12) {
                    const bool prefer = bland ? basis_[i] < basis_[leaving] : w[i] > w[leaving];
                    if (prefer) {
                        step = std::min(step, t);
                        leaving = i;
                    }
                }
            }
            if (leaving == kNone) return Status::Unbounded;

            if (step <= 1e-12) {
                if (++degenerate_run >= 10 * std::max<std::size_t>(m, 1)) bland = true;
            } else {
                degenerate_run = 0;
                bland = false;
            }
            in_basis[basis_[leaving]] = 0;
            in_basis[entering] = 1;
            pivot(leaving, entering, w, step);
            ++iterations_;
        }
    }

    void drive_out_artificials() {
        std::vector<double> w;
        std::vector<char> in_basis(cols_.size(), 0);
        for (std::size_t c : basis_) in_basis[c] = 1;
        for (std::size_t r = 0; r < num_rows_; ++r) {
            if (role_[basis_[r]] != Role::Artificial) continue;
            for (std::size_t j = 0; j < cols_.size(); ++j) {
                if (in_basis[j] || role_[j] == Role::Artificial) continue;
                ftran(j, w);
                if (std::abs(w[r]) > 1e-9) {
                    in_basis[basis_[r]] = 0;
                    in_basis[j] = 1;
                    pivot(r, j, w, 0.0);
                    break;
                }
            }
        }
        refactor();
    }

    Solution& finish(Solution& out, Status status) {
        out.status = status;
        out.iterations = iterations_;
        if (status != Status::Optimal) return out;
        refactor();
        const std::size_t m = num_rows_;
        std::vector<double> col_value(cols_.size(), 0.0);
        for (std::size_t i = 0; i < m; ++i) col_value[basis_[i]] = xb_[i];
        out.x.assign(num_vars_, 0.0);
        out.value = 0.0;
        for (std::size_t j = 0; j < num_vars_; ++j) {
            double v = col_value[var_pos_[j]];
            if (var_neg_[j] != kNone) v -= col_value[var_neg_[j]];
            out.x[j] = v;
        }
        for (std::size_t c = 0; c < cols_.size(); ++c)
            if (role_[c] == Role::Structural) out.value += cost_[c] * col_value[c];
        std::vector<double> y;
        prices(Phase::Two, y);
        out.duals.resize(m);
        for (std::size_t i = 0; i < m; ++i) out.duals[i] = flipped_[i] ? -y[i] : y[i];
        return out;
    }

    Options options_;
    std::size_t num_rows_;
    std::size_t num_vars_ = 0;
    std::vector<bool> flipped_;
    std::vector<double> rhs_;
    std::vector<SparseVec> cols_;
    std::vector<double> cost_;
    std::vector<Role> role_;
    std::vector<std::size_t> var_pos_;
    std::vector<std::size_t> var_neg_;
    std::vector<std::size_t> basis_;
    std::vector<double> binv_;
    std::vector<double> xb_;
    bool needs_phase_one_ = false;
    bool factored_ = false;
    std::size_t since_refactor_ = 0;
    std::size_t iterations_ = 0;
};

inline Solution solve(const Problem& problem, Options options = {}) {
    return Solver(problem, options).solve();
}

/// Dense convenience entry point: minimize c^T x subject to A_eq x = b_eq,
/// A_ub x <= b_ub and x >= 0.
inline Solution solve_small_lp(const std::vector<double>& costs,
                               const std::vector<std::vector<double>>& eq_lhs,
                               const std::vector<double>& eq_rhs,
                               const std::vector<std::vector<double>>& ub_lhs = {},
                               const std::vector<double>& ub_rhs = {},
                               Options options = {}) {
    Problem p;
    for (double c : costs) p.add_variable(c);
    auto add = [&](const std::vector<double>& dense, Sense sense, double rhs) {
        SparseVec row;
        for (std::size_t j = 0; j < dense.size(); ++j)
            if (dense[j] != 0.0) row.emplace_back(j, dense[j]);
        p.add_row(std::move(row), sense, rhs);
    };
    for (std::size_t i = 0; i < eq_lhs.size(); ++i) add(eq_lhs[i], Sense::Equal, eq_rhs[i]);
    for (std::size_t i = 0; i < ub_lhs.size(); ++i) add(ub_lhs[i], Sense::LessEqual, ub_rhs[i]);
    return solve(p, options);
}

} // namespace drq::lp

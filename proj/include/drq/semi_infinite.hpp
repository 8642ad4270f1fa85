#pragma once

// Semi-infinite duals of the worst-case expectation problems, solved by an
// exchange (cutting-plane) method.
//
// The MAD dual reads
//
//   sup  alpha d + beta m + gamma
//   s.t. alpha |rho - c| + beta rho + gamma <= loss(rho)   for all rho in [a, b]
//
// (with interval moments alpha and beta split into nonnegative theta parts).
// Instead of the dual we iterate on its restriction's LP dual, the primal moment
// problem over a finite support set: the row duals of that LP are the dual
// variables, the most violated rho is appended as a new support point, and the
// loop stops once no rho in [a, b] violates the constraint by more than the
// tolerance. The Wasserstein dual is handled the same way with one constraint
// family per sample.

#include "drq/distribution.hpp"
#include "drq/error.hpp"
#include "drq/lp.hpp"
#include "drq/moment_oracle.hpp"
#include "drq/queue_econ.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace drq {

// ---------------------------------------------------------------------------
// Polynomial form of the social dual constraint

enum class Piece { Left, Right };

struct PolynomialConstraint {
    /// coeffs[k] multiplies rho^k; size n + 4.
    std::vector<double> coeffs;
    Piece piece = Piece::Left;
    Interval interval;

    int degree() const noexcept { return static_cast<int>(coeffs.size()) - 1; }

    double operator()(double rho) const {
        double s = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) s = s * rho + *it;
        return s;
    }
};

struct MadDualVars {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
};

/// (1 - rho)(1 - rho^{n+1}) (f_n(rho) - alpha|rho - c| - beta rho - gamma) on
/// one side of the anchor c, expanded in powers of rho. The prefactor is
/// nonnegative on [0, inf) and vanishes only at rho = 1, so the polynomial is
/// nonnegative on the piece exactly where the dual constraint holds.
inline PolynomialConstraint dual_constraint_polynomial(const QueueParams& params, Threshold n, double anchor,
                                                       const MadDualVars& v, Piece piece,
                                                       Interval support = {0.0, std::numeric_limits<double>::infinity()}) {
    const int k = n.value();
    const double rm = params.reward() * params.service_rate();
    const double c = params.wait_cost();
    // majorant c0 + c1 rho on the piece
    const double c0 = piece == Piece::Left ? v.alpha * anchor + v.gamma : v.gamma - v.alpha * anchor;
    const double c1 = piece == Piece::Left ? v.beta - v.alpha : v.beta + v.alpha;

    PolynomialConstraint out;
    out.piece = piece;
    out.interval = piece == Piece::Left ? Interval{support.lo, anchor} : Interval{anchor, support.hi};
    out.coeffs.assign(static_cast<std::size_t>(k) + 4, 0.0);
    auto& y = out.coeffs;
    y[0] = -c0;
    y[1] = rm - c + c0 - c1;
    y[2] += -rm + c1;  // collides with y[n+1] when n = 1
    y[k + 1] += -rm + c * (k + 1) + c0;
    y[k + 2] = rm - c * k - c0 + c1;
    y[k + 3] = -c1;
    return out;
}

// ---------------------------------------------------------------------------
// Exchange method

struct ExchangeOptions {
    std::size_t scan_points = 10001;
    double tolerance = 1e-8;
    std::size_t max_iterations = 200;
    /// Deepest violators appended per iteration.
    std::size_t cuts_per_iteration = 4;
};

namespace detail {

inline constexpr double kGoldenRatio = 0.6180339887498949;

template <class F>
std::pair<double, double> golden_min(F&& f, double lo, double hi, int iterations = 80) {
    double x1 = hi - kGoldenRatio * (hi - lo), x2 = lo + kGoldenRatio * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < iterations && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - kGoldenRatio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + kGoldenRatio * (hi - lo);
            f2 = f(x2);
        }
    }
    return f1 <= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

struct Violation {
    double rho;
    double value;
};

// Local minima of v on the scan, each refined by golden section between its
// neighbours; sorted deepest first.
template <class V>
std::vector<Violation> local_violations(const std::vector<double>& x, const std::vector<double>& vals, V&& v,
                                        std::size_t polish_limit = 16) {
    const std::size_t g = x.size();
    std::vector<std::size_t> minima;
    for (std::size_t j = 0; j < g; ++j) {
        const bool left_ok = j == 0 || vals[j] <= vals[j - 1];
        const bool right_ok = j + 1 == g || vals[j] <= vals[j + 1];
        if (left_ok && right_ok) minima.push_back(j);
    }
    std::sort(minima.begin(), minima.end(), [&](auto i, auto j) { return vals[i] < vals[j]; });
    if (minima.size() > polish_limit) minima.resize(polish_limit);
    std::vector<Violation> out;
    for (std::size_t j : minima) {
        const double lo = x[j == 0 ? 0 : j - 1], hi = x[j + 1 == g ? g - 1 : j + 1];
        Violation best{x[j], vals[j]};
        if (hi > lo) {
            const auto [r, fr] = golden_min(v, lo, hi);
            if (fr < best.value) best = {r, fr};
        }
        out.push_back(best);
    }
    std::sort(out.begin(), out.end(), [](const Violation& p, const Violation& q) { return p.value < q.value; });
    return out;
}

inline std::vector<double> chebyshev_points(double a, double b, int count) {
    std::vector<double> pts;
    const double pi = std::acos(-1.0);
    for (int k = 0; k < count; ++k)
        pts.push_back(0.5 * (a + b) + 0.5 * (b - a) * std::cos((2.0 * k + 1.0) * pi / (2.0 * count)));
    return pts;
}

inline bool already_present(const std::vector<double>& pts, double x) {
    for (double p : pts)
        if (std::abs(p - x) <= 1e-13 * std::max(1.0, std::abs(x))) return true;
    return false;
}

} // namespace detail

/// Worst-case expectation over a (possibly interval) MAD moment set, returned
/// with the dual certificate (alpha, beta, gamma) or (theta1..theta4, gamma).
inline WorstCaseResult solve_exchange(const Loss& loss, const MomentSpec& spec, const ExchangeOptions& opt = {}) {
    const double a = spec.a(), b = spec.b(), c = spec.anchor();
    const bool exact = spec.is_exact();

    const auto scan = detail::grid_nodes(a, b, std::max<std::size_t>(opt.scan_points, 3),
                                         {c, spec.mean().lo, spec.mean().hi});
    std::vector<double> scan_loss(scan.size());
    for (std::size_t j = 0; j < scan.size(); ++j) {
        scan_loss[j] = loss(scan[j]);
        require(std::isfinite(scan_loss[j]), "loss is not finite at " + std::to_string(scan[j]));
    }

    // Row layout: 0 total mass; exact: 1 mean, 2 MAD; interval: 1 mean >= lo,
    // 2 mean <= hi, 3 MAD >= lo, 4 MAD <= hi.
    auto column = [&](double x) {
        const double dev = std::abs(x - c);
        if (exact) return lp::SparseVec{{0, 1.0}, {1, x}, {2, dev}};
        return lp::SparseVec{{0, 1.0}, {1, x}, {2, x}, {3, dev}, {4, dev}};
    };
    std::vector<double> points{a, c, b, spec.mean().lo, spec.mean().hi};
    for (double x : detail::chebyshev_points(a, b, 8)) points.push_back(x);
    {
        std::vector<double> unique;
        for (double x : points)
            if (!detail::already_present(unique, x)) unique.push_back(x);
        points = std::move(unique);
    }

    lp::Problem master;
    for (double x : points) master.add_variable(loss(x));
    auto add_row = [&](std::size_t r, lp::Sense sense, double rhs) {
        lp::SparseVec coeffs;
        for (std::size_t j = 0; j < points.size(); ++j)
            for (auto [row, v] : column(points[j]))
                if (row == r) coeffs.emplace_back(j, v);
        master.add_row(std::move(coeffs), sense, rhs);
    };
    add_row(0, lp::Sense::Equal, 1.0);
    if (exact) {
        add_row(1, lp::Sense::Equal, spec.mean().lo);
        add_row(2, lp::Sense::Equal, spec.mad().lo);
    } else {
        add_row(1, lp::Sense::GreaterEqual, spec.mean().lo);
        add_row(2, lp::Sense::LessEqual, spec.mean().hi);
        add_row(3, lp::Sense::GreaterEqual, spec.mad().lo);
        add_row(4, lp::Sense::LessEqual, spec.mad().hi);
    }
    lp::Solver solver(master);

    WorstCaseResult out;
    out.method = Method::Exchange;
    std::vector<double> scan_slack(scan.size());
    for (std::size_t iter = 1;; ++iter) {
        const auto sol = solver.solve();
        if (sol.status == lp::Status::Infeasible)
            fail(ErrorKind::Infeasible, "moment constraints cannot be met by any distribution on the support");
        if (!sol.optimal()) fail(ErrorKind::IterationLimit, std::string("master LP: ") + lp::to_string(sol.status));

        const auto& y = sol.duals;
        const double gamma = y[0];
        const double slope = exact ? y[1] : y[1] + y[2];
        const double kink = exact ? y[2] : y[3] + y[4];
        auto slack = [&](double x) { return loss(x) - (kink * std::abs(x - c) + slope * x + gamma); };
        for (std::size_t j = 0; j < scan.size(); ++j)
            scan_slack[j] = scan_loss[j] - (kink * std::abs(scan[j] - c) + slope * scan[j] + gamma);
        const auto viol = detail::local_violations(scan, scan_slack, slack);
        const double v_min = viol.empty() ? 0.0 : viol.front().value;

        std::size_t added = 0;
        if (v_min < -opt.tolerance && iter < opt.max_iterations) {
            for (const auto& v : viol) {
                if (v.value >= -opt.tolerance || added >= opt.cuts_per_iteration) break;
                if (detail::already_present(points, v.rho)) continue;
                points.push_back(v.rho);
                solver.add_column(loss(v.rho), column(v.rho));
                ++added;
            }
        }
        if (added > 0) continue;

        out.value = sol.value;
        out.gap = std::max(0.0, -v_min);
        out.iterations = iter;
        if (v_min < -opt.tolerance && out.gap > 1e-6 * std::max(1.0, std::abs(sol.value))) {
            if (iter >= opt.max_iterations)
                fail(ErrorKind::IterationLimit, "exchange stopped after " + std::to_string(iter) +
                                                    " iterations with bounds [" + std::to_string(sol.value + v_min) +
                                                    ", " + std::to_string(sol.value) + "]");
            out.warnings.push_back("exchange stalled with constraint violation " + std::to_string(v_min));
        }
        out.extremal = detail::support_of(points, sol.x);
        DualCertificate cert;
        if (exact) {
            cert.variables = {{"alpha", kink}, {"beta", slope}, {"gamma", gamma}};
        } else {
            cert.variables = {{"theta1", y[3]}, {"theta2", -y[4]}, {"theta3", y[1]}, {"theta4", -y[2]},
                              {"gamma", gamma}};
        }
        cert.active_points = out.extremal.points();
        cert.min_slack = v_min;
        out.certificate = std::move(cert);
        return out;
    }
}

/// Worst-case expectation over the 1-Wasserstein ball of radius epsilon around
/// the empirical distribution of `samples` on [a, b]. Certificate: alpha and
/// s_1..s_N of
///
///   sup  -alpha eps + (1/N) sum_i s_i
///   s.t. s_i - alpha |rho - rho_i| <= loss(rho)   for all rho in [a, b], all i.
inline WorstCaseResult solve_wasserstein_dual(const Loss& loss, const std::vector<double>& samples, double epsilon,
                                              double a, double b, const ExchangeOptions& opt = {}) {
    require(!samples.empty(), "need at least one sample");
    require(epsilon >= 0.0 && std::isfinite(epsilon), "radius must be finite and nonnegative");
    require(a < b, "support needs a < b");
    for (double s : samples) require(s >= a && s <= b, "sample " + std::to_string(s) + " outside the support");
    const std::size_t n = samples.size();
    const double w = 1.0 / static_cast<double>(n);

    const auto scan = detail::grid_nodes(a, b, std::max<std::size_t>(opt.scan_points, 3), samples);
    const std::size_t g = scan.size();
    std::vector<double> scan_loss(g);
    for (std::size_t j = 0; j < g; ++j) {
        scan_loss[j] = loss(scan[j]);
        require(std::isfinite(scan_loss[j]), "loss is not finite at " + std::to_string(scan[j]));
    }
    std::vector<std::size_t> sample_index(n);
    for (std::size_t i = 0; i < n; ++i)
        sample_index[i] = static_cast<std::size_t>(std::lower_bound(scan.begin(), scan.end(), samples[i]) - scan.begin());

    // Rows 0..n-1: mass of sample i; row n: transport budget.
    struct Col {
        std::size_t sample;
        double rho;
    };
    std::vector<Col> cols;
    lp::Problem master;
    std::vector<lp::SparseVec> rows(n + 1);
    auto column = [&](std::size_t i, double x) { return lp::SparseVec{{i, 1.0}, {n, w * std::abs(x - samples[i])}}; };
    for (std::size_t i = 0; i < n; ++i) {
        for (double x : {samples[i], a, b}) {
            bool dup = false;
            for (const auto& col : cols)
                if (col.sample == i && col.rho == x) dup = true;
            if (dup) continue;
            const std::size_t j = master.add_variable(w * loss(x));
            for (auto [r, v] : column(i, x)) rows[r].emplace_back(j, v);
            cols.push_back({i, x});
        }
    }
    for (std::size_t i = 0; i < n; ++i) master.add_row(std::move(rows[i]), lp::Sense::Equal, 1.0);
    master.add_row(std::move(rows[n]), lp::Sense::LessEqual, epsilon);
    lp::Solver solver(master);

    WorstCaseResult out;
    out.method = Method::Exchange;
    std::vector<double> left(g), right(g);
    std::vector<std::size_t> left_arg(g), right_arg(g);
    for (std::size_t iter = 1;; ++iter) {
        const auto sol = solver.solve();
        if (!sol.optimal()) fail(ErrorKind::IterationLimit, std::string("transport LP: ") + lp::to_string(sol.status));
        const double alpha = std::max(0.0, -sol.duals[n]);

        // min_j loss_j + alpha |x_j - x_k| for every k via running minima of
        // loss_j - alpha x_j (from the left) and loss_j + alpha x_j (from the right).
        for (std::size_t j = 0; j < g; ++j) {
            const double lv = scan_loss[j] - alpha * scan[j];
            if (j == 0 || lv < left[j - 1]) {
                left[j] = lv;
                left_arg[j] = j;
            } else {
                left[j] = left[j - 1];
                left_arg[j] = left_arg[j - 1];
            }
        }
        for (std::size_t j = g; j-- > 0;) {
            const double rv = scan_loss[j] + alpha * scan[j];
            if (j + 1 == g || rv < right[j + 1]) {
                right[j] = rv;
                right_arg[j] = j;
            } else {
                right[j] = right[j + 1];
                right_arg[j] = right_arg[j + 1];
            }
        }

        double lower_shift = 0.0, v_min = 0.0;
        std::vector<Col> cuts;
        for (std::size_t i = 0; i < n; ++i) {
            const double s_i = sol.duals[i] / w;
            const double xi = samples[i];
            const std::size_t k = sample_index[i];
            const double lv = left[k] + alpha * xi, rv = right[k] - alpha * xi;
            const std::size_t j = lv <= rv ? left_arg[k] : right_arg[k];
            auto phi = [&](double x) { return loss(x) + alpha * std::abs(x - xi) - s_i; };
            double best_x = scan[j], best_v = std::min(lv, rv) - s_i;
            const double lo = scan[j == 0 ? 0 : j - 1], hi = scan[j + 1 == g ? g - 1 : j + 1];
            const auto [r, fr] = detail::golden_min(phi, lo, hi);
            if (fr < best_v) {
                best_x = r;
                best_v = fr;
            }
            v_min = std::min(v_min, best_v);
            lower_shift += w * std::min(0.0, best_v);
            if (best_v < -opt.tolerance) cuts.push_back({i, best_x});
        }

        std::size_t added = 0;
        if (iter < opt.max_iterations) {
            for (const auto& cut : cuts) {
                bool dup = false;
                for (const auto& col : cols)
                    if (col.sample == cut.sample && std::abs(col.rho - cut.rho) <= 1e-13 * std::max(1.0, cut.rho))
                        dup = true;
                if (dup) continue;
                solver.add_column(w * loss(cut.rho), column(cut.sample, cut.rho));
                cols.push_back(cut);
                ++added;
            }
        }
        if (added > 0) continue;

        out.value = sol.value;
        out.gap = -lower_shift;
        out.iterations = iter;
        if (v_min < -opt.tolerance && out.gap > 1e-6 * std::max(1.0, std::abs(sol.value))) {
            if (iter >= opt.max_iterations)
                fail(ErrorKind::IterationLimit, "Wasserstein exchange stopped after " + std::to_string(iter) +
                                                    " iterations with bounds [" +
                                                    std::to_string(sol.value + lower_shift) + ", " +
                                                    std::to_string(sol.value) + "]");
            out.warnings.push_back("exchange stalled with constraint violation " + std::to_string(v_min));
        }
        std::vector<double> pts, mass;
        for (std::size_t j = 0; j < cols.size(); ++j) {
            pts.push_back(cols[j].rho);
            mass.push_back(sol.x[j] * w);
        }
        out.extremal = detail::support_of(pts, mass).compacted(0.0, 1e-13);
        DualCertificate cert;
        cert.variables.emplace_back("alpha", alpha);
        for (std::size_t i = 0; i < n; ++i) cert.variables.emplace_back("s" + std::to_string(i + 1), sol.duals[i] / w);
        cert.active_points = out.extremal.points();
        cert.min_slack = v_min;
        out.certificate = std::move(cert);
        return out;
    }
}

} // namespace drq

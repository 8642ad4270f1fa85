#pragma once

// Brute-force solvers for the primal moment problem
//
//   inf  E_P[loss(rho)]  over distributions P on [a, b] in a MomentSpec,
//
// used as ground truth for the closed forms and the dual solvers. Nothing
// here is clever: one solver discretizes [a, b] and solves the resulting LP,
// the other searches directly over three-point supports.

#include "drq/distribution.hpp"
#include "drq/error.hpp"
#include "drq/lp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace drq {

namespace detail {

// Uniform grid on [a, b] plus the given extra nodes, sorted and deduplicated.
inline std::vector<double> grid_nodes(double a, double b, std::size_t size, std::vector<double> extra) {
    std::vector<double> nodes;
    nodes.reserve(size + extra.size());
    for (std::size_t k = 0; k < size; ++k)
        nodes.push_back(a + (b - a) * static_cast<double>(k) / static_cast<double>(size - 1));
    nodes.back() = b;
    for (double x : extra)
        if (x >= a && x <= b) nodes.push_back(x);
    std::sort(nodes.begin(), nodes.end());
    std::vector<double> out;
    for (double x : nodes)
        if (out.empty() || x - out.back() > 1e-13 * std::max(1.0, std::abs(x))) out.push_back(x);
    return out;
}

inline DiscreteDistribution support_of(const std::vector<double>& points, const std::vector<double>& mass) {
    std::vector<double> pts, prs;
    for (std::size_t j = 0; j < points.size(); ++j) {
        if (mass[j] > 1e-13) {
            pts.push_back(points[j]);
            prs.push_back(mass[j]);
        }
    }
    double total = 0.0;
    for (double p : prs) total += p;
    for (double& p : prs) p /= total;
    return DiscreteDistribution(std::move(pts), std::move(prs));
}

// Minimizes f over a box by Nelder-Mead with coordinates clamped into the box.
template <std::size_t D, class F>
std::array<double, D> nelder_mead(F&& f, std::array<double, D> x0, double lo, double hi, double step,
                                  int max_iter = 4000) {
    auto clamp_pt = [&](std::array<double, D> p) {
        for (double& v : p) v = std::clamp(v, lo, hi);
        return p;
    };
    std::array<std::array<double, D>, D + 1> s;
    std::array<double, D + 1> fv;
    s[0] = clamp_pt(x0);
    for (std::size_t i = 0; i < D; ++i) {
        s[i + 1] = s[0];
        s[i + 1][i] += (s[0][i] + step <= hi) ? step : -step;
        s[i + 1] = clamp_pt(s[i + 1]);
    }
    for (std::size_t i = 0; i <= D; ++i) fv[i] = f(s[i]);

    for (int it = 0; it < max_iter; ++it) {
        std::array<std::size_t, D + 1> idx;
        for (std::size_t i = 0; i <= D; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return fv[i] < fv[j]; });
        const auto best = idx[0], worst = idx[D], second = idx[D - 1];

        double size = 0.0;
        for (std::size_t i = 1; i <= D; ++i)
            for (std::size_t k = 0; k < D; ++k) size = std::max(size, std::abs(s[idx[i]][k] - s[best][k]));
        if (size < 1e-12 * std::max(1.0, hi - lo)) break;

        std::array<double, D> c{};
        for (std::size_t i = 0; i <= D; ++i)
            if (i != worst)
                for (std::size_t k = 0; k < D; ++k) c[k] += s[i][k] / static_cast<double>(D);
        auto along = [&](double t) {
            std::array<double, D> p;
            for (std::size_t k = 0; k < D; ++k) p[k] = c[k] + t * (s[worst][k] - c[k]);
            return clamp_pt(p);
        };
        const auto xr = along(-1.0);
        const double fr = f(xr);
        if (fr < fv[best]) {
            const auto xe = along(-2.0);
            const double fe = f(xe);
            if (fe < fr) {
                s[worst] = xe;
                fv[worst] = fe;
            } else {
                s[worst] = xr;
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            s[worst] = xr;
            fv[worst] = fr;
        } else {
            const auto xc = fr < fv[worst] ? along(-0.5) : along(0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, fv[worst])) {
                s[worst] = xc;
                fv[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= D; ++i) {
                    if (i == best) continue;
                    for (std::size_t k = 0; k < D; ++k) s[i][k] = s[best][k] + 0.5 * (s[i][k] - s[best][k]);
                    fv[i] = f(s[i]);
                }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= D; ++i)
        if (fv[i] < fv[best]) best = i;
    return s[best];
}

// Probabilities on three points matching total mass, mean m and MAD d about m.
inline std::optional<std::array<double, 3>> three_point_weights(const std::array<double, 3>& x, double m,
                                                                double d) {
    double a[3][4] = {{1.0, 1.0, 1.0, 1.0},
                      {x[0], x[1], x[2], m},
                      {std::abs(x[0] - m), std::abs(x[1] - m), std::abs(x[2] - m), d}};
    for (int c = 0; c < 3; ++c) {
        int p = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
        if (std::abs(a[p][c]) < 1e-12) return std::nullopt;
        for (int k = 0; k < 4; ++k) std::swap(a[p][k], a[c][k]);
        for (int r = 0; r < 3; ++r) {
            if (r == c) continue;
            const double f = a[r][c] / a[c][c];
            for (int k = 0; k < 4; ++k) a[r][k] -= f * a[c][k];
        }
    }
    std::array<double, 3> p;
    for (int i = 0; i < 3; ++i) {
        p[i] = a[i][3] / a[i][i];
        if (!(p[i] >= -1e-12)) return std::nullopt;
        p[i] = std::max(p[i], 0.0);
    }
    return p;
}

} // namespace detail

/// Discretized primal: minimize sum_i p_i loss(x_i) over probability vectors on
/// a uniform grid (plus a, b, the anchor and the mean endpoints) subject to the
/// moment constraints of `spec`.
inline WorstCaseResult worst_case_grid(const Loss& loss, const MomentSpec& spec, std::size_t grid_size = 2001) {
    require(grid_size >= 3, "grid needs at least 3 points");
    const double c = spec.anchor();
    const auto x = detail::grid_nodes(spec.a(), spec.b(), grid_size,
                                      {spec.a(), spec.b(), c, spec.mean().lo, spec.mean().hi});
    const std::size_t g = x.size();

    std::vector<double> cost(g);
    for (std::size_t j = 0; j < g; ++j) {
        cost[j] = loss(x[j]);
        require(std::isfinite(cost[j]), "loss is not finite at " + std::to_string(x[j]));
    }
    std::vector<double> ones(g, 1.0), dev(g), neg_x(g), neg_dev(g);
    for (std::size_t j = 0; j < g; ++j) {
        dev[j] = std::abs(x[j] - c);
        neg_x[j] = -x[j];
        neg_dev[j] = -dev[j];
    }

    lp::Solution sol;
    if (spec.is_exact()) {
        sol = lp::solve_small_lp(cost, {ones, x, dev}, {1.0, spec.mean().lo, spec.mad().lo});
    } else {
        sol = lp::solve_small_lp(cost, {ones}, {1.0}, {neg_x, x, neg_dev, dev},
                                 {-spec.mean().lo, spec.mean().hi, -spec.mad().lo, spec.mad().hi});
    }
    if (sol.status == lp::Status::Infeasible)
        fail(ErrorKind::Infeasible, "moment constraints cannot be met by any distribution on the support");
    if (!sol.optimal()) fail(ErrorKind::IterationLimit, std::string("grid LP: ") + lp::to_string(sol.status));

    WorstCaseResult out;
    out.value = sol.value;
    out.extremal = detail::support_of(x, sol.x);
    out.method = Method::GridOracle;
    out.iterations = sol.iterations;
    DualCertificate cert;
    if (spec.is_exact()) {
        cert.variables = {{"alpha", sol.duals[2]}, {"beta", sol.duals[1]}, {"gamma", sol.duals[0]}};
    } else {
        // <= rows carry nonpositive duals
        cert.variables = {{"theta1", -sol.duals[3]}, {"theta2", -sol.duals[4]},
                          {"theta3", -sol.duals[1]}, {"theta4", -sol.duals[2]},
                          {"gamma", sol.duals[0]}};
    }
    cert.active_points = out.extremal.points();
    out.certificate = cert;
    return out;
}

/// Direct search over distributions with at most three support points for an
/// exact-moment spec. Each candidate support has its weights fixed by the
/// moment equations; supports are refined by Nelder-Mead from stratified
/// random starts, and the two-point family is scanned separately.
inline WorstCaseResult worst_case_three_point(const Loss& loss, const MomentSpec& spec, int multistart = 32,
                                              std::uint64_t seed = 0x5eed) {
    require(spec.is_exact(), "three-point search needs exact moments");
    require(multistart >= 1, "need at least one start");
    const double a = spec.a(), b = spec.b(), m = spec.mean().lo, d = spec.mad().lo;
    const double dbar = max_mad(a, b, m);
    if (d > dbar * (1.0 + 1e-12) + 1e-15)
        fail(ErrorKind::Infeasible, "MAD " + std::to_string(d) + " exceeds the bound " + std::to_string(dbar));

    WorstCaseResult out;
    out.method = Method::ThreePointSearch;
    if (d <= 0.0) {
        out.extremal = DiscreteDistribution::point_mass(m);
        out.value = loss(m);
        return out;
    }

    double best_value = std::numeric_limits<double>::infinity();
    std::vector<double> best_x, best_p;
    auto consider = [&](const std::vector<double>& xs, const std::vector<double>& ps) {
        double v = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (ps[i] > 0.0) v += ps[i] * loss(xs[i]);
        if (v < best_value) {
            best_value = v;
            best_x = xs;
            best_p = ps;
        }
        return v;
    };

    // Two points x1 < m < x2: both halves carry deviation d/2, which pins x2.
    const double d_eff = std::min(d, dbar);
    auto two_point = [&](double x1) {
        const double p1 = d_eff / (2.0 * (m - x1));
        return std::pair{p1, m + d_eff / (2.0 * (1.0 - p1))};
    };
    if (m > a && m - a > d_eff / 2.0) {
        const double hi = m - d_eff / 2.0;
        auto value_at = [&](double x1) {
            const auto [p1, x2] = two_point(x1);
            if (!(p1 < 1.0) || x2 > b) return std::numeric_limits<double>::infinity();
            return p1 * loss(x1) + (1.0 - p1) * loss(x2);
        };
        const int scan = 2000;
        double bx = a, bv = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= scan; ++k) {
            const double x1 = a + (hi - a) * k / scan * (1.0 - 1e-9);
            const double v = value_at(x1);
            if (v < bv) {
                bv = v;
                bx = x1;
            }
        }
        double lo = std::max(a, bx - (hi - a) / scan), up = std::min(hi * (1.0 - 1e-12), bx + (hi - a) / scan);
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int it = 0; it < 100 && up - lo > 1e-14; ++it) {
            const double l1 = up - phi * (up - lo), l2 = lo + phi * (up - lo);
            if (value_at(l1) < value_at(l2)) up = l2;
            else lo = l1;
        }
        for (double x1 : {bx, 0.5 * (lo + up), a}) {
            if (!std::isfinite(value_at(x1))) continue;
            const auto [p1, x2] = two_point(x1);
            consider({x1, x2}, {p1, 1.0 - p1});
        }
    }

    // General three-point supports.
    auto objective = [&](const std::array<double, 3>& x) {
        const auto p = detail::three_point_weights(x, m, d);
        if (!p) return std::numeric_limits<double>::infinity();
        double v = 0.0;
        for (int i = 0; i < 3; ++i)
            if ((*p)[i] > 0.0) v += (*p)[i] * loss(x[i]);
        return v;
    };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double snap_tol = 1e-3 * (b - a);
    for (int s = 0; s < multistart; ++s) {
        std::array<double, 3> x0{};
        bool found = false;
        for (int attempt = 0; attempt < 256 && !found; ++attempt) {
            // Stratify the left point over [a, m] and the right one over [m, b].
            x0[0] = a + (m - a) * (s + unit(rng)) / multistart;
            x0[1] = a + (b - a) * unit(rng);
            x0[2] = m + (b - m) * (multistart - 1 - s + unit(rng)) / multistart;
            found = std::isfinite(objective(x0));
        }
        if (!found) x0 = {a, m, b};
        auto x = detail::nelder_mead<3>(objective, x0, a, b, 0.1 * (b - a));
        double v = objective(x);
        auto snapped = x;
        for (double& xi : snapped)
            for (double target : {a, m, b})
                if (std::abs(xi - target) < snap_tol) xi = target;
        const double vs = objective(snapped);
        if (vs <= v + 1e-9 * std::max(1.0, std::abs(v))) {
            x = snapped;
            v = vs;
        }
        if (!std::isfinite(v)) continue;
        const auto p = *detail::three_point_weights(x, m, d);
        consider({x[0], x[1], x[2]}, {p[0], p[1], p[2]});
    }
    {
        const std::array<double, 3> corners{a, m, b};
        if (const auto p = detail::three_point_weights(corners, m, d))
            consider({a, m, b}, {(*p)[0], (*p)[1], (*p)[2]});
    }
    if (best_x.empty()) fail(ErrorKind::Infeasible, "no support of at most three points meets the moments");

    out.extremal = DiscreteDistribution(best_x, best_p).compacted(0.0, 1e-12);
    out.value = best_value;
    out.iterations = static_cast<std::size_t>(multistart);
    return out;
}

/// Discretized primal of the Wasserstein worst case: each sample's 1/N of mass
/// is transported to grid points at total cost at most epsilon.
inline WorstCaseResult worst_case_wasserstein_grid(const Loss& loss, const std::vector<double>& samples,
                                                   double epsilon, double a, double b,
                                                   std::size_t grid_size = 1001) {
    require(!samples.empty(), "need at least one sample");
    require(epsilon >= 0.0, "radius must be nonnegative");
    require(a < b, "support needs a < b");
    for (double s : samples) require(s >= a && s <= b, "sample outside the support");
    const auto x = detail::grid_nodes(a, b, grid_size, samples);
    const std::size_t g = x.size(), n = samples.size();
    const double w = 1.0 / static_cast<double>(n);

    std::vector<double> loss_x(g);
    for (std::size_t j = 0; j < g; ++j) loss_x[j] = loss(x[j]);
    std::vector<double> cost(n * g);
    std::vector<std::vector<double>> eq(n, std::vector<double>(n * g, 0.0));
    std::vector<double> transport(n * g);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < g; ++j) {
            cost[i * g + j] = loss_x[j];
            eq[i][i * g + j] = 1.0;
            transport[i * g + j] = std::abs(x[j] - samples[i]);
        }
    }
    const auto sol = lp::solve_small_lp(cost, eq, std::vector<double>(n, w), {transport}, {epsilon});
    if (!sol.optimal()) fail(ErrorKind::IterationLimit, std::string("transport LP: ") + lp::to_string(sol.status));

    std::vector<double> marginal(g, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < g; ++j) marginal[j] += sol.x[i * g + j];
    WorstCaseResult out;
    out.value = sol.value;
    out.extremal = detail::support_of(x, marginal);
    out.method = Method::GridOracle;
    out.iterations = sol.iterations;
    return out;
}

/// Wide supports combined with long thresholds make rho^n span many orders of
/// magnitude; results remain usable but lose digits.
inline std::optional<std::string> conditioning_warning(const MomentSpec& spec, int n) {
    if (spec.b() - spec.a() > 10.0 && n > 20)
        return "support width " + std::to_string(spec.b() - spec.a()) + " with threshold " + std::to_string(n) +
               " is poorly conditioned";
    return std::nullopt;
}

} // namespace drq

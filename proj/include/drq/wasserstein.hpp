#pragma once

// 1-Wasserstein balls around the empirical distribution.

#include "drq/data_driven.hpp"
#include "drq/distribution.hpp"
#include "drq/error.hpp"
#include "drq/lp.hpp"
#include "drq/queue_econ.hpp"
#include "drq/semi_infinite.hpp"
#include "drq/threshold.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace drq {

/// Integral of |F_P - F_Q| over the real line.
inline double wasserstein1_distance(const DiscreteDistribution& p, const DiscreteDistribution& q) {
    std::vector<std::pair<double, double>> events;  // (location, signed mass)
    for (std::size_t i = 0; i < p.size(); ++i) events.emplace_back(p.points()[i], p.probs()[i]);
    for (std::size_t i = 0; i < q.size(); ++i) events.emplace_back(q.points()[i], -q.probs()[i]);
    std::sort(events.begin(), events.end());
    double cdf_gap = 0.0, total = 0.0;
    for (std::size_t i = 0; i + 1 < events.size(); ++i) {
        cdf_gap += events[i].second;
        total += std::abs(cdf_gap) * (events[i + 1].first - events[i].first);
    }
    return total;
}

struct WassersteinBall {
    SampleSet samples;
    double radius = 0.0;

    WassersteinBall(SampleSet s, double eps) : samples(std::move(s)), radius(eps) {
        require(std::isfinite(eps) && eps >= 0.0, "Wasserstein radius must be finite and nonnegative");
    }

    DiscreteDistribution center() const { return DiscreteDistribution::uniform(samples.values()); }
    bool contains(const DiscreteDistribution& p, double tol = 1e-9) const {
        for (double x : p.points())
            if (!samples.support().contains(x, tol)) return false;
        return wasserstein1_distance(p, center()) <= radius + tol;
    }
};

namespace detail {

/// max -alpha eps + (1/N) sum s_i  s.t.  s_i - alpha |rho - rho_i| <= r_n(rho)
/// for rho in {a, rho_i, b}; concavity of r_n reduces each family to these points.
inline WorstCaseResult revenue_wass_lp(const Loss& r, const WassersteinBall& ball) {
    const auto& xs = ball.samples.values();
    const std::size_t count = xs.size();
    const double w = 1.0 / static_cast<double>(count);
    const double a = ball.samples.a(), b = ball.samples.b();

    lp::Problem p;
    p.add_variable(ball.radius);  // alpha, minimizing the negated objective
    for (std::size_t i = 0; i < count; ++i) p.add_variable(-w, lp::VarKind::Free);
    struct RowPoint {
        std::size_t sample;
        double rho;
    };
    std::vector<RowPoint> rows;
    // Endpoints closer than this to a sample share its row; nearly parallel rows
    // wreck the basis (draws near 0 can be 1e-17).
    const double merge = 1e-12 * (b - a);
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> at{xs[i]};
        if (xs[i] - a > merge) at.push_back(a);
        if (b - xs[i] > merge) at.push_back(b);
        for (double x : at) {
            p.add_row({{0, -std::abs(x - xs[i])}, {i + 1, 1.0}}, lp::Sense::LessEqual, r(x));
            rows.push_back({i, x});
        }
    }
    const auto sol = lp::solve(p);
    if (!sol.optimal()) fail(ErrorKind::IterationLimit, std::string("Wasserstein revenue LP: ") + lp::to_string(sol.status));

    WorstCaseResult out;
    out.value = 0.0 - sol.value;  // no -0 in output
    out.method = Method::LinearProgram;
    out.iterations = 1;
    std::vector<double> pts, probs;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        pts.push_back(rows[k].rho);
        probs.push_back(-sol.duals[k]);
    }
    out.extremal = DiscreteDistribution(pts, probs).compacted(1e-12);
    DualCertificate cert;
    cert.variables.emplace_back("alpha", sol.x[0]);
    for (std::size_t i = 0; i < count; ++i) cert.variables.emplace_back("s" + std::to_string(i + 1), sol.x[i + 1]);
    cert.active_points = out.extremal.points();
    out.certificate = std::move(cert);
    return out;
}

/// Same program with s_i eliminated: maximize the concave piecewise-linear
///   g(alpha) = -alpha eps + (1/N) sum_i min_{x in {a, rho_i, b}} r(x) + alpha |x - rho_i|
/// by bisection over its sorted breakpoints. O(N log N).
inline WorstCaseResult revenue_wass_breakpoints(const Loss& r, const WassersteinBall& ball) {
    const auto& xs = ball.samples.values();
    const std::size_t count = xs.size();
    const double w = 1.0 / static_cast<double>(count);
    const double a = ball.samples.a(), b = ball.samples.b(), eps = ball.radius;
    const double ra = r(a), rb = r(b);

    struct Piece {
        double x, intercept, slope;
    };
    std::vector<std::array<Piece, 3>> pieces(count);
    std::vector<double> breaks{0.0};
    for (std::size_t i = 0; i < count; ++i) {
        pieces[i] = {Piece{xs[i], r(xs[i]), 0.0}, Piece{a, ra, xs[i] - a}, Piece{b, rb, b - xs[i]}};
        for (int u = 0; u < 3; ++u)
            for (int v = u + 1; v < 3; ++v) {
                const auto& p = pieces[i][u];
                const auto& q = pieces[i][v];
                if (p.slope == q.slope) continue;
                const double t = (q.intercept - p.intercept) / (p.slope - q.slope);
                if (t > 0.0 && std::isfinite(t)) breaks.push_back(t);
            }
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    // Active pieces at alpha: the minimizers, ordered so that [lo] has the
    // smallest slope (the right derivative) and [hi] the largest.
    auto active = [&](std::size_t i, double alpha, bool right) {
        const auto& ps = pieces[i];
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : ps) best = std::min(best, p.intercept + alpha * p.slope);
        const double tol = 1e-12 * std::max(1.0, std::abs(best));
        int pick = -1;
        for (int k = 0; k < 3; ++k) {
            if (ps[k].intercept + alpha * ps[k].slope > best + tol) continue;
            if (pick < 0 || (right ? ps[k].slope < ps[pick].slope : ps[k].slope > ps[pick].slope)) pick = k;
        }
        return pick;
    };
    auto right_slope = [&](double alpha) {
        double s = -eps;
        for (std::size_t i = 0; i < count; ++i) s += w * pieces[i][static_cast<std::size_t>(active(i, alpha, true))].slope;
        return s;
    };
    // g is linear between breakpoints, so its maximum sits on the first
    // breakpoint whose right derivative is nonpositive. Past the last one every
    // sample stays put and the slope is -eps.
    std::size_t lo = 0, hi = breaks.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (right_slope(breaks[mid]) <= 0.0) hi = mid;
        else lo = mid + 1;
    }
    const double alpha = breaks[lo];

    WorstCaseResult out;
    out.method = Method::LinearProgram;
    out.iterations = 1;
    double value = -alpha * eps;
    std::vector<int> small(count), large(count);
    double cost_small = 0.0, cost_large = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        small[i] = active(i, alpha, true);
        large[i] = active(i, alpha, false);
        const auto& p = pieces[i][static_cast<std::size_t>(small[i])];
        value += w * (p.intercept + alpha * p.slope);
        cost_small += w * p.slope;
        cost_large += w * pieces[i][static_cast<std::size_t>(large[i])].slope;
    }
    out.value = value;
    // Mix the cheapest and costliest minimizers so that the budget binds when alpha > 0.
    double lambda = 0.0;
    if (alpha > 0.0 && cost_large > cost_small) lambda = std::clamp((eps - cost_small) / (cost_large - cost_small), 0.0, 1.0);
    std::vector<double> pts, probs;
    for (std::size_t i = 0; i < count; ++i) {
        pts.push_back(pieces[i][static_cast<std::size_t>(small[i])].x);
        probs.push_back(w * (1.0 - lambda));
        pts.push_back(pieces[i][static_cast<std::size_t>(large[i])].x);
        probs.push_back(w * lambda);
    }
    out.extremal = DiscreteDistribution(pts, probs).compacted(0.0);
    DualCertificate cert;
    cert.variables.emplace_back("alpha", alpha);
    for (std::size_t i = 0; i < count; ++i) {
        const auto& p = pieces[i][static_cast<std::size_t>(small[i])];
        cert.variables.emplace_back("s" + std::to_string(i + 1), p.intercept + alpha * p.slope);
    }
    cert.active_points = out.extremal.points();
    out.certificate = std::move(cert);
    return out;
}

} // namespace detail

/// Sample counts above which the revenue program is solved by breakpoint search
/// instead of the dense LP.
inline constexpr std::size_t kRevenueLpMaxSamples = 60;

inline WorstCaseResult worst_case_revenue_wass(const QueueParams& params, Threshold n, const WassersteinBall& ball) {
    const Loss r = [&](double x) { return revenue_rate(params, n, x); };
    return ball.samples.size() <= kRevenueLpMaxSamples ? detail::revenue_wass_lp(r, ball)
                                                       : detail::revenue_wass_breakpoints(r, ball);
}

inline WorstCaseResult worst_case_social_wass(const QueueParams& params, Threshold n, const WassersteinBall& ball,
                                              const ExchangeOptions& opt = {}) {
    return solve_wasserstein_dual([&](double x) { return social_rate(params, n, x); }, ball.samples.values(),
                                  ball.radius, ball.samples.a(), ball.samples.b(), opt);
}

inline WorstCaseResult worst_case_wass(Objective objective, const QueueParams& params, Threshold n,
                                       const WassersteinBall& ball) {
    return objective == Objective::Social ? worst_case_social_wass(params, n, ball)
                                          : worst_case_revenue_wass(params, n, ball);
}

inline ThresholdSolution wass_threshold(Objective objective, const QueueParams& params, const WassersteinBall& ball,
                                        std::optional<int> max_n = {}) {
    return search_thresholds(
        params, [&](Threshold n) { return worst_case_wass(objective, params, n, ball); }, max_n);
}

} // namespace drq

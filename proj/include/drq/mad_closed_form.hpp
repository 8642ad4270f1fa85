#pragma once

// Worst-case expected rates over the exact-moment MAD set
//
//   { P on [a, b] : E_P[rho] = m, E_P|rho - m| = d },
//
// in closed form where the extremal distribution is known, and by the
// exchange method elsewhere.
//
// Revenue: r_n is concave, so the extremal distribution always sits on
// {a, m, b}. Social: when m <= 1 and R mu / C >= n + 1, f_n is concave up to
// its inflection point and convex beyond it; the extremal support is then
// {a, m, b}, {a, m, rho_t} or a two-point law, depending on where the line
// through (m, f_n(m)) tangent to f_n touches.

#include "drq/distribution.hpp"
#include "drq/error.hpp"
#include "drq/queue_econ.hpp"
#include "drq/semi_infinite.hpp"
#include "drq/threshold.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>

namespace drq {

struct TangentPoint {
    double rho_t = 0.0;
    double f_t = 0.0;
    /// MAD at which the extremal law collapses to two points.
    double d0 = 0.0;
    int iterations = 0;
};

namespace detail {

inline bool social_hypotheses_hold(const QueueParams& params, Threshold n, double a, double m, double b) {
    return m <= 1.0 && m > a && m < b && params.potential() >= n.value() + 1.0;
}

// Tangent line from (m, f(m)) touches f at the root of
// g(rho) = f(rho) + f'(rho)(m - rho) - f(m), which bisection brackets in [m, b].
inline double tangent_residual(const QueueParams& params, Threshold n, double m, double rho, double fm) {
    const Jet j = social_rate_jet(params, n, rho);
    return j.value + j.d1 * (m - rho) - fm;
}

inline void check_exact(const MomentSpec& spec) {
    require(spec.is_exact(), "closed forms need exact mean and MAD");
    const double dbar = max_mad(spec.a(), spec.b(), spec.mean().lo);
    if (spec.mad().lo > dbar * (1.0 + 1e-12) + 1e-15)
        fail(ErrorKind::Infeasible, "MAD " + std::to_string(spec.mad().lo) + " exceeds the largest attainable " +
                                        std::to_string(dbar) + " for this mean and support");
}

// Weights d/(2(m - x1)), rest, d/(2(x3 - m)) on x1 < m < x3.
inline DiscreteDistribution three_point_law(double x1, double m, double x3, double d, bool maximal) {
    const double p1 = d / (2.0 * (m - x1));
    const double p3 = d / (2.0 * (x3 - m));
    double p2 = 1.0 - p1 - p3;
    if (maximal || std::abs(p2) < 1e-14) p2 = 0.0;
    std::vector<double> pts{x1}, prs{p1};
    if (p2 > 0.0) {
        pts.push_back(m);
        prs.push_back(p2);
    }
    pts.push_back(x3);
    prs.push_back(p3);
    const double total = p1 + p2 + p3;
    for (double& p : prs) p /= total;
    return {std::move(pts), std::move(prs)};
}

} // namespace detail

/// Bisection for the tangent point. Requires the Lemma hypotheses and that the
/// case-1 inequality f(b) + f'(b)(m - b) >= f(m) fails.
inline TangentPoint tangent_point(const QueueParams& params, Threshold n, double a, double m, double b) {
    require(a >= 0.0 && a < m && m < b, "tangent search needs 0 <= a < m < b");
    if (!detail::social_hypotheses_hold(params, n, a, m, b))
        fail(ErrorKind::HypothesesNotMet, "tangent construction needs m <= 1 and R*mu/C >= n+1");
    const double fm = social_rate(params, n, m);
    if (detail::tangent_residual(params, n, m, b, fm) >= 0.0)
        fail(ErrorKind::PreconditionViolated,
             "f(b) + f'(b)(m - b) >= f(m): the chord to b already majorizes, no tangent search needed");

    double l = m, u = b, mid = 0.5 * (l + u);
    int it = 0;
    for (; it < 200; ++it) {
        mid = 0.5 * (l + u);
        const double g = detail::tangent_residual(params, n, m, mid, fm);
        if (std::abs(g) < 1e-10 || u - l < 1e-12) break;
        if (g < 0.0) u = mid;
        else l = mid;
    }
    TangentPoint t;
    t.rho_t = mid;
    t.f_t = social_rate(params, n, mid);
    t.d0 = 2.0 * (m - a) * (mid - m) / (mid - a);
    t.iterations = it + 1;
    return t;
}

struct MadExtremal {
    DiscreteDistribution distribution;
    Method method = Method::ClosedFormCase1;
    std::optional<TangentPoint> tangent;
};

inline MadExtremal classify_mad_extremal(Objective objective, const QueueParams& params, Threshold n,
                                         const MomentSpec& spec) {
    detail::check_exact(spec);
    const double a = spec.a(), b = spec.b(), m = spec.mean().lo, d = spec.mad().lo;
    if (d == 0.0) return {DiscreteDistribution::point_mass(m), Method::PointMass, std::nullopt};
    const double dbar = max_mad(a, b, m);
    const bool maximal = d >= dbar;
    const double dd = std::min(d, dbar);

    if (objective == Objective::Revenue)
        return {detail::three_point_law(a, m, b, dd, maximal), Method::ClosedFormCase1, std::nullopt};

    if (!detail::social_hypotheses_hold(params, n, a, m, b))
        fail(ErrorKind::HypothesesNotMet, "closed form needs a < m <= 1, m < b and R*mu/C >= n+1");
    const double fm = social_rate(params, n, m);
    if (detail::tangent_residual(params, n, m, b, fm) >= 0.0)
        return {detail::three_point_law(a, m, b, dd, maximal), Method::ClosedFormCase1, std::nullopt};

    const TangentPoint t = tangent_point(params, n, a, m, b);
    if (dd >= t.d0 - 1e-9) {
        const double p1 = dd / (2.0 * (m - a));
        const double x2 = (a * dd + 2.0 * m * (a - m)) / (dd + 2.0 * (a - m));
        return {DiscreteDistribution({a, x2}, {p1, 1.0 - p1}), Method::ClosedFormCase3, t};
    }
    return {detail::three_point_law(a, m, t.rho_t, dd, false), Method::ClosedFormCase2, t};
}

inline DiscreteDistribution extremal_distribution_mad(Objective objective, const QueueParams& params, Threshold n,
                                                      const MomentSpec& spec) {
    return classify_mad_extremal(objective, params, n, spec).distribution;
}

inline WorstCaseResult worst_case_social_mad(const QueueParams& params, Threshold n, const MomentSpec& spec,
                                             const ExchangeOptions& fallback = {}) {
    auto loss = [&](double rho) { return social_rate(params, n, rho); };
    try {
        MadExtremal e = classify_mad_extremal(Objective::Social, params, n, spec);
        WorstCaseResult out;
        out.value = e.distribution.expectation(loss);
        out.extremal = std::move(e.distribution);
        out.method = e.method;
        return out;
    } catch (const Error& err) {
        if (err.kind() != ErrorKind::HypothesesNotMet) throw;
    }
    return solve_exchange(loss, spec, fallback);
}

inline WorstCaseResult worst_case_revenue_mad(const QueueParams& params, Threshold n, const MomentSpec& spec) {
    MadExtremal e = classify_mad_extremal(Objective::Revenue, params, n, spec);
    WorstCaseResult out;
    out.value = e.distribution.expectation([&](double rho) { return revenue_rate(params, n, rho); });
    out.extremal = std::move(e.distribution);
    out.method = e.method;
    return out;
}

inline WorstCaseResult worst_case_mad(Objective objective, const QueueParams& params, Threshold n,
                                      const MomentSpec& spec) {
    return objective == Objective::Social ? worst_case_social_mad(params, n, spec)
                                          : worst_case_revenue_mad(params, n, spec);
}

/// Threshold maximizing the worst-case rate over n = 1..max_n (default n_e).
inline ThresholdSolution optimal_threshold(Objective objective, const QueueParams& params, const MomentSpec& spec,
                                           std::optional<int> max_n = {}) {
    return search_thresholds(
        params, [&](Threshold n) { return worst_case_mad(objective, params, n, spec); }, max_n);
}

} // namespace drq

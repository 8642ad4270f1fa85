#pragma once

// Economics of the observable M/M/1 queue with a join/balk threshold: the
// individual threshold, the social benefit rate f_n and the revenue rate r_n.
//
// Both rates are built from two rational functions of the traffic intensity:
//   h_n(rho) = P(arrival joins)   = sum_{k=1..n} rho^k / sum_{k=0..n} rho^k
//   L_n(rho) = E[number in system] = sum_{k=1..n} k rho^k / sum_{k=0..n} rho^k
// so that f_n = R mu h_n - C L_n and r_n = (R mu - C n) h_n. Written this way
// neither has a removable singularity at rho = 1. For rho > 1 numerator and
// denominator are divided by rho^n and evaluated in u = 1/rho, which keeps every
// term in [0, 1].

#include "drq/error.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace drq {

/// Upper bound on any threshold; rho^n stays representable for every
/// practically relevant queue.
inline constexpr int kMaxThreshold = 64;

class QueueParams {
public:
    QueueParams(double reward, double wait_cost, double service_rate)
        : reward_(reward), wait_cost_(wait_cost), service_rate_(service_rate) {
        require(reward > 0.0 && std::isfinite(reward), "reward R must be positive");
        require(wait_cost > 0.0 && std::isfinite(wait_cost), "waiting cost C must be positive");
        require(service_rate > 0.0 && std::isfinite(service_rate), "service rate mu must be positive");
        require(potential() >= 1.0,
                "R*mu/C = " + std::to_string(potential()) + " < 1: no customer ever joins");
        require(potential() < kMaxThreshold + 1,
                "R*mu/C = " + std::to_string(potential()) + " puts the individual threshold above " +
                    std::to_string(kMaxThreshold));
    }

    double reward() const noexcept { return reward_; }
    double wait_cost() const noexcept { return wait_cost_; }
    double service_rate() const noexcept { return service_rate_; }

    /// R mu / C, the queue length at which joining stops paying off.
    double potential() const noexcept { return reward_ * service_rate_ / wait_cost_; }

private:
    double reward_;
    double wait_cost_;
    double service_rate_;
};

class Threshold {
public:
    explicit Threshold(int n) : n_(n) {
        require(n >= 1 && n <= kMaxThreshold,
                "threshold must lie in [1, " + std::to_string(kMaxThreshold) + "], got " + std::to_string(n));
    }
    int value() const noexcept { return n_; }
    friend bool operator==(Threshold, Threshold) = default;
    friend auto operator<=>(Threshold, Threshold) = default;

private:
    int n_;
};

enum class Objective { Social, Revenue };

inline const char* to_string(Objective objective) {
    return objective == Objective::Social ? "social" : "revenue";
}

enum class ShapeClass { ConcaveIncreasing, Unimodal, General };

inline const char* to_string(ShapeClass shape) {
    switch (shape) {
    case ShapeClass::ConcaveIncreasing: return "ConcaveIncreasing";
    case ShapeClass::Unimodal: return "Unimodal";
    case ShapeClass::General: return "General";
    }
    return "General";
}

/// Value together with its first and second derivative.
struct Jet {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

namespace detail {

// Quotient rule carried to second order.
inline Jet ratio(const Jet& num, const Jet& den) {
    const double q = num.value / den.value;
    const double q1 = (num.d1 - q * den.d1) / den.value;
    const double q2 = (num.d2 - 2.0 * q1 * den.d1 - q * den.d2) / den.value;
    return {q, q1, q2};
}

// Jets of S = sum_{k<=n} x^k, its head sum_{k<n} x^k, its tail sum_{1<=k<=n} x^k
// and T = sum_{k<=n} k x^k.
struct PowerSums {
    Jet all;
    Jet head;
    Jet shifted;
    Jet weighted;
};

inline PowerSums power_sums(int n, double x) {
    PowerSums s;
    double p = 1.0;      // x^k
    double p1 = 0.0;     // x^(k-1)
    double p2 = 0.0;     // x^(k-2)
    for (int k = 0; k <= n; ++k) {
        const double dk = static_cast<double>(k);
        const double d1 = dk * p1;
        const double d2 = dk * (dk - 1.0) * p2;
        s.all.value += p;
        s.all.d1 += d1;
        s.all.d2 += d2;
        if (k < n) {
            s.head.value += p;
            s.head.d1 += d1;
            s.head.d2 += d2;
        }
        if (k >= 1) {
            s.shifted.value += p;
            s.shifted.d1 += d1;
            s.shifted.d2 += d2;
        }
        s.weighted.value += dk * p;
        s.weighted.d1 += dk * d1;
        s.weighted.d2 += dk * d2;
        p2 = p1;
        p1 = p;
        p *= x;
    }
    return s;
}

// Maps jets of Phi(u) with u = 1/rho back to jets in rho.
inline Jet from_reciprocal(const Jet& phi, double u) {
    const double u2 = u * u;
    return {phi.value, -phi.d1 * u2, phi.d2 * u2 * u2 + 2.0 * phi.d1 * u2 * u};
}

struct QueueJets {
    Jet join_prob;  // h_n
    Jet occupancy;  // L_n
};

inline QueueJets queue_jets(int n, double rho) {
    if (rho <= 1.0) {
        const PowerSums s = power_sums(n, rho);
        return {ratio(s.shifted, s.all), ratio(s.weighted, s.all)};
    }
    const double u = 1.0 / rho;
    const PowerSums s = power_sums(n, u);
    // h = S_{n-1}(u) / S_n(u),  L = n - T_n(u) / S_n(u)
    const Jet h = ratio(s.head, s.all);
    const Jet t = ratio(s.weighted, s.all);
    const Jet l{static_cast<double>(n) - t.value, -t.d1, -t.d2};
    return {from_reciprocal(h, u), from_reciprocal(l, u)};
}

// Values only; same sums as queue_jets without the derivative bookkeeping.
inline std::pair<double, double> queue_values(int n, double rho) {
    const bool low = rho <= 1.0;
    const double x = low ? rho : 1.0 / rho;
    double p = x, top = x, tail = 0.0, weighted = 0.0;
    for (int k = 1; k <= n; ++k) {
        tail += p;
        weighted += k * p;
        top = p;
        p *= x;
    }
    const double all = 1.0 + tail;
    // h = S_{n-1}(u) / S_n(u) and L = n - T_n(u) / S_n(u) in the reciprocal u = 1/rho
    if (low) return {tail / all, weighted / all};
    return {(all - top) / all, static_cast<double>(n) - weighted / all};
}

inline void check_rho(double rho) {
    require(rho >= 0.0 && std::isfinite(rho), "traffic intensity must be finite and nonnegative");
}

} // namespace detail

/// Naor's individual threshold floor(R mu / C).
inline Threshold individual_threshold(const QueueParams& params) {
    return Threshold(static_cast<int>(std::floor(params.potential())));
}

/// h_n(rho) = rho (1 - rho^n) / (1 - rho^{n+1}) with its derivatives.
inline Jet join_probability_jet(Threshold n, double rho) {
    detail::check_rho(rho);
    return detail::queue_jets(n.value(), rho).join_prob;
}

inline Jet social_rate_jet(const QueueParams& params, Threshold n, double rho) {
    detail::check_rho(rho);
    const auto q = detail::queue_jets(n.value(), rho);
    const double rm = params.reward() * params.service_rate();
    const double c = params.wait_cost();
    return {rm * q.join_prob.value - c * q.occupancy.value,
            rm * q.join_prob.d1 - c * q.occupancy.d1,
            rm * q.join_prob.d2 - c * q.occupancy.d2};
}

inline Jet revenue_rate_jet(const QueueParams& params, Threshold n, double rho) {
    detail::check_rho(rho);
    const Jet h = detail::queue_jets(n.value(), rho).join_prob;
    const double fee = params.reward() * params.service_rate() - params.wait_cost() * n.value();
    return {fee * h.value, fee * h.d1, fee * h.d2};
}

/// Long-run net benefit rate of all customers, f_n(rho).
inline double social_rate(const QueueParams& params, Threshold n, double rho) {
    detail::check_rho(rho);
    const auto [h, l] = detail::queue_values(n.value(), rho);
    return params.reward() * params.service_rate() * h - params.wait_cost() * l;
}

/// Long-run toll income of a revenue maximizer, r_n(rho).
inline double revenue_rate(const QueueParams& params, Threshold n, double rho) {
    detail::check_rho(rho);
    const double fee = params.reward() * params.service_rate() - params.wait_cost() * n.value();
    return fee * detail::queue_values(n.value(), rho).first;
}

inline double rate(Objective objective, const QueueParams& params, Threshold n, double rho) {
    return objective == Objective::Social ? social_rate(params, n, rho) : revenue_rate(params, n, rho);
}

/// (f_n'(rho), f_n''(rho)).
inline std::pair<double, double> social_rate_derivs(const QueueParams& params, Threshold n, double rho) {
    const Jet j = social_rate_jet(params, n, rho);
    return {j.d1, j.d2};
}

/// Shape of f_n on [0, inf): concave increasing for n = 1 and unimodal for
/// n >= 2 whenever R mu / C >= n + 1; nothing is claimed otherwise.
inline ShapeClass classify_shape(const QueueParams& params, Threshold n) {
    if (params.potential() < n.value() + 1.0) return ShapeClass::General;
    return n.value() == 1 ? ShapeClass::ConcaveIncreasing : ShapeClass::Unimodal;
}

} // namespace drq

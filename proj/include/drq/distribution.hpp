#pragma once

// Discrete distributions, moment ambiguity sets and the result record shared
// by every worst-case solver.

#include "drq/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace drq {

using Loss = std::function<double(double)>;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const noexcept { return hi - lo; }
    bool contains(double x, double tol = 0.0) const noexcept { return x >= lo - tol && x <= hi + tol; }
    bool degenerate() const noexcept { return lo == hi; }
};

/// Largest mean absolute deviation of any distribution on [a, b] with mean m.
inline double max_mad(double a, double b, double m) {
    require(a < b, "support needs a < b");
    require(m >= a && m <= b, "mean must lie in the support");
    return 2.0 * (m - a) * (b - m) / (b - a);
}

class DiscreteDistribution {
public:
    DiscreteDistribution() = default;

    /// Weights within 1e-9 of a probability vector are accepted and renormalized;
    /// tiny negative weights (LP round-off) are clipped to zero.
    DiscreteDistribution(std::vector<double> points, std::vector<double> probs)
        : points_(std::move(points)), probs_(std::move(probs)) {
        require(points_.size() == probs_.size(), "points and probabilities differ in length");
        require(!points_.empty(), "a distribution needs at least one point");
        double total = 0.0;
        for (std::size_t i = 0; i < probs_.size(); ++i) {
            require(std::isfinite(points_[i]) && std::isfinite(probs_[i]), "non-finite distribution entry");
            require(probs_[i] >= -1e-9, "negative probability " + std::to_string(probs_[i]));
            probs_[i] = std::max(probs_[i], 0.0);
            total += probs_[i];
        }
        require(std::abs(total - 1.0) <= 1e-9, "probabilities sum to " + std::to_string(total));
        for (double& p : probs_) p /= total;
    }

    static DiscreteDistribution point_mass(double x) { return {{x}, {1.0}}; }

    static DiscreteDistribution uniform(std::vector<double> points) {
        const double w = 1.0 / static_cast<double>(points.size());
        std::vector<double> probs(points.size(), w);
        return {std::move(points), std::move(probs)};
    }

    const std::vector<double>& points() const noexcept { return points_; }
    const std::vector<double>& probs() const noexcept { return probs_; }
    std::size_t size() const noexcept { return points_.size(); }

    double expectation(const Loss& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i)
            if (probs_[i] > 0.0) s += probs_[i] * f(points_[i]);
        return s;
    }

    double mean() const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += probs_[i] * points_[i];
        return s;
    }

    /// E|X - center|.
    double mad(double center) const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += probs_[i] * std::abs(points_[i] - center);
        return s;
    }

    /// Sorted by location, duplicates within `merge_tol` merged and points with
    /// mass at most `mass_tol` dropped.
    DiscreteDistribution compacted(double mass_tol = 0.0, double merge_tol = 1e-12) const {
        std::vector<std::size_t> order(size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](auto i, auto j) { return points_[i] < points_[j]; });
        std::vector<double> pts, prs;
        for (auto i : order) {
            if (!pts.empty() && points_[i] - pts.back() <= merge_tol) {
                prs.back() += probs_[i];
            } else {
                pts.push_back(points_[i]);
                prs.push_back(probs_[i]);
            }
        }
        std::vector<double> keep_p, keep_w;
        double dropped = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (prs[i] > mass_tol) {
                keep_p.push_back(pts[i]);
                keep_w.push_back(prs[i]);
            } else {
                dropped += prs[i];
            }
        }
        if (keep_p.empty()) return *this;
        const double scale = 1.0 / (1.0 - dropped);
        for (double& w : keep_w) w *= scale;
        return {std::move(keep_p), std::move(keep_w)};
    }

private:
    std::vector<double> points_;
    std::vector<double> probs_;
};

/// Distributions on [a, b] whose mean lies in `mean` and whose mean absolute
/// deviation about `anchor` lies in `mad`. Exact moments are degenerate
/// intervals with the anchor at the mean.
///
/// Construction checks structure only. Whether the moments are attainable on
/// the support (d <= 2(m-a)(b-m)/(b-a) in the exact case) is left to the
/// solvers, which report Infeasible.
class MomentSpec {
public:
    static MomentSpec exact(double a, double b, double mean, double mad) {
        return MomentSpec(a, b, {mean, mean}, {mad, mad}, mean, true);
    }

    static MomentSpec interval(double a, double b, Interval mean, Interval mad, double anchor) {
        return MomentSpec(a, b, mean, mad, anchor, false);
    }

    double a() const noexcept { return a_; }
    double b() const noexcept { return b_; }
    const Interval& mean() const noexcept { return mean_; }
    const Interval& mad() const noexcept { return mad_; }
    double anchor() const noexcept { return anchor_; }
    bool is_exact() const noexcept { return exact_; }

    /// Largest deviation any feasible distribution could have given the mean range.
    double mad_cap() const {
        const double mid = std::clamp(0.5 * (a_ + b_), mean_.lo, mean_.hi);
        return max_mad(a_, b_, mid);
    }

    bool satisfied_by(const DiscreteDistribution& p, double tol) const {
        for (double x : p.points())
            if (x < a_ - tol || x > b_ + tol) return false;
        return mean_.contains(p.mean(), tol) && mad_.contains(p.mad(anchor_), tol);
    }

private:
    MomentSpec(double a, double b, Interval mean, Interval mad, double anchor, bool exact)
        : a_(a), b_(b), mean_(mean), mad_(mad), anchor_(anchor), exact_(exact) {
        require(std::isfinite(a) && std::isfinite(b) && a < b, "support needs finite a < b");
        require(a >= 0.0, "traffic intensity support must be nonnegative");
        require(mean.lo <= mean.hi && mad.lo <= mad.hi, "moment intervals must be ordered");
        require(mean.lo >= a && mean.hi <= b, "mean must lie in the support");
        require(mad.lo >= 0.0, "mean absolute deviation must be nonnegative");
        require(std::isfinite(mad.hi), "mean absolute deviation must be finite");
        require(anchor >= a && anchor <= b, "anchor must lie in the support");
    }

    double a_;
    double b_;
    Interval mean_;
    Interval mad_;
    double anchor_;
    bool exact_;
};

enum class Method {
    ClosedFormCase1,
    ClosedFormCase2,
    ClosedFormCase3,
    PointMass,
    Exchange,
    LinearProgram,
    GridOracle,
    ThreePointSearch,
    Enumeration,
};

inline const char* to_string(Method method) {
    switch (method) {
    case Method::ClosedFormCase1: return "closed-form-case1";
    case Method::ClosedFormCase2: return "closed-form-case2";
    case Method::ClosedFormCase3: return "closed-form-case3";
    case Method::PointMass: return "point-mass";
    case Method::Exchange: return "exchange";
    case Method::LinearProgram: return "linear-program";
    case Method::GridOracle: return "grid-oracle";
    case Method::ThreePointSearch: return "three-point-search";
    case Method::Enumeration: return "enumeration";
    }
    return "unknown";
}

struct DualCertificate {
    std::vector<std::pair<std::string, double>> variables;
    std::vector<double> active_points;
    /// min over the support of (loss - majorant) found by the last scan.
    double min_slack = 0.0;

    std::optional<double> get(const std::string& name) const {
        for (const auto& [k, v] : variables)
            if (k == name) return v;
        return std::nullopt;
    }
};

struct WorstCaseResult {
    double value = 0.0;
    DiscreteDistribution extremal;
    std::optional<DualCertificate> certificate;
    /// Upper bound minus certified lower bound; zero for closed forms.
    double gap = 0.0;
    std::size_t iterations = 0;
    Method method = Method::Exchange;
    std::vector<std::string> warnings;
};

} // namespace drq

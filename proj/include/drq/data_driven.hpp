#pragma once

// Sample-based MAD ambiguity: empirical moments, Hoeffding-type confidence
// intervals for the mean and MAD, and worst-case rates over the resulting
// interval moment set (anchored at the empirical mean).

#include "drq/distribution.hpp"
#include "drq/error.hpp"
#include "drq/lp.hpp"
#include "drq/mad_closed_form.hpp"
#include "drq/queue_econ.hpp"
#include "drq/semi_infinite.hpp"
#include "drq/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace drq {

class SampleSet {
public:
    SampleSet(std::vector<double> values, Interval support, std::string source = {})
        : values_(std::move(values)), support_(support), source_(std::move(source)) {
        require(!values_.empty(), "sample set is empty");
        require(support_.lo < support_.hi, "support needs a < b");
        for (double v : values_)
            require(std::isfinite(v) && support_.contains(v),
                    "sample " + std::to_string(v) + " outside the support [" + std::to_string(support_.lo) + ", " +
                        std::to_string(support_.hi) + "]");
    }

    const std::vector<double>& values() const noexcept { return values_; }
    const Interval& support() const noexcept { return support_; }
    const std::string& source() const noexcept { return source_; }
    std::size_t size() const noexcept { return values_.size(); }
    double a() const noexcept { return support_.lo; }
    double b() const noexcept { return support_.hi; }

private:
    std::vector<double> values_;
    Interval support_;
    std::string source_;
};

struct EmpiricalMoments {
    double mean = 0.0;
    double mad = 0.0;
};

inline EmpiricalMoments empirical_moments(const std::vector<double>& values) {
    require(!values.empty(), "sample set is empty");
    double s = 0.0;
    for (double v : values) s += v;
    const double m = s / static_cast<double>(values.size());
    double d = 0.0;
    for (double v : values) d += std::abs(v - m);
    return {m, d / static_cast<double>(values.size())};
}

inline EmpiricalMoments empirical_moments(const SampleSet& samples) { return empirical_moments(samples.values()); }

struct ConfidenceIntervals {
    Interval mean;
    Interval mad;
    /// Empirical moments the intervals are centred on; the MAD anchor.
    EmpiricalMoments center;
    double delta = 0.0;
    double mean_half_width = 0.0;
    double mad_half_width = 0.0;
    bool clipped = false;

    MomentSpec spec(double a, double b) const { return MomentSpec::interval(a, b, mean, mad, center.mean); }
};

/// (b - a) sqrt(log(4/delta) / (2N)), the mean half-width; the MAD one is three times it.
inline double hoeffding_half_width(double width, std::size_t n, double delta) {
    require(delta > 0.0 && delta < 1.0, "confidence parameter must lie in (0, 1)");
    require(n >= 1, "need at least one sample");
    return width * std::sqrt(std::log(4.0 / delta) / (2.0 * static_cast<double>(n)));
}

/// m-hat +- mean_hw and d-hat +- mad_hw, clipped to [a, b] and to
/// [0, max MAD over the mean interval].
inline ConfidenceIntervals intervals_with_half_widths(const SampleSet& samples, double mean_hw, double mad_hw) {
    require(mean_hw >= 0.0 && mad_hw >= 0.0 && std::isfinite(mean_hw) && std::isfinite(mad_hw),
            "half-widths must be finite and nonnegative");
    ConfidenceIntervals ci;
    ci.center = empirical_moments(samples);
    ci.mean_half_width = mean_hw;
    ci.mad_half_width = mad_hw;
    const double a = samples.a(), b = samples.b();
    const Interval raw_mean{ci.center.mean - mean_hw, ci.center.mean + mean_hw};
    ci.mean = {std::max(raw_mean.lo, a), std::min(raw_mean.hi, b)};
    if (ci.mean.lo > ci.mean.hi) fail(ErrorKind::DegenerateInterval, "mean interval is empty after clipping");
    const double mid = std::clamp(0.5 * (a + b), ci.mean.lo, ci.mean.hi);
    const double cap = max_mad(a, b, mid);
    const Interval raw_mad{ci.center.mad - mad_hw, ci.center.mad + mad_hw};
    ci.mad = {std::max(raw_mad.lo, 0.0), std::min(raw_mad.hi, cap)};
    if (ci.mad.lo > ci.mad.hi) fail(ErrorKind::DegenerateInterval, "MAD interval is empty after clipping");
    ci.clipped = ci.mean.lo != raw_mean.lo || ci.mean.hi != raw_mean.hi || ci.mad.lo != raw_mad.lo ||
                 ci.mad.hi != raw_mad.hi;
    return ci;
}

inline ConfidenceIntervals confidence_intervals(const SampleSet& samples, double delta) {
    const double hw = hoeffding_half_width(samples.b() - samples.a(), samples.size(), delta);
    ConfidenceIntervals ci = intervals_with_half_widths(samples, hw, 3.0 * hw);
    ci.delta = delta;
    return ci;
}

namespace detail {

// max  gamma + theta1 d_l - theta2 d_u + theta3 m_l - theta4 m_u
// s.t. (theta1 - theta2)|rho - c| + (theta3 - theta4) rho + gamma <= r(rho)
//      at rho in {a, c, b}, theta >= 0.
// Concavity of r makes these three constraints equivalent to the full family.
inline WorstCaseResult revenue_interval_lp(const Loss& loss, const MomentSpec& spec) {
    const double c = spec.anchor();
    std::vector<double> pts{spec.a()};
    if (c > spec.a() && c < spec.b()) pts.push_back(c);
    pts.push_back(spec.b());

    lp::Problem p;
    // minimize the negated objective
    p.add_variable(-spec.mad().lo);   // theta1
    p.add_variable(spec.mad().hi);    // theta2
    p.add_variable(-spec.mean().lo);  // theta3
    p.add_variable(spec.mean().hi);   // theta4
    p.add_variable(-1.0, lp::VarKind::Free);
    for (double x : pts) {
        const double dev = std::abs(x - c);
        p.add_row({{0, dev}, {1, -dev}, {2, x}, {3, -x}, {4, 1.0}}, lp::Sense::LessEqual, loss(x));
    }
    const auto sol = lp::solve(p);
    if (sol.status == lp::Status::Unbounded)
        fail(ErrorKind::Infeasible, "moment intervals admit no distribution on the support");
    if (!sol.optimal()) fail(ErrorKind::IterationLimit, std::string("revenue LP: ") + lp::to_string(sol.status));

    WorstCaseResult out;
    out.value = 0.0 - sol.value;  // no -0 in output
    out.method = Method::LinearProgram;
    std::vector<double> probs;
    for (double y : sol.duals) probs.push_back(-y);
    out.extremal = DiscreteDistribution(pts, probs).compacted(1e-12);
    DualCertificate cert;
    cert.variables = {{"theta1", sol.x[0]}, {"theta2", sol.x[1]}, {"theta3", sol.x[2]}, {"theta4", sol.x[3]},
                      {"gamma", sol.x[4]}};
    cert.active_points = out.extremal.points();
    out.certificate = std::move(cert);
    out.iterations = 1;
    return out;
}

} // namespace detail

/// Worst case over the interval moment set `spec` (anchor = empirical mean).
inline WorstCaseResult worst_case_dd(Objective objective, const QueueParams& params, Threshold n,
                                     const MomentSpec& spec, const ExchangeOptions& opt = {}) {
    if (objective == Objective::Revenue)
        return detail::revenue_interval_lp([&](double x) { return revenue_rate(params, n, x); }, spec);
    return solve_exchange([&](double x) { return social_rate(params, n, x); }, spec, opt);
}

inline ThresholdSolution dd_threshold(Objective objective, const QueueParams& params, const MomentSpec& spec,
                                      std::optional<int> max_n = {}) {
    return search_thresholds(
        params, [&](Threshold n) { return worst_case_dd(objective, params, n, spec); }, max_n);
}

inline ThresholdSolution dd_threshold(Objective objective, const QueueParams& params, const SampleSet& samples,
                                      double delta, std::optional<int> max_n = {}) {
    const ConfidenceIntervals ci = confidence_intervals(samples, delta);
    return dd_threshold(objective, params, ci.spec(samples.a(), samples.b()), max_n);
}

/// One value per line; blank lines and lines starting with '#' are skipped.
inline SampleSet parse_samples(std::istream& in, Interval support, const std::string& source = "<stream>") {
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        double v;
        std::string rest;
        if (!(ss >> v) || (ss >> rest && rest[0] != '#'))
            fail(ErrorKind::InvalidArgument, source + ":" + std::to_string(lineno) + ": not a number: " + line);
        values.push_back(v);
    }
    if (values.empty()) fail(ErrorKind::InvalidArgument, source + ": no samples");
    return SampleSet(std::move(values), support, source);
}

inline SampleSet read_samples(const std::string& path, Interval support) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::InvalidArgument, "cannot open sample file " + path);
    return parse_samples(in, support, path);
}

} // namespace drq

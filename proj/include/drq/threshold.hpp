#pragma once

// Enumeration of candidate thresholds shared by every model.

#include "drq/distribution.hpp"
#include "drq/error.hpp"
#include "drq/queue_econ.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace drq {

struct ThresholdSolution {
    int n_hat = 1;
    int n_e = 1;
    /// values[k] and methods[k] belong to threshold k + 1.
    std::vector<double> values;
    std::vector<Method> methods;

    double best_value() const { return values.at(static_cast<std::size_t>(n_hat - 1)); }
};

/// Index of the largest value, preferring the smallest threshold among ties.
/// Values closer than 1e-12 (relative) count as tied so that round-off cannot
/// push the choice to a larger threshold.
inline int smallest_maximizer(const std::vector<double>& values) {
    require(!values.empty(), "no candidate thresholds");
    std::size_t best = 0;
    for (std::size_t k = 1; k < values.size(); ++k)
        if (values[k] > values[best] + 1e-12 * std::max(1.0, std::abs(values[best]))) best = k;
    return static_cast<int>(best) + 1;
}

/// Evaluates `solve(Threshold(n))` for n = 1..max_n (default n_e) and picks the
/// smallest maximizer. Failures are rethrown with the threshold attached.
template <class Solve>
ThresholdSolution search_thresholds(const QueueParams& params, Solve&& solve, std::optional<int> max_n = {}) {
    ThresholdSolution out;
    out.n_e = individual_threshold(params).value();
    const int upper = max_n.value_or(out.n_e);
    require(upper >= 1 && upper <= kMaxThreshold, "threshold search range must lie in [1, " +
                                                      std::to_string(kMaxThreshold) + "]");
    for (int n = 1; n <= upper; ++n) {
        try {
            const WorstCaseResult r = solve(Threshold(n));
            out.values.push_back(r.value);
            out.methods.push_back(r.method);
        } catch (const Error& e) {
            throw Error(e.kind(), "threshold n=" + std::to_string(n) + ": " + e.what());
        }
    }
    out.n_hat = smallest_maximizer(out.values);
    return out;
}

} // namespace drq

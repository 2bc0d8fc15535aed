#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "survrf/util.hpp"

namespace survrf {

/// Right-continuous piecewise-constant function over time. Value on
/// [0, times[0]) is initial_value; on [times[k], times[k+1]) it is values[k].
struct StepFunction {
    std::vector<double> times;   // strictly increasing
    std::vector<double> values;  // same length as times
    double initial_value = 0.0;

    double operator()(double t) const {
        auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return initial_value;
        return values[static_cast<std::size_t>(it - times.begin()) - 1];
    }

    /// Left limit: value just before t.
    double left_limit(double t) const {
        auto it = std::lower_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return initial_value;
        return values[static_cast<std::size_t>(it - times.begin()) - 1];
    }

    bool operator==(const StepFunction&) const = default;
};

/// Sorted union of the jump times of a set of step functions.
inline std::vector<double> union_jump_times(std::span<const StepFunction> fns) {
    std::vector<double> all;
    for (const auto& f : fns) all.insert(all.end(), f.times.begin(), f.times.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

/// Exact pointwise average, represented on the union of all jump times.
/// Summation runs in input order so the result is identical at any
/// parallelism level.
inline StepFunction average_step_functions(std::span<const StepFunction> fns) {
    require(!fns.empty(), "average of zero step functions");
    StepFunction out;
    out.times = union_jump_times(fns);
    out.values.assign(out.times.size(), 0.0);
    double init = 0.0;
    for (const auto& f : fns) {
        init += f.initial_value;
        for (std::size_t k = 0; k < out.times.size(); ++k) out.values[k] += f(out.times[k]);
    }
    const double inv = 1.0 / static_cast<double>(fns.size());
    out.initial_value = init * inv;
    for (auto& v : out.values) v *= inv;
    return out;
}

/// Weighted sum of single-jump survival steps: each component is 1 before its
/// jump time and 0 after. Duplicate jump times are merged.
inline StepFunction weighted_step_mixture(std::vector<double> jump_times,
                                          std::vector<double> weights) {
    require(jump_times.size() == weights.size(), "mixture size mismatch");
    std::vector<std::size_t> order(jump_times.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return jump_times[a] < jump_times[b]; });

    StepFunction out;
    double total = 0.0;
    for (double w : weights) total += w;
    out.initial_value = total;
    double remaining = total;
    std::size_t i = 0;
    while (i < order.size()) {
        double t = jump_times[order[i]];
        while (i < order.size() && jump_times[order[i]] == t) {
            remaining -= weights[order[i]];
            ++i;
        }
        out.times.push_back(t);
        out.values.push_back(remaining);
    }
    return out;
}

}  // namespace survrf

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "survrf/step_function.hpp"
#include "survrf/util.hpp"

namespace survrf {

/// Event-time table for one node: distinct event times, event counts d_l and
/// at-risk counts Y_l. Individuals censored at an event time are still at
/// risk at that time (censoring ordered after events).
struct RiskTable {
    std::vector<double> event_times;  // strictly increasing
    std::vector<std::uint32_t> events;
    std::vector<std::uint32_t> at_risk;

    std::uint64_t total_events() const {
        return std::accumulate(events.begin(), events.end(), std::uint64_t{0});
    }

    bool operator==(const RiskTable&) const = default;
};

inline RiskTable build_risk_table(std::span<const double> times,
                                  std::span<const std::uint8_t> statuses) {
    require(times.size() == statuses.size(), "times/status length mismatch");
    require(!times.empty(), "risk table of empty sample");

    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    RiskTable rt;
    std::uint32_t at_risk = static_cast<std::uint32_t>(times.size());
    std::size_t i = 0;
    while (i < order.size()) {
        double t = times[order[i]];
        std::uint32_t d = 0;
        std::uint32_t removed = 0;
        while (i < order.size() && times[order[i]] == t) {
            d += statuses[order[i]];
            ++removed;
            ++i;
        }
        if (d > 0) {
            rt.event_times.push_back(t);
            rt.events.push_back(d);
            rt.at_risk.push_back(at_risk);
        }
        at_risk -= removed;
    }
    return rt;
}

/// Nelson-Aalen cumulative hazard: running sum of d_l / Y_l over event times.
inline StepFunction nelson_aalen(const RiskTable& rt) {
    StepFunction chf;
    chf.initial_value = 0.0;
    chf.times = rt.event_times;
    chf.values.reserve(rt.event_times.size());
    double cum = 0.0;
    for (std::size_t l = 0; l < rt.event_times.size(); ++l) {
        // Y > 0 by construction; a zero-risk time would contribute nothing
        cum += static_cast<double>(rt.events[l]) / static_cast<double>(rt.at_risk[l]);
        chf.values.push_back(cum);
    }
    return chf;
}

/// Kaplan-Meier product-limit survival: running product of (1 - d_l / Y_l).
inline StepFunction kaplan_meier(const RiskTable& rt) {
    StepFunction surv;
    surv.initial_value = 1.0;
    surv.times = rt.event_times;
    surv.values.reserve(rt.event_times.size());
    double prod = 1.0;
    for (std::size_t l = 0; l < rt.event_times.size(); ++l) {
        prod *= 1.0 - static_cast<double>(rt.events[l]) / static_cast<double>(rt.at_risk[l]);
        surv.values.push_back(prod);
    }
    return surv;
}

/// Standardized two-sample log-rank statistic |O - E| / sqrt(V) over the
/// pooled distinct event times, with the hypergeometric variance
/// V_l = d_l (Y_l,left / Y_l)(1 - Y_l,left / Y_l)(Y_l - d_l)/(Y_l - 1).
/// Times with Y_l <= 1 contribute no variance. Returns 0 when the total
/// variance is 0 and nullopt when either side is empty (inadmissible split).
inline std::optional<double> logrank_statistic(std::span<const double> left_times,
                                               std::span<const std::uint8_t> left_statuses,
                                               std::span<const double> right_times,
                                               std::span<const std::uint8_t> right_statuses) {
    require(left_times.size() == left_statuses.size(), "times/status length mismatch");
    require(right_times.size() == right_statuses.size(), "times/status length mismatch");
    if (left_times.empty() || right_times.empty()) return std::nullopt;

    struct Row {
        double time;
        std::uint8_t status;
        std::uint8_t left;
    };
    std::vector<Row> rows;
    rows.reserve(left_times.size() + right_times.size());
    for (std::size_t i = 0; i < left_times.size(); ++i)
        rows.push_back({left_times[i], left_statuses[i], 1});
    for (std::size_t i = 0; i < right_times.size(); ++i)
        rows.push_back({right_times[i], right_statuses[i], 0});
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.time < b.time; });

    double num = 0.0;
    double var_sum = 0.0;
    std::uint64_t y_total = rows.size();
    std::uint64_t y_left = left_times.size();
    std::size_t i = 0;
    while (i < rows.size()) {
        double t = rows[i].time;
        std::uint32_t d = 0, d_left = 0, removed = 0, removed_left = 0;
        while (i < rows.size() && rows[i].time == t) {
            if (rows[i].status) {
                ++d;
                d_left += rows[i].left;
            }
            ++removed;
            removed_left += rows[i].left;
            ++i;
        }
        if (d > 0) {
            double frac = static_cast<double>(y_left) / static_cast<double>(y_total);
            num += static_cast<double>(d_left) - frac * static_cast<double>(d);
            if (y_total > 1) {
                var_sum += static_cast<double>(d) * frac * (1.0 - frac) *
                           static_cast<double>(y_total - d) / static_cast<double>(y_total - 1);
            }
        }
        y_total -= removed;
        y_left -= removed_left;
    }
    if (var_sum <= 0.0) return 0.0;
    return std::abs(num) / std::sqrt(var_sum);
}

}  // namespace survrf

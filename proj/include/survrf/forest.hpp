#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "survrf/data.hpp"
#include "survrf/tree.hpp"
#include "survrf/util.hpp"

namespace survrf {

struct ForestParams {
    std::uint32_t n_trees = 250;
    TreeParams tree;
    std::uint64_t seed = 1;
    std::uint32_t n_threads = 0;          // 0 = hardware concurrency
    std::uint32_t bootstrap_retries = 100;  // redraws allowed for event-poor samples
};

/// Fitted ensemble. Immutable after fit; predictions are read-only and can
/// run from any number of threads.
struct Forest {
    ForestParams params;
    FactorSchema schema;
    std::vector<SurvivalTree> trees;
    std::vector<std::vector<std::uint32_t>> inbag;  // bootstrap multiplicity per tree, per case

    std::size_t n_trees() const { return trees.size(); }
    std::size_t n_cases() const { return inbag.empty() ? 0 : inbag[0].size(); }
    bool is_oob(std::size_t tree, std::size_t case_id) const { return inbag[tree][case_id] == 0; }
};

/// Grows B trees on independent bootstrap samples. Each tree owns an rng
/// stream derived from (seed, tree index), so the result is bit-identical
/// for any thread count.
inline Forest fit(const Dataset& data, const ForestParams& params) {
    require(!data.has_pending(), "discretize numeric columns before fitting");
    require(params.n_trees >= 1, "need at least one tree");
    require(data.n_events() >= params.tree.d0, "dataset has fewer than d0 events");

    const std::size_t n = data.n_cases();
    Forest forest;
    forest.params = params;
    forest.schema = data.schema();
    forest.trees.resize(params.n_trees);
    forest.inbag.assign(params.n_trees, {});

    parallel_for(params.n_trees, params.n_threads, [&](std::size_t b) {
        Rng rng(derive_seed(params.seed, b));
        std::vector<std::uint32_t> sample(n);
        std::vector<std::uint32_t> counts;
        for (std::uint32_t attempt = 0;; ++attempt) {
            counts.assign(n, 0);
            std::uint64_t events = 0;
            for (std::size_t i = 0; i < n; ++i) {
                std::uint32_t c = static_cast<std::uint32_t>(rng.uniform_below(n));
                sample[i] = c;
                ++counts[c];
                events += data.status(c);
            }
            if (events >= params.tree.d0) break;
            require(attempt < params.bootstrap_retries,
                    "bootstrap retries exhausted: samples keep missing d0 events");
        }
        forest.inbag[b] = std::move(counts);
        forest.trees[b] = grow_tree(data, sample, params.tree, rng);
    });
    return forest;
}

namespace detail {

/// Exact pointwise average of step functions, on the union of jump times.
inline StepFunction average_steps(std::span<const StepFunction* const> fns) {
    require(!fns.empty(), "average of zero step functions");
    std::vector<double> all;
    for (const auto* f : fns) all.insert(all.end(), f->times.begin(), f->times.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    StepFunction out;
    out.times = std::move(all);
    out.values.assign(out.times.size(), 0.0);
    double init = 0.0;
    for (const auto* f : fns) {
        init += f->initial_value;
        for (std::size_t k = 0; k < out.times.size(); ++k) out.values[k] += (*f)(out.times[k]);
    }
    const double inv = 1.0 / static_cast<double>(fns.size());
    out.initial_value = init * inv;
    for (auto& v : out.values) v *= inv;
    return out;
}

}  // namespace detail

/// Ensemble survival and cumulative hazard at a feature vector: the exact
/// tree-wise average, represented on the union of the trees' jump times.
inline std::pair<StepFunction, StepFunction> predict_ensemble(const Forest& forest,
                                                              std::span<const std::uint32_t> x) {
    validate_features(forest.schema, x);
    std::vector<const StepFunction*> surv, chf;
    surv.reserve(forest.n_trees());
    chf.reserve(forest.n_trees());
    for (const auto& tree : forest.trees) {
        const TreeNode& node = tree.nodes[tree.descend(x)];
        surv.push_back(&node.survival);
        chf.push_back(&node.chf);
    }
    return {detail::average_steps(surv), detail::average_steps(chf)};
}

/// True when case i was out of bag for at least one tree.
inline bool has_oob_prediction(const Forest& forest, std::size_t case_id) {
    for (std::size_t b = 0; b < forest.n_trees(); ++b)
        if (forest.is_oob(b, case_id)) return true;
    return false;
}

/// Out-of-bag prediction for a training case: the average over only the
/// trees whose bootstrap sample missed it.
inline std::pair<StepFunction, StepFunction> predict_oob(const Forest& forest, const Dataset& data,
                                                         std::size_t case_id) {
    std::vector<std::uint32_t> x;
    x.reserve(data.n_variables());
    for (std::size_t j = 0; j < data.n_variables(); ++j)
        x.push_back(data.code(j, case_id));

    std::vector<const StepFunction*> surv, chf;
    for (std::size_t b = 0; b < forest.n_trees(); ++b) {
        if (!forest.is_oob(b, case_id)) continue;
        const auto& tree = forest.trees[b];
        const TreeNode& node = tree.nodes[tree.descend(x)];
        surv.push_back(&node.survival);
        chf.push_back(&node.chf);
    }
    require(!surv.empty(),
            "case " + std::to_string(case_id) + " is in-bag for every tree: no OOB prediction");
    return {detail::average_steps(surv), detail::average_steps(chf)};
}

/// One minus Harrell's concordance over permissible pairs: (i, j) with
/// T_i < T_j and an event for i, both with usable predictions. Higher
/// mortality on the shorter-lived case counts as concordant; mortality ties
/// count one half.
inline double harrell_error(std::span<const double> mortality, std::span<const double> times,
                            std::span<const std::uint8_t> statuses,
                            std::span<const std::uint8_t> usable) {
    const std::size_t n = times.size();
    require(mortality.size() == n && statuses.size() == n && usable.size() == n,
            "harrell_error input length mismatch");
    double concordant = 0.0;
    std::uint64_t permissible = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!usable[i] || !statuses[i]) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (!usable[j] || times[i] >= times[j]) continue;
            ++permissible;
            if (mortality[i] > mortality[j])
                concordant += 1.0;
            else if (mortality[i] == mortality[j])
                concordant += 0.5;
        }
    }
    require(permissible > 0, "no permissible pairs for concordance");
    return 1.0 - concordant / static_cast<double>(permissible);
}

namespace detail {

/// Per-terminal-node mortality contribution: the node CHF summed over a
/// fixed grid of evaluation times. Ensemble mortality for a case is then the
/// mean of its terminal nodes' contributions, by linearity of the sum.
struct TerminalMortality {
    std::vector<std::vector<double>> contrib;  // [tree][node], 0 for internal nodes

    TerminalMortality(const Forest& forest, std::span<const double> grid) {
        contrib.resize(forest.n_trees());
        for (std::size_t b = 0; b < forest.n_trees(); ++b) {
            const auto& nodes = forest.trees[b].nodes;
            contrib[b].assign(nodes.size(), 0.0);
            for (std::size_t id = 0; id < nodes.size(); ++id) {
                if (!nodes[id].terminal()) continue;
                double sum = 0.0;
                // merge walk: both the grid and the CHF times are ascending
                const StepFunction& chf = nodes[id].chf;
                std::size_t k = 0;
                double cur = chf.initial_value;
                for (double t : grid) {
                    while (k < chf.times.size() && chf.times[k] <= t) cur = chf.values[k++];
                    sum += cur;
                }
                contrib[b][id] = sum;
            }
        }
    }
};

/// Row-major feature matrix for fast per-case descents.
struct FeatureMatrix {
    std::size_t d = 0;
    std::vector<std::uint32_t> rows;

    explicit FeatureMatrix(const Dataset& data) : d(data.n_variables()) {
        rows.resize(data.n_cases() * d);
        for (std::size_t j = 0; j < d; ++j) {
            auto col = data.codes(j);
            for (std::size_t i = 0; i < col.size(); ++i) rows[i * d + j] = col[i];
        }
    }

    std::span<const std::uint32_t> row(std::size_t i) const { return {rows.data() + i * d, d}; }
};

}  // namespace detail

/// Ensemble mortality of every training case under OOB prediction: the OOB
/// ensemble CHF summed over the dataset's distinct event times. Cases in-bag
/// everywhere get usable[i] = 0.
inline void oob_mortality(const Forest& forest, const Dataset& data,
                          std::vector<double>& mortality, std::vector<std::uint8_t>& usable) {
    std::vector<double> grid = data.distinct_event_times();
    detail::TerminalMortality table(forest, grid);
    detail::FeatureMatrix features(data);

    const std::size_t n = data.n_cases();
    mortality.assign(n, 0.0);
    usable.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        std::uint32_t count = 0;
        for (std::size_t b = 0; b < forest.n_trees(); ++b) {
            if (!forest.is_oob(b, i)) continue;
            const auto& tree = forest.trees[b];
            sum += table.contrib[b][tree.descend(features.row(i))];
            ++count;
        }
        if (count > 0) {
            mortality[i] = sum / static_cast<double>(count);
            usable[i] = 1;
        }
    }
}

/// Out-of-bag prediction error: one minus Harrell's concordance on OOB
/// ensemble mortality.
inline double oob_error(const Forest& forest, const Dataset& data) {
    std::vector<double> mortality;
    std::vector<std::uint8_t> usable;
    oob_mortality(forest, data, mortality, usable);
    return harrell_error(mortality, data.times(), data.statuses(), usable);
}

}  // namespace survrf

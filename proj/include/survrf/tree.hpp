#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "survrf/data.hpp"
#include "survrf/estimators.hpp"
#include "survrf/factor_split.hpp"
#include "survrf/rng.hpp"
#include "survrf/step_function.hpp"

namespace survrf {

struct TreeParams {
    std::uint32_t mtry = 0;    // candidate variables per node; 0 = ceil(sqrt(d))
    std::uint32_t nsplit = 0;  // 0 = deterministic enumeration (factors up to 32 labels)
    std::uint32_t d0 = 1;      // minimum events per terminal node
    std::uint64_t seed = 0;
};

inline constexpr std::uint32_t kNoVariable = static_cast<std::uint32_t>(-1);

struct TreeNode {
    // internal nodes
    std::uint32_t variable = kNoVariable;
    ComplementaryPair split;
    double split_stat = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    // terminal nodes
    RiskTable risk;
    StepFunction survival;
    StepFunction chf;
    std::vector<std::uint32_t> cases;  // growing-sample case ids, with multiplicity

    bool terminal() const { return variable == kNoVariable; }
};

/// Binary survival tree in preorder storage (a node precedes its left
/// subtree, which precedes its right subtree).
struct SurvivalTree {
    std::vector<TreeNode> nodes;

    std::size_t n_terminal() const {
        std::size_t n = 0;
        for (const auto& node : nodes) n += node.terminal();
        return n;
    }

    /// Routes a feature vector to its terminal node. Labels beyond a split's
    /// training label range carry no bit and fall to the right daughter.
    std::uint32_t descend(std::span<const std::uint32_t> x) const {
        std::uint32_t id = 0;
        while (!nodes[id].terminal()) {
            const TreeNode& node = nodes[id];
            id = node.split.left(x[node.variable]) ? node.left : node.right;
        }
        return id;
    }
};

/// Terminal-node Kaplan-Meier and Nelson-Aalen estimators for a feature vector.
inline std::pair<const StepFunction&, const StepFunction&> predict_tree(
    const SurvivalTree& tree, std::span<const std::uint32_t> x) {
    const TreeNode& node = tree.nodes[tree.descend(x)];
    return {node.survival, node.chf};
}

inline void validate_features(const FactorSchema& schema, std::span<const std::uint32_t> x) {
    require(x.size() == schema.size(), "feature vector has wrong length");
    for (std::size_t j = 0; j < schema.size(); ++j)
        require(x[j] < schema.variables[j].label_count(),
                "label index out of range for variable " + schema.variables[j].name);
}

inline std::pair<const StepFunction&, const StepFunction&> predict_tree(
    const SurvivalTree& tree, const FactorSchema& schema, std::span<const std::uint32_t> x) {
    validate_features(schema, x);
    return predict_tree(tree, x);
}

namespace detail {

struct GrowContext {
    const Dataset& data;
    TreeParams params;
    Rng& rng;
    SurvivalTree& tree;

    // scratch, reused across nodes
    std::vector<std::uint32_t> sorted_order;
    std::vector<double> sorted_times;
    std::vector<std::uint8_t> sorted_status;
    std::vector<std::uint32_t> sorted_codes;
    std::vector<std::uint8_t> sorted_side;
    std::vector<std::uint32_t> avail_vars;
};

inline void make_terminal(GrowContext& ctx, std::uint32_t node_id,
                          std::vector<std::uint32_t>&& cases) {
    std::vector<double> times;
    std::vector<std::uint8_t> statuses;
    times.reserve(cases.size());
    statuses.reserve(cases.size());
    for (auto c : cases) {
        times.push_back(ctx.data.time(c));
        statuses.push_back(ctx.data.status(c));
    }
    TreeNode& node = ctx.tree.nodes[node_id];
    node.risk = build_risk_table(times, statuses);
    node.survival = kaplan_meier(node.risk);
    node.chf = nelson_aalen(node.risk);
    node.cases = std::move(cases);
}

/// Log-rank sweep over the node's cases, pre-sorted by time ascending, with
/// membership in ctx.sorted_side. Returns the standardized statistic, or a
/// negative value when the candidate is inadmissible (an empty daughter or
/// fewer than d0 events on either side).
inline double evaluate_candidate(GrowContext& ctx, std::size_t n) {
    std::uint64_t n_left = 0, events_left = 0, events_total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        n_left += ctx.sorted_side[i];
        if (ctx.sorted_status[i]) {
            ++events_total;
            events_left += ctx.sorted_side[i];
        }
    }
    if (n_left == 0 || n_left == n) return -1.0;
    std::uint64_t events_right = events_total - events_left;
    if (events_left < ctx.params.d0 || events_right < ctx.params.d0) return -1.0;

    double num = 0.0;
    double var_sum = 0.0;
    std::uint64_t y_total = n;
    std::uint64_t y_left = n_left;
    std::size_t i = 0;
    while (i < n) {
        double t = ctx.sorted_times[i];
        std::uint32_t d = 0, d_left = 0, removed = 0, removed_left = 0;
        while (i < n && ctx.sorted_times[i] == t) {
            if (ctx.sorted_status[i]) {
                ++d;
                d_left += ctx.sorted_side[i];
            }
            ++removed;
            removed_left += ctx.sorted_side[i];
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

/// Candidate pairs for one variable at one node. Deterministic mode (and any
/// request covering the whole pool) enumerates; otherwise draws distinct
/// pairs at random, discarding duplicate values.
inline std::vector<ComplementaryPair> candidate_pairs(GrowContext& ctx, std::uint32_t label_count,
                                                      std::size_t node_size) {
    const std::uint64_t pool = num_complementary_pairs(label_count);
    std::uint64_t k;
    if (ctx.params.nsplit == 0) {
        if (label_count <= 32) return enumerate_pairs(label_count);
        // factors beyond one word always split randomly, nsplit clamped to node size
        k = node_size;
    } else {
        k = std::min<std::uint64_t>(ctx.params.nsplit, node_size);
        if (label_count <= 32 && k >= pool) return enumerate_pairs(label_count);
    }

    std::vector<ComplementaryPair> out;
    std::set<ComplementaryPair> seen;
    std::uint64_t attempts = 0;
    const std::uint64_t max_attempts = 50 * k + 1000;
    while (out.size() < k && attempts < max_attempts) {
        ++attempts;
        ComplementaryPair p = sample_pair(label_count, ctx.rng);
        if (seen.insert(p).second) out.push_back(std::move(p));
    }
    return out;
}

inline std::uint32_t grow_node(GrowContext& ctx, std::vector<std::uint32_t>&& cases) {
    const std::uint32_t node_id = static_cast<std::uint32_t>(ctx.tree.nodes.size());
    ctx.tree.nodes.emplace_back();
    const std::size_t n = cases.size();

    std::uint64_t events = 0;
    for (auto c : cases) events += ctx.data.status(c);
    if (events < 2ull * ctx.params.d0) {
        make_terminal(ctx, node_id, std::move(cases));
        return node_id;
    }

    // variables still varying within this node
    ctx.avail_vars.clear();
    for (std::uint32_t j = 0; j < ctx.data.n_variables(); ++j) {
        if (ctx.data.schema().variables[j].label_count() < 2) continue;
        std::span<const std::uint32_t> col = ctx.data.codes(j);
        std::uint32_t first = col[cases[0]];
        for (std::size_t i = 1; i < n; ++i) {
            if (col[cases[i]] != first) {
                ctx.avail_vars.push_back(j);
                break;
            }
        }
    }
    if (ctx.avail_vars.empty()) {
        make_terminal(ctx, node_id, std::move(cases));
        return node_id;
    }

    // mtry draw: partial Fisher-Yates over the available variables
    std::uint32_t m = std::min<std::uint32_t>(ctx.params.mtry,
                                              static_cast<std::uint32_t>(ctx.avail_vars.size()));
    for (std::uint32_t i = 0; i < m; ++i) {
        std::size_t j = i + static_cast<std::size_t>(ctx.rng.uniform_below(ctx.avail_vars.size() - i));
        std::swap(ctx.avail_vars[i], ctx.avail_vars[j]);
    }

    // one time-ordering of the node, shared by every candidate evaluation
    ctx.sorted_order.resize(n);
    std::iota(ctx.sorted_order.begin(), ctx.sorted_order.end(), 0u);
    std::sort(ctx.sorted_order.begin(), ctx.sorted_order.end(),
              [&](std::uint32_t a, std::uint32_t b) {
                  double ta = ctx.data.time(cases[a]);
                  double tb = ctx.data.time(cases[b]);
                  if (ta != tb) return ta < tb;
                  return a < b;
              });
    ctx.sorted_times.resize(n);
    ctx.sorted_status.resize(n);
    ctx.sorted_codes.resize(n);
    ctx.sorted_side.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t c = cases[ctx.sorted_order[i]];
        ctx.sorted_times[i] = ctx.data.time(c);
        ctx.sorted_status[i] = ctx.data.status(c);
    }

    bool have_best = false;
    double best_stat = -1.0;
    std::uint32_t best_var = kNoVariable;
    ComplementaryPair best_pair;
    std::uint64_t tie_count = 0;

    for (std::uint32_t vi = 0; vi < m; ++vi) {
        const std::uint32_t v = ctx.avail_vars[vi];
        const std::uint32_t L = ctx.data.schema().variables[v].label_count();
        std::span<const std::uint32_t> col = ctx.data.codes(v);
        for (std::size_t i = 0; i < n; ++i)
            ctx.sorted_codes[i] = col[cases[ctx.sorted_order[i]]];

        for (const ComplementaryPair& pair : candidate_pairs(ctx, L, n)) {
            for (std::size_t i = 0; i < n; ++i)
                ctx.sorted_side[i] = pair.left(ctx.sorted_codes[i]) ? 1 : 0;
            double stat = evaluate_candidate(ctx, n);
            if (stat < 0.0) continue;
            if (!have_best || stat > best_stat) {
                have_best = true;
                best_stat = stat;
                best_var = v;
                best_pair = pair;
                tie_count = 1;
            } else if (stat == best_stat) {
                // random tie break: reservoir-keep each tied candidate with
                // probability 1/k
                ++tie_count;
                if (ctx.rng.uniform_below(tie_count) == 0) {
                    best_var = v;
                    best_pair = pair;
                }
            }
        }
    }

    if (!have_best) {
        make_terminal(ctx, node_id, std::move(cases));
        return node_id;
    }

    std::vector<std::uint32_t> left_cases, right_cases;
    {
        std::span<const std::uint32_t> col = ctx.data.codes(best_var);
        for (auto c : cases) {
            if (best_pair.left(col[c]))
                left_cases.push_back(c);
            else
                right_cases.push_back(c);
        }
    }
    cases.clear();
    cases.shrink_to_fit();

    ctx.tree.nodes[node_id].variable = best_var;
    ctx.tree.nodes[node_id].split = best_pair;
    ctx.tree.nodes[node_id].split_stat = best_stat;
    std::uint32_t left_id = grow_node(ctx, std::move(left_cases));
    std::uint32_t right_id = grow_node(ctx, std::move(right_cases));
    ctx.tree.nodes[node_id].left = left_id;
    ctx.tree.nodes[node_id].right = right_id;
    return node_id;
}

}  // namespace detail

/// Grows one survival tree on a growing sample given as dataset case ids
/// with multiplicity (a bootstrap sample repeats ids). Splitting maximizes
/// the log-rank statistic over the candidate (variable, pair) set; a node is
/// terminal when no candidate gives both daughters at least d0 events.
inline SurvivalTree grow_tree(const Dataset& data, std::span<const std::uint32_t> sample_cases,
                              const TreeParams& params, Rng& rng) {
    require(!data.has_pending(), "discretize numeric columns before growing");
    require(params.d0 >= 1, "d0 must be at least 1");
    require(!sample_cases.empty(), "empty growing sample");

    std::uint64_t events = 0;
    for (auto c : sample_cases) events += data.status(c);
    require(events >= params.d0, "growing sample has fewer than d0 events");

    TreeParams p = params;
    if (p.mtry == 0)
        p.mtry = static_cast<std::uint32_t>(
            std::ceil(std::sqrt(static_cast<double>(data.n_variables()))));

    SurvivalTree tree;
    detail::GrowContext ctx{data, p, rng, tree, {}, {}, {}, {}, {}, {}};
    std::vector<std::uint32_t> cases(sample_cases.begin(), sample_cases.end());
    detail::grow_node(ctx, std::move(cases));
    return tree;
}

inline SurvivalTree grow_tree(const Dataset& data, std::span<const std::uint32_t> sample_cases,
                              const TreeParams& params) {
    Rng rng(params.seed);
    return grow_tree(data, sample_cases, params, rng);
}

}  // namespace survrf

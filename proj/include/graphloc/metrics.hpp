#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "graphloc/pipeline.hpp"
#include "graphloc/retrieval.hpp"

namespace graphloc {

/// Candidate nodes in rank order, each kept once at its best position.
inline std::vector<NodeIndex> node_ranking(const RetrievalResult& result)
{
    std::vector<NodeIndex> out;
    std::unordered_set<NodeIndex> seen;
    for (const auto& c : result.ranked) {
        if (seen.insert(c.node).second)
            out.push_back(c.node);
    }
    return out;
}

using QueryTruth = std::unordered_map<WalkId, NodeIndex>;

/// Fraction of queries whose true node is among the first k distinct nodes.
inline double recall_at_k(std::span<const RetrievalResult> results, const QueryTruth& truth, std::size_t k)
{
    if (k < 1)
        throw Error("recall_at_k: k must be at least 1");
    if (results.empty())
        return 0.0;
    std::size_t hits = 0;
    for (const auto& r : results) {
        const auto it = truth.find(r.query_walk);
        if (it == truth.end())
            throw Error("recall_at_k: no ground truth for query walk " + std::to_string(r.query_walk));
        const auto ranking = node_ranking(r);
        const auto end = ranking.begin() + static_cast<std::ptrdiff_t>(std::min(k, ranking.size()));
        if (std::find(ranking.begin(), end, it->second) != end)
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

/// k for a Top-pct% metric: floor(pct% of the database), at least 1.
inline std::size_t percent_k(double pct, std::size_t database_nodes)
{
    if (!(pct > 0.0 && pct <= 100.0))
        throw Error("percent must lie in (0, 100]");
    const auto k = static_cast<std::size_t>(std::floor(pct * static_cast<double>(database_nodes) / 100.0));
    return std::max<std::size_t>(1, k);
}

inline double recall_at_percent(std::span<const RetrievalResult> results, const QueryTruth& truth, double pct,
                                std::size_t database_nodes)
{
    return recall_at_k(results, truth, percent_k(pct, database_nodes));
}

/// One query walk per node of `graph`, with a capture choice per walk node.
struct QuerySet {
    std::vector<Walk> walks;
    std::vector<CaptureChoice> captures;
};

inline QuerySet sample_queries(const CityGraph& graph, std::size_t walk_length, std::size_t captures,
                               std::uint64_t seed)
{
    QuerySet qs;
    Rng rng = make_rng(seed, "queries");
    for (NodeIndex n = 0; n < graph.size(); ++n) {
        qs.walks.push_back(sample_walk(graph, n, walk_length, rng));
        qs.captures.push_back(choose_captures(qs.walks.back(), captures, rng));
    }
    return qs;
}

/// Top-1 recall of `params` on `graph` with no filtering; used for model
/// selection during training.
template <class S>
double top1_recall(const ModelParams<S>& params, const CityGraph& graph, const FeatureSet& fs,
                   std::size_t walk_length, double fov, std::uint64_t seed, std::size_t captures = 0)
{
    if (graph.empty())
        return 0.0;
    const auto refs = embed_references(params, graph, fs, walk_length);
    const auto index = build_index(refs.records());
    const auto queries = sample_queries(graph, walk_length, captures == 0 ? fs.captures : captures, seed);
    const auto emb = embed_queries(params, graph, fs, queries.walks, queries.captures, fov);
    std::vector<RetrievalResult> results;
    QueryTruth truth;
    std::vector<double> q(static_cast<std::size_t>(emb.rows()));
    for (Eigen::Index i = 0; i < emb.cols(); ++i) {
        for (Eigen::Index d = 0; d < emb.rows(); ++d)
            q[static_cast<std::size_t>(d)] = emb(d, i);
        results.push_back(index.query_topk(q, 1, static_cast<WalkId>(i)));
        truth[static_cast<WalkId>(i)] = queries.walks[static_cast<std::size_t>(i)].target();
    }
    return recall_at_k(results, truth, 1);
}

} // namespace graphloc

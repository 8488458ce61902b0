#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "graphloc/error.hpp"
#include "graphloc/geograph.hpp"
#include "graphloc/kdtree.hpp"

namespace graphloc {

using WalkId = std::uint64_t;

struct EmbeddingRecord {
    std::vector<double> vector;
    WalkId walk_id = 0;
    NodeIndex node = 0;
};

struct RetrievalCandidate {
    NodeIndex node = 0;
    WalkId walk_id = 0;
    double distance = 0.0;  // squared L2

    friend bool operator==(const RetrievalCandidate&, const RetrievalCandidate&) = default;
};

struct RetrievalResult {
    std::vector<RetrievalCandidate> ranked;  // ascending distance, ties by walk id
    WalkId query_walk = 0;
};

/// Immutable exact nearest-neighbour index over reference embeddings.
class EmbeddingIndex {
public:
    EmbeddingIndex() = default;

    static EmbeddingIndex build(const std::vector<EmbeddingRecord>& records)
    {
        if (records.empty())
            throw Error("build_index: no embeddings");
        const std::size_t dim = records.front().vector.size();
        if (dim == 0)
            throw Error("build_index: zero-dimensional embeddings");
        EmbeddingIndex idx;
        std::vector<double> points;
        std::vector<std::uint64_t> labels;
        points.reserve(records.size() * dim);
        labels.reserve(records.size());
        std::vector<WalkId> seen;
        seen.reserve(records.size());
        for (const auto& r : records) {
            if (r.vector.size() != dim)
                throw Error("build_index: embedding for walk " + std::to_string(r.walk_id) + " has dimension " +
                            std::to_string(r.vector.size()) + ", expected " + std::to_string(dim));
            for (double v : r.vector) {
                if (!std::isfinite(v))
                    throw Error("build_index: non-finite value in embedding for walk " + std::to_string(r.walk_id));
            }
            points.insert(points.end(), r.vector.begin(), r.vector.end());
            labels.push_back(r.walk_id);
            idx.nodes_.push_back(r.node);
            seen.push_back(r.walk_id);
        }
        std::sort(seen.begin(), seen.end());
        if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
            throw Error("build_index: duplicate walk id");
        idx.tree_ = KdTree<double>(std::move(points), dim, std::move(labels));
        return idx;
    }

    std::size_t size() const { return tree_.size(); }
    std::size_t dim() const { return tree_.dim(); }

    /// Exact top-k by squared L2; ties resolved by ascending walk id.
    RetrievalResult query_topk(std::span<const double> q, std::size_t k, WalkId query_walk = 0) const
    {
        if (k < 1)
            throw Error("query_topk: k must be at least 1");
        if (q.size() != dim())
            throw Error("query_topk: query dimension " + std::to_string(q.size()) + " != index dimension " +
                        std::to_string(dim()));
        RetrievalResult out;
        out.query_walk = query_walk;
        for (const auto& hit : tree_.knn(q, std::min(k, size())))
            out.ranked.push_back({nodes_[hit.index], hit.label, hit.distance});
        return out;
    }

    /// Grows k geometrically until the ranking holds at least `min_nodes`
    /// distinct target nodes (or the whole index).
    RetrievalResult query_distinct_nodes(std::span<const double> q, std::size_t min_nodes, std::size_t k_start,
                                         WalkId query_walk = 0) const
    {
        std::size_t k = std::max<std::size_t>(1, k_start);
        while (true) {
            auto res = query_topk(q, k, query_walk);
            if (res.ranked.size() >= size() || distinct_nodes(res) >= min_nodes)
                return res;
            k *= 2;
        }
    }

    static std::size_t distinct_nodes(const RetrievalResult& r)
    {
        std::vector<NodeIndex> ids;
        for (const auto& c : r.ranked)
            ids.push_back(c.node);
        std::sort(ids.begin(), ids.end());
        return static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
    }

private:
    KdTree<double> tree_;
    std::vector<NodeIndex> nodes_;
};

inline EmbeddingIndex build_index(const std::vector<EmbeddingRecord>& records)
{
    return EmbeddingIndex::build(records);
}

} // namespace graphloc

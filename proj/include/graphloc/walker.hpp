#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "graphloc/geograph.hpp"
#include "graphloc/rng.hpp"

namespace graphloc {

/// Simple walk through a graph whose last element is the target node.
/// Length counts nodes, not edges.
struct Walk {
    std::vector<NodeIndex> nodes;

    NodeIndex target() const { return nodes.back(); }
    std::size_t length() const { return nodes.size(); }

    std::vector<std::string> ids(const CityGraph& graph) const
    {
        std::vector<std::string> out;
        out.reserve(nodes.size());
        for (NodeIndex i : nodes)
            out.push_back(graph.id(i));
        return out;
    }

    friend bool operator==(const Walk&, const Walk&) = default;
    friend auto operator<=>(const Walk& a, const Walk& b) { return a.nodes <=> b.nodes; }
};

/// Checks the Walk invariants against `graph`: non-empty, consecutive nodes
/// adjacent, no repeated node.
inline bool is_valid_walk(const CityGraph& graph, const Walk& walk)
{
    if (walk.nodes.empty())
        return false;
    for (std::size_t i = 0; i < walk.nodes.size(); ++i) {
        if (walk.nodes[i] >= graph.size())
            return false;
        for (std::size_t j = 0; j < i; ++j) {
            if (walk.nodes[j] == walk.nodes[i])
                return false;
        }
        if (i > 0 && !graph.has_edge(walk.nodes[i - 1], walk.nodes[i]))
            return false;
    }
    return true;
}

namespace detail {

// Grows `path` (stored target-first) backwards through the graph.
struct WalkSearch {
    const CityGraph& graph;
    std::size_t length;
    std::vector<NodeIndex> path;
    std::vector<char> on_path;

    WalkSearch(const CityGraph& g, NodeIndex target, std::size_t len)
        : graph(g), length(len), on_path(g.size(), 0)
    {
        path.reserve(len);
        path.push_back(target);
        on_path[target] = 1;
    }

    template <class Visit>
    void enumerate(Visit&& visit)
    {
        if (path.size() == length) {
            visit(path);
            return;
        }
        for (NodeIndex u : graph.neighbours(path.back())) {
            if (on_path[u])
                continue;
            push(u);
            enumerate(visit);
            pop();
        }
    }

    bool randomized(Rng& rng, std::vector<NodeIndex>& best)
    {
        if (path.size() > best.size())
            best = path;
        if (path.size() == length)
            return true;
        std::vector<NodeIndex> candidates;
        for (NodeIndex u : graph.neighbours(path.back())) {
            if (!on_path[u])
                candidates.push_back(u);
        }
        std::shuffle(candidates.begin(), candidates.end(), rng);
        for (NodeIndex u : candidates) {
            push(u);
            if (randomized(rng, best))
                return true;
            pop();
        }
        return false;
    }

    void push(NodeIndex u)
    {
        path.push_back(u);
        on_path[u] = 1;
    }

    void pop()
    {
        on_path[path.back()] = 0;
        path.pop_back();
    }
};

inline void check_walk_args(const CityGraph& graph, NodeIndex target, std::size_t length)
{
    if (target >= graph.size())
        throw Error("unknown target node index " + std::to_string(target));
    if (length < 1)
        throw Error("walk length must be at least 1");
}

} // namespace detail

/// Random depth-first walk ending at `target`. Neighbours are tried in a
/// uniformly shuffled order with backtracking; when no simple walk of the
/// requested length exists the longest one found is returned instead.
inline Walk sample_walk(const CityGraph& graph, NodeIndex target, std::size_t length, Rng& rng)
{
    detail::check_walk_args(graph, target, length);
    detail::WalkSearch search(graph, target, length);
    std::vector<NodeIndex> best;
    if (search.randomized(rng, best))
        best = search.path;
    std::reverse(best.begin(), best.end());
    return Walk{std::move(best)};
}

inline Walk sample_walk(const CityGraph& graph, const std::string& target, std::size_t length, Rng& rng)
{
    return sample_walk(graph, graph.index_of(target), length, rng);
}

/// Every simple walk with exactly `length` nodes ending at `target`, in
/// lexicographic order of node-id sequences.
inline std::vector<Walk> enumerate_walks(const CityGraph& graph, NodeIndex target, std::size_t length)
{
    detail::check_walk_args(graph, target, length);
    std::vector<Walk> out;
    detail::WalkSearch search(graph, target, length);
    search.enumerate([&](const std::vector<NodeIndex>& path) {
        out.push_back(Walk{std::vector<NodeIndex>(path.rbegin(), path.rend())});
    });
    // Node indices follow sorted id order, so index order is id order.
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<Walk> enumerate_walks(const CityGraph& graph, const std::string& target, std::size_t length)
{
    return enumerate_walks(graph, graph.index_of(target), length);
}

/// Number of simple walks with `length` nodes, summed over every target.
inline std::uint64_t count_walks(const CityGraph& graph, std::size_t length)
{
    if (length < 1)
        throw Error("walk length must be at least 1");
    std::uint64_t total = 0;
    for (NodeIndex t = 0; t < graph.size(); ++t) {
        detail::WalkSearch search(graph, t, length);
        search.enumerate([&](const std::vector<NodeIndex>&) { ++total; });
    }
    return total;
}

/// Reference walks for a target: all walks of `length` nodes, or of the
/// longest shorter length that exists when the neighbourhood is too cramped.
inline std::vector<Walk> reference_walks(const CityGraph& graph, NodeIndex target, std::size_t length)
{
    for (std::size_t len = length; len >= 1; --len) {
        auto walks = enumerate_walks(graph, target, len);
        if (!walks.empty())
            return walks;
    }
    return {};
}

} // namespace graphloc

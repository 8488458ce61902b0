#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "graphloc/error.hpp"
#include "graphloc/rng.hpp"

namespace graphloc {

using NodeIndex = std::size_t;

inline constexpr double kDegToRad = std::numbers::pi / 180.0;
inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

/// Maps any angle in degrees into [-180, 180).
inline double wrap_degrees(double deg)
{
    double r = std::fmod(deg + 180.0, 360.0);
    if (r < 0.0)
        r += 360.0;
    return r - 180.0;
}

struct GeoCoord {
    double lat = 0.0;  // [-90, 90]
    double lon = 0.0;  // (-180, 180]

    /// Validates latitude and wraps longitude into (-180, 180].
    static GeoCoord make(double lat, double lon)
    {
        if (!std::isfinite(lat) || !std::isfinite(lon) || lat < -90.0 || lat > 90.0)
            throw Error("coordinate out of range: lat=" + std::to_string(lat) + " lon=" + std::to_string(lon));
        double w = wrap_degrees(lon);
        if (w == -180.0)
            w = 180.0;
        return GeoCoord{lat, w};
    }

    friend bool operator==(const GeoCoord&, const GeoCoord&) = default;
};

/// Initial great-circle heading at `a` toward `b`, clockwise from true north,
/// in degrees within [-180, 180].
inline double forward_azimuth(const GeoCoord& a, const GeoCoord& b)
{
    if (a.lat == b.lat && a.lon == b.lon)
        throw Error("degenerate pair: identical coordinates");
    const double phi1 = a.lat * kDegToRad;
    const double phi2 = b.lat * kDegToRad;
    const double dlambda = (b.lon - a.lon) * kDegToRad;
    const double y = std::sin(dlambda) * std::cos(phi2);
    const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
    return std::atan2(y, x) * kRadToDeg;
}

/// Great-circle distance in metres (haversine, mean Earth radius).
inline double haversine_m(const GeoCoord& a, const GeoCoord& b)
{
    constexpr double kEarthRadius = 6371008.8;
    const double dphi = (b.lat - a.lat) * kDegToRad;
    const double dlambda = (b.lon - a.lon) * kDegToRad;
    const double h = std::sin(dphi / 2) * std::sin(dphi / 2) +
                     std::cos(a.lat * kDegToRad) * std::cos(b.lat * kDegToRad) * std::sin(dlambda / 2) *
                         std::sin(dlambda / 2);
    return 2.0 * kEarthRadius * std::asin(std::min(1.0, std::sqrt(h)));
}

struct NodeRecord {
    std::string id;
    GeoCoord location;
    double yaw = 0.0;                        // north-centred camera yaw, [-180, 180]
    std::vector<double> neighbour_bearings;  // one per incident edge, ascending
    int streetview_count = 5;

    // Features are keyed by node id; the id doubles as the feature handle.
    const std::string& feature_ref() const { return id; }

    friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

struct EdgeSpec {
    std::string a;
    std::string b;
};

/// Undirected road graph. Immutable once built: nodes are stored sorted by id,
/// adjacency lists are sorted by neighbour index, and bearings are always
/// derived from coordinates.
class CityGraph {
public:
    CityGraph() = default;

    static CityGraph build(std::string name, std::vector<NodeRecord> nodes, const std::vector<EdgeSpec>& edges)
    {
        CityGraph g;
        g.name_ = std::move(name);
        std::sort(nodes.begin(), nodes.end(), [](const NodeRecord& x, const NodeRecord& y) { return x.id < y.id; });
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& n = nodes[i];
            if (n.id.empty())
                throw Error("node with empty id");
            if (i > 0 && nodes[i - 1].id == n.id)
                throw Error("duplicate node id \"" + n.id + "\"");
            if (!std::isfinite(n.yaw) || n.yaw < -180.0 || n.yaw > 180.0)
                throw Error("node \"" + n.id + "\": yaw out of range");
            if (n.location.lat < -90.0 || n.location.lat > 90.0 || n.location.lon <= -180.0 ||
                n.location.lon > 180.0)
                throw Error("node \"" + n.id + "\": coordinate out of range");
            g.index_.emplace(n.id, i);
        }
        g.nodes_ = std::move(nodes);
        g.adj_.assign(g.nodes_.size(), {});

        for (const auto& e : edges) {
            const auto ia = g.index_.find(e.a);
            const auto ib = g.index_.find(e.b);
            if (ia == g.index_.end())
                throw Error("edge [" + e.a + ", " + e.b + "] references unknown node \"" + e.a + "\"");
            if (ib == g.index_.end())
                throw Error("edge [" + e.a + ", " + e.b + "] references unknown node \"" + e.b + "\"");
            if (ia->second == ib->second)
                throw Error("self-loop on node \"" + e.a + "\"");
            auto key = std::minmax(ia->second, ib->second);
            g.edges_.emplace_back(key.first, key.second);
        }
        std::sort(g.edges_.begin(), g.edges_.end());
        for (std::size_t i = 1; i < g.edges_.size(); ++i) {
            if (g.edges_[i] == g.edges_[i - 1])
                throw Error("duplicate edge [" + g.nodes_[g.edges_[i].first].id + ", " +
                            g.nodes_[g.edges_[i].second].id + "]");
        }
        for (const auto& [a, b] : g.edges_) {
            g.adj_[a].push_back(b);
            g.adj_[b].push_back(a);
        }
        for (auto& list : g.adj_)
            std::sort(list.begin(), list.end());
        for (std::size_t i = 0; i < g.nodes_.size(); ++i)
            g.nodes_[i].neighbour_bearings = g.compute_bearings(i);
        return g;
    }

    const std::string& name() const { return name_; }
    std::size_t size() const { return nodes_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    bool empty() const { return nodes_.empty(); }

    const NodeRecord& node(NodeIndex i) const { return nodes_.at(i); }
    const std::vector<NodeRecord>& nodes() const { return nodes_; }
    const std::vector<std::pair<NodeIndex, NodeIndex>>& edges() const { return edges_; }
    const std::vector<NodeIndex>& neighbours(NodeIndex i) const { return adj_.at(i); }
    std::size_t degree(NodeIndex i) const { return adj_.at(i).size(); }
    const std::string& id(NodeIndex i) const { return nodes_.at(i).id; }

    bool contains(const std::string& id) const { return index_.count(id) != 0; }

    NodeIndex index_of(const std::string& id) const
    {
        const auto it = index_.find(id);
        if (it == index_.end())
            throw Error("unknown node id \"" + id + "\"");
        return it->second;
    }

    bool has_edge(NodeIndex a, NodeIndex b) const
    {
        const auto& list = adj_.at(a);
        return std::binary_search(list.begin(), list.end(), b);
    }

    /// Heading from node `from` toward node `to`.
    double bearing(NodeIndex from, NodeIndex to) const
    {
        return forward_azimuth(nodes_.at(from).location, nodes_.at(to).location);
    }

    std::vector<EdgeSpec> edge_specs() const
    {
        std::vector<EdgeSpec> out;
        out.reserve(edges_.size());
        for (const auto& [a, b] : edges_)
            out.push_back({nodes_[a].id, nodes_[b].id});
        return out;
    }

    bool connected() const
    {
        if (nodes_.empty())
            return true;
        std::vector<char> seen(nodes_.size(), 0);
        std::vector<NodeIndex> stack{0};
        seen[0] = 1;
        std::size_t count = 1;
        while (!stack.empty()) {
            const NodeIndex v = stack.back();
            stack.pop_back();
            for (NodeIndex u : adj_[v]) {
                if (!seen[u]) {
                    seen[u] = 1;
                    ++count;
                    stack.push_back(u);
                }
            }
        }
        return count == nodes_.size();
    }

    /// Subgraph induced by `keep` (indices into this graph). Bearings are
    /// recomputed, so nodes on a cut lose the bearings of removed roads.
    CityGraph induced(const std::vector<NodeIndex>& keep, std::string name) const
    {
        std::vector<char> in(nodes_.size(), 0);
        std::vector<NodeRecord> records;
        records.reserve(keep.size());
        for (NodeIndex i : keep) {
            in.at(i) = 1;
            records.push_back(nodes_[i]);
        }
        std::vector<EdgeSpec> sub_edges;
        for (const auto& [a, b] : edges_) {
            if (in[a] && in[b])
                sub_edges.push_back({nodes_[a].id, nodes_[b].id});
        }
        return build(std::move(name), std::move(records), sub_edges);
    }

    friend bool operator==(const CityGraph& x, const CityGraph& y)
    {
        return x.name_ == y.name_ && x.nodes_ == y.nodes_ && x.edges_ == y.edges_;
    }

private:
    std::vector<double> compute_bearings(NodeIndex i) const
    {
        std::vector<double> out;
        out.reserve(adj_[i].size());
        for (NodeIndex u : adj_[i])
            out.push_back(forward_azimuth(nodes_[i].location, nodes_[u].location));
        std::sort(out.begin(), out.end());
        return out;
    }

    std::string name_;
    std::vector<NodeRecord> nodes_;
    std::unordered_map<std::string, NodeIndex> index_;
    std::vector<std::vector<NodeIndex>> adj_;
    std::vector<std::pair<NodeIndex, NodeIndex>> edges_;
};

/// Bearings from `id` to each neighbour, ascending.
inline std::vector<double> neighbor_bearings(const CityGraph& graph, const std::string& id)
{
    return graph.node(graph.index_of(id)).neighbour_bearings;
}

struct GraphSplit {
    CityGraph train;
    CityGraph validation;
    std::vector<EdgeSpec> edge_cut;
};

/// Carves a validation region out of one corner of the graph's bounding box.
/// The corner is chosen by `seed`; the validation set is the round(n * fraction)
/// nodes closest to that corner, and every edge crossing the boundary is cut.
inline GraphSplit split_graph(const CityGraph& graph, double val_fraction, std::uint64_t seed)
{
    if (!(val_fraction > 0.0 && val_fraction < 0.5))
        throw Error("split_graph: val_fraction must lie in (0, 0.5), got " + std::to_string(val_fraction));
    const std::size_t n = graph.size();
    if (n < 8)
        throw Error("split_graph: graph too small (" + std::to_string(n) + " nodes, need at least 8)");
    if (!graph.connected())
        throw Error("split_graph: graph \"" + graph.name() + "\" is not connected");

    double lat_lo = 90.0, lat_hi = -90.0, lon_lo = 180.0, lon_hi = -180.0;
    for (const auto& rec : graph.nodes()) {
        lat_lo = std::min(lat_lo, rec.location.lat);
        lat_hi = std::max(lat_hi, rec.location.lat);
        lon_lo = std::min(lon_lo, rec.location.lon);
        lon_hi = std::max(lon_hi, rec.location.lon);
    }
    const double lat_span = std::max(lat_hi - lat_lo, 1e-12);
    const double lon_span = std::max(lon_hi - lon_lo, 1e-12);

    const std::uint64_t corner = derive_seed(seed, "split_corner") % 4;
    const double corner_y = (corner & 1U) ? 1.0 : 0.0;
    const double corner_x = (corner & 2U) ? 1.0 : 0.0;

    std::vector<std::pair<double, NodeIndex>> order;
    order.reserve(n);
    for (NodeIndex i = 0; i < n; ++i) {
        const auto& loc = graph.node(i).location;
        const double y = (loc.lat - lat_lo) / lat_span - corner_y;
        const double x = (loc.lon - lon_lo) / lon_span - corner_x;
        order.emplace_back(x * x + y * y, i);
    }
    std::sort(order.begin(), order.end());

    const auto val_count =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n))));
    std::vector<char> is_val(n, 0);
    std::vector<NodeIndex> val_nodes, train_nodes;
    for (std::size_t r = 0; r < val_count; ++r)
        is_val[order[r].second] = 1;
    for (NodeIndex i = 0; i < n; ++i)
        (is_val[i] ? val_nodes : train_nodes).push_back(i);

    GraphSplit split;
    for (const auto& [a, b] : graph.edges()) {
        if (is_val[a] != is_val[b])
            split.edge_cut.push_back({graph.id(a), graph.id(b)});
    }
    split.train = graph.induced(train_nodes, graph.name() + "/train");
    split.validation = graph.induced(val_nodes, graph.name() + "/val");
    return split;
}

} // namespace graphloc

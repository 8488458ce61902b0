#pragma once

// Reference implementations used to check the library. Each one is written
// independently of the code it checks: plain loops, no shared helpers.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "support.hpp"

namespace graphloc::oracle {

// Flat-earth heading: east/north displacement with cos-latitude scaling.
inline double tangent_plane_azimuth(const GeoCoord& a, const GeoCoord& b)
{
    const double mid = 0.5 * (a.lat + b.lat) * std::numbers::pi / 180.0;
    const double east = (b.lon - a.lon) * std::cos(mid);
    const double north = b.lat - a.lat;
    return std::atan2(east, north) * 180.0 / std::numbers::pi;
}

inline double angle_diff(double a, double b)
{
    double d = std::fmod(std::abs(a - b), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

// Forward DFS from every start with a visited bitmask; walks are bucketed by
// their final node.
inline std::map<NodeIndex, std::set<std::vector<NodeIndex>>> walks_by_target(const CityGraph& g, std::size_t length)
{
    std::map<NodeIndex, std::set<std::vector<NodeIndex>>> out;
    std::vector<NodeIndex> path;
    auto rec = [&](auto&& self, NodeIndex v, std::uint32_t mask) -> void {
        path.push_back(v);
        if (path.size() == length) {
            out[v].insert(path);
        } else {
            for (NodeIndex u = 0; u < g.size(); ++u) {
                if (!(mask >> u & 1U) && g.has_edge(v, u))
                    self(self, u, mask | (1U << u));
            }
        }
        path.pop_back();
    };
    for (NodeIndex s = 0; s < g.size(); ++s)
        rec(rec, s, 1U << s);
    return out;
}

inline CityGraph random_connected_graph(std::mt19937_64& rng, std::size_t n, double extra)
{
    std::vector<testing::NodeSpec> nodes;
    std::vector<std::pair<std::string, std::string>> edges;
    std::set<std::pair<std::size_t, std::size_t>> have;
    std::uniform_real_distribution<double> u(0.0, 0.01);
    for (std::size_t i = 0; i < n; ++i)
        nodes.push_back({"v" + std::to_string(10 + i), 40.0 + u(rng), 10.0 + u(rng)});
    auto add = [&](std::size_t a, std::size_t b) {
        if (a == b || have.count({std::min(a, b), std::max(a, b)}))
            return;
        have.insert({std::min(a, b), std::max(a, b)});
        edges.emplace_back(nodes[a].id, nodes[b].id);
    };
    for (std::size_t i = 1; i < n; ++i)
        add(i, std::uniform_int_distribution<std::size_t>(0, i - 1)(rng));
    std::bernoulli_distribution coin(extra);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            if (coin(rng))
                add(a, b);
        }
    }
    return testing::make_graph("random", nodes, edges);
}

// Straight-line message passing over one walk with nested loops.
// features[j][i]; returns per-node outputs of the last layer.
inline std::vector<std::vector<double>> forward(const Branch<double>& branch,
                                                std::vector<std::vector<double>> h, bool mean)
{
    const std::size_t len = h.size();
    for (std::size_t k = 0; k < branch.size(); ++k) {
        const auto& W = branch[k].weights;
        const auto& b = branch[k].bias;
        std::vector<std::vector<double>> next(len, std::vector<double>(static_cast<std::size_t>(W.rows())));
        for (std::size_t j = 0; j < len; ++j) {
            std::vector<double> agg(h[j].size(), 0.0);
            double count = 0;
            for (std::size_t u = 0; u < len; ++u) {
                if (u + 1 == j || u == j || u == j + 1) {
                    for (std::size_t i = 0; i < agg.size(); ++i)
                        agg[i] += h[u][i];
                    count += 1;
                }
            }
            if (mean) {
                for (auto& v : agg)
                    v /= count;
            }
            for (Eigen::Index r = 0; r < W.rows(); ++r) {
                double z = b(r);
                for (Eigen::Index c = 0; c < W.cols(); ++c)
                    z += W(r, c) * agg[static_cast<std::size_t>(c)];
                const bool hidden = k + 1 < branch.size();
                next[j][static_cast<std::size_t>(r)] = hidden ? std::max(0.0, z) : z;
            }
        }
        h = std::move(next);
    }
    return h;
}

struct GradCheckCase {
    ModelParams<double> params;
    TripletBatch<double> batch;
    double margin = 0.2;
};

inline WalkBlock<double> random_block(std::mt19937_64& rng, std::size_t walks, std::size_t dim, std::size_t max_len)
{
    std::uniform_int_distribution<std::size_t> len(1, max_len);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::size_t> lens(walks);
    Eigen::Index total = 0;
    for (auto& l : lens) {
        l = len(rng);
        total += static_cast<Eigen::Index>(l);
    }
    WalkBlock<double> block;
    block.features.resize(static_cast<Eigen::Index>(dim), total);
    for (Eigen::Index c = 0; c < total; ++c) {
        for (Eigen::Index r = 0; r < block.features.rows(); ++r)
            block.features(r, c) = normal(rng);
    }
    Eigen::Index off = 0;
    for (auto l : lens) {
        off += static_cast<Eigen::Index>(l);
        block.offsets.push_back(off);
    }
    return block;
}

// True if any hidden pre-activation or triplet hinge sits within `tol` of its
// kink, where a finite difference would straddle the non-smooth point.
inline bool near_kink(const GradCheckCase& c, double tol)
{
    auto check_branch = [&](const Branch<double>& branch, const WalkBlock<double>& block) {
        const auto t = detail::forward_trace(branch, block, c.params.aggregator);
        for (std::size_t k = 0; k + 1 < t.preact.size(); ++k) {
            if ((t.preact[k].array().abs() < tol).any())
                return true;
        }
        return false;
    };
    if (check_branch(c.params.street, c.batch.anchors) || check_branch(c.params.sat, c.batch.positives) ||
        check_branch(c.params.sat, c.batch.negatives))
        return true;
    const auto a = embed_block(c.params.street, c.batch.anchors, c.params.aggregator);
    const auto p = embed_block(c.params.sat, c.batch.positives, c.params.aggregator);
    const auto q = embed_block(c.params.sat, c.batch.negatives, c.params.aggregator);
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        const double gap = (a.col(i) - p.col(i)).squaredNorm() - (a.col(i) - q.col(i)).squaredNorm() + c.margin;
        if (std::abs(gap) < tol)
            return true;
    }
    return false;
}

/// Random small network (widths <= 16, walks of <= max_len nodes) and batch,
/// redrawn until no kink lies within `tol`.
inline GradCheckCase random_case(std::mt19937_64& rng, std::size_t max_len = 3, double tol = 1e-3)
{
    std::uniform_int_distribution<std::size_t> width(2, 16), layers(1, 3), batch(1, 4);
    std::uniform_real_distribution<double> margin(0.5, 1.5);
    while (true) {
        std::vector<std::size_t> dims(layers(rng) + 1);
        for (auto& d : dims)
            d = width(rng);
        GradCheckCase c;
        c.params = ModelParams<double>::init(dims, rng() % 2 ? Aggregator::mean : Aggregator::sum, rng());
        std::normal_distribution<double> normal(0.0, 0.1);
        for (auto* branch : {&c.params.street, &c.params.sat}) {
            for (auto& l : *branch) {
                for (Eigen::Index i = 0; i < l.bias.size(); ++i)
                    l.bias(i) = normal(rng);
            }
        }
        const std::size_t n = batch(rng);
        c.batch.anchors = random_block(rng, n, dims.front(), max_len);
        c.batch.positives = random_block(rng, n, dims.front(), max_len);
        c.batch.negatives = random_block(rng, n, dims.front(), max_len);
        c.margin = margin(rng);
        if (!near_kink(c, tol))
            return c;
    }
}

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t entries = 0;
};

/// Central differences of the mean batch loss against backward().
inline GradCheckReport check_gradients(const GradCheckCase& c, double step = 1e-4)
{
    const auto grads = backward(c.batch, c.params, c.margin);
    GradCheckReport rep;
    ModelParams<double> p = c.params;
    auto visit = [&](Branch<double>& branch, const Branch<double>& gb) {
        for (std::size_t k = 0; k < branch.size(); ++k) {
            auto probe = [&](double& slot, double analytic) {
                const double keep = slot;
                slot = keep + step;
                const double up = batch_loss(c.batch, p, c.margin);
                slot = keep - step;
                const double down = batch_loss(c.batch, p, c.margin);
                slot = keep;
                const double numeric = (up - down) / (2.0 * step);
                const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
                rep.max_rel_error = std::max(rep.max_rel_error, std::abs(analytic - numeric) / denom);
                ++rep.entries;
            };
            for (Eigen::Index i = 0; i < branch[k].weights.size(); ++i)
                probe(branch[k].weights.data()[i], gb[k].weights.data()[i]);
            for (Eigen::Index i = 0; i < branch[k].bias.size(); ++i)
                probe(branch[k].bias.data()[i], gb[k].bias.data()[i]);
        }
    };
    visit(p.street, grads.street);
    visit(p.sat, grads.sat);
    return rep;
}

struct Neighbour {
    double distance;
    std::uint64_t id;
};

/// Sorted linear scan by (squared distance, id).
inline std::vector<Neighbour> brute_force_knn(const std::vector<std::vector<double>>& points,
                                              const std::vector<std::uint64_t>& ids, const std::vector<double>& q,
                                              std::size_t k)
{
    std::vector<Neighbour> all;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double d = 0;
        for (std::size_t j = 0; j < q.size(); ++j)
            d += (points[i][j] - q[j]) * (points[i][j] - q[j]);
        all.push_back({d, ids[i]});
    }
    std::sort(all.begin(), all.end(), [](const Neighbour& a, const Neighbour& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
    });
    all.resize(std::min(k, all.size()));
    return all;
}

} // namespace graphloc::oracle

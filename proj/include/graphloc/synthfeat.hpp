#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "graphloc/geograph.hpp"
#include "graphloc/rng.hpp"

namespace graphloc {

/// Non-owning view of one panorama: `bins` angular sectors of `width` values
/// each, stored bin-major. Bin b covers world headings
/// [b * 360/bins - 180, (b + 1) * 360/bins - 180).
struct PanoramaView {
    std::span<const float> values;
    std::size_t bins = 0;
    std::size_t width = 0;

    std::span<const float> bin(std::size_t b) const { return values.subspan(b * width, width); }
};

struct AngularFeature {
    std::size_t bins = 0;
    std::size_t width = 0;
    std::vector<float> values;

    PanoramaView view() const { return {values, bins, width}; }
};

inline double bin_centre(std::size_t b, std::size_t bins)
{
    const double w = 360.0 / static_cast<double>(bins);
    return -180.0 + (static_cast<double>(b) + 0.5) * w;
}

/// Index of the world-frame angular bin containing `heading`.
inline std::size_t heading_bin(double heading, std::size_t bins)
{
    const double w = 360.0 / static_cast<double>(bins);
    const auto b = static_cast<std::size_t>(std::floor((wrap_degrees(heading) + 180.0) / w));
    return std::min(b, bins - 1);
}

/// Bins whose centres fall inside the half-open window [yaw - fov/2, yaw + fov/2).
/// Falls back to the bin containing `yaw` if the window catches no centre.
inline std::vector<std::size_t> fov_bins(std::size_t bins, double theta_fov, double yaw)
{
    if (!(theta_fov > 0.0))
        throw Error("fov_window: field of view must be positive, got " + std::to_string(theta_fov));
    std::vector<std::size_t> out;
    const double half = theta_fov / 2.0;
    for (std::size_t b = 0; b < bins; ++b) {
        const double delta = wrap_degrees(bin_centre(b, bins) - yaw);
        if (theta_fov >= 360.0 || (delta >= -half && delta < half))
            out.push_back(b);
    }
    if (out.empty())
        out.push_back(heading_bin(yaw, bins));
    return out;
}

/// Mean of the angular bins visible through a `theta_fov` window centred on `yaw`.
inline std::vector<float> fov_window(const PanoramaView& pano, double theta_fov, double yaw)
{
    if (pano.bins < 1 || pano.values.size() != pano.bins * pano.width)
        throw Error("fov_window: malformed panorama");
    const auto selected = fov_bins(pano.bins, theta_fov, yaw);
    std::vector<double> acc(pano.width, 0.0);
    for (std::size_t b : selected) {
        const auto values = pano.bin(b);
        for (std::size_t i = 0; i < pano.width; ++i)
            acc[i] += values[i];
    }
    std::vector<float> out(pano.width);
    const double inv = 1.0 / static_cast<double>(selected.size());
    for (std::size_t i = 0; i < pano.width; ++i)
        out[i] = static_cast<float>(acc[i] * inv);
    return out;
}

/// Street-branch input projection: the pooled window broadcast across all
/// angular blocks, so street and satellite inputs share one width.
inline std::vector<float> street_input(const PanoramaView& pano, double theta_fov, double yaw)
{
    const auto pooled = fov_window(pano, theta_fov, yaw);
    std::vector<float> out;
    out.reserve(pano.bins * pano.width);
    for (std::size_t b = 0; b < pano.bins; ++b)
        out.insert(out.end(), pooled.begin(), pooled.end());
    return out;
}

/// Per-node satellite vectors and streetview panoramas, keyed by node id.
struct FeatureSet {
    std::size_t dim = 0;
    std::size_t bins = 0;
    std::size_t captures = 0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::string> node_ids;  // sorted
    std::vector<float> sat;             // node × dim
    std::vector<float> street;          // node × capture × dim

    std::size_t width() const { return bins == 0 ? 0 : dim / bins; }
    std::size_t size() const { return node_ids.size(); }

    void reindex()
    {
        rows_.clear();
        for (std::size_t i = 0; i < node_ids.size(); ++i)
            rows_.emplace(node_ids[i], i);
    }

    bool contains(const std::string& id) const { return rows_.count(id) != 0; }

    std::size_t row_of(const std::string& id) const
    {
        const auto it = rows_.find(id);
        if (it == rows_.end())
            throw Error("feature set has no entry for node \"" + id + "\"");
        return it->second;
    }

    std::span<const float> satellite(std::size_t row) const
    {
        return std::span<const float>(sat).subspan(row * dim, dim);
    }

    PanoramaView panorama(std::size_t row, std::size_t capture) const
    {
        if (capture >= captures)
            throw Error("capture index " + std::to_string(capture) + " out of range");
        return {std::span<const float>(street).subspan((row * captures + capture) * dim, dim), bins, width()};
    }

    /// Feature rows for every node of `graph`, in node-index order.
    std::vector<std::size_t> rows_for(const CityGraph& graph) const
    {
        std::vector<std::size_t> out;
        out.reserve(graph.size());
        for (const auto& rec : graph.nodes())
            out.push_back(row_of(rec.feature_ref()));
        return out;
    }

    friend bool operator==(const FeatureSet& a, const FeatureSet& b)
    {
        return a.dim == b.dim && a.bins == b.bins && a.captures == b.captures && a.noise_sigma == b.noise_sigma &&
               a.seed == b.seed && a.node_ids == b.node_ids && a.sat == b.sat && a.street == b.street;
    }

private:
    std::unordered_map<std::string, std::size_t> rows_;
};

struct CityParams {
    std::size_t n_nodes = 400;
    double jitter = 0.15;      // fraction of spacing
    double drop_prob = 0.1;
    GeoCoord origin{51.5, -0.12};
    double spacing_m = 80.0;
    std::uint64_t seed = 0;
    std::string name = "synthetic";
};

/// Jittered grid city with random road closures. Dropped roads that would
/// disconnect the graph are re-inserted.
inline CityGraph generate_city(const CityParams& p)
{
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(p.n_nodes))));
    if (p.n_nodes < 9 || side * side != p.n_nodes)
        throw Error("generate_city: n_nodes must be a perfect square of at least 9, got " +
                    std::to_string(p.n_nodes));
    if (!(p.drop_prob >= 0.0 && p.drop_prob < 0.5))
        throw Error("generate_city: drop_prob must lie in [0, 0.5)");
    if (!(p.jitter >= 0.0 && p.jitter < 0.5))
        throw Error("generate_city: jitter must lie in [0, 0.5)");
    if (!(p.spacing_m > 0.0))
        throw Error("generate_city: spacing must be positive");

    constexpr double kMetresPerDegree = 111320.0;
    const double dlat = p.spacing_m / kMetresPerDegree;
    const double dlon = p.spacing_m / (kMetresPerDegree * std::cos(p.origin.lat * kDegToRad));

    Rng rng = make_rng(p.seed, "city");
    std::uniform_real_distribution<double> offset(-p.jitter, p.jitter);
    std::uniform_real_distribution<double> yaw(-180.0, 180.0);

    const std::size_t digits = std::max<std::size_t>(4, std::to_string(p.n_nodes - 1).size());
    auto make_id = [&](std::size_t i) {
        std::string s = std::to_string(i);
        return "n" + std::string(digits - s.size(), '0') + s;
    };

    std::vector<NodeRecord> nodes;
    nodes.reserve(p.n_nodes);
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            NodeRecord rec;
            rec.id = make_id(r * side + c);
            const double jy = p.jitter > 0.0 ? offset(rng) : 0.0;
            const double jx = p.jitter > 0.0 ? offset(rng) : 0.0;
            rec.location = GeoCoord::make(p.origin.lat + (static_cast<double>(r) + jy) * dlat,
                                          p.origin.lon + (static_cast<double>(c) + jx) * dlon);
            rec.yaw = yaw(rng);
            nodes.push_back(std::move(rec));
        }
    }

    std::vector<std::pair<std::size_t, std::size_t>> grid;
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            const std::size_t i = r * side + c;
            if (c + 1 < side)
                grid.emplace_back(i, i + 1);
            if (r + 1 < side)
                grid.emplace_back(i, i + side);
        }
    }

    std::bernoulli_distribution drop(p.drop_prob);
    std::vector<std::pair<std::size_t, std::size_t>> kept, dropped;
    for (const auto& e : grid)
        (p.drop_prob > 0.0 && drop(rng) ? dropped : kept).push_back(e);

    std::vector<std::size_t> parent(p.n_nodes);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    };
    std::size_t components = p.n_nodes;
    for (const auto& [a, b] : kept) {
        const auto ra = find(a), rb = find(b);
        if (ra != rb) {
            parent[ra] = rb;
            --components;
        }
    }
    std::shuffle(dropped.begin(), dropped.end(), rng);
    for (const auto& [a, b] : dropped) {
        if (components == 1)
            break;
        const auto ra = find(a), rb = find(b);
        if (ra != rb) {
            parent[ra] = rb;
            --components;
            kept.emplace_back(a, b);
        }
    }

    std::vector<EdgeSpec> edges;
    edges.reserve(kept.size());
    for (const auto& [a, b] : kept)
        edges.push_back({nodes[a].id, nodes[b].id});
    return CityGraph::build(p.name, std::move(nodes), edges);
}

struct FeatureParams {
    std::size_t dim = 768;
    std::size_t bins = 8;
    std::size_t captures = 5;
    double noise_sigma = 0.0;
    double road_gain = 0.5;
    std::size_t latent_dim = 32;
    std::size_t appearance_types = 32;  // 0 = every node has its own appearance
    double identity_scale = 0.3;        // weight of the node-specific latent part
    double capture_shared = 0.5;        // share of capture noise variance common to all bins
    std::uint64_t seed = 0;
};

/// Cross-view feature synthesis standing in for the image backbones.
///
/// Each node draws a low-dimensional latent z (one of a few shared appearance
/// types plus a weaker node-specific part, so single junctions alias), lifted
/// to width d by a fixed random projection M whose rows split into one
/// d/bins block per angular sector. The satellite vector is M z plus a shared
/// road signature in every sector that holds a road, plus noise. Each
/// streetview capture is the same sector layout seen from the ground with
/// independent per-capture noise. All draws for a node come from streams keyed
/// by the city name and its id, so a node's features do not depend on the
/// rest of the graph.
inline FeatureSet generate_features(const CityGraph& graph, const FeatureParams& p)
{
    if (p.dim < 8)
        throw Error("generate_features: dimension must be at least 8");
    if (p.bins < 4)
        throw Error("generate_features: need at least 4 angular bins");
    if (p.dim % p.bins != 0)
        throw Error("generate_features: dimension " + std::to_string(p.dim) + " not divisible by " +
                    std::to_string(p.bins) + " bins");
    if (p.captures < 1)
        throw Error("generate_features: need at least one capture");
    if (p.latent_dim < 1)
        throw Error("generate_features: latent_dim must be at least 1");
    if (!(p.capture_shared >= 0.0 && p.capture_shared <= 1.0))
        throw Error("generate_features: capture_shared must lie in [0, 1]");
    if (!(p.identity_scale >= 0.0))
        throw Error("generate_features: identity_scale must be non-negative");
    if (!(p.noise_sigma >= 0.0))
        throw Error("generate_features: noise_sigma must be non-negative");

    FeatureSet fs;
    fs.dim = p.dim;
    fs.bins = p.bins;
    fs.captures = p.captures;
    fs.noise_sigma = p.noise_sigma;
    fs.seed = p.seed;
    const std::size_t width = p.dim / p.bins;

    std::vector<float> road(width);
    {
        Rng rng = make_rng(p.seed, "road_signature");
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& v : road)
            v = static_cast<float>(p.road_gain * normal(rng));
    }

    std::vector<double> projection(p.dim * p.latent_dim);
    {
        Rng rng = make_rng(p.seed, "projection");
        std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(p.latent_dim)));
        for (auto& v : projection)
            v = normal(rng);
    }

    std::vector<double> codebook(p.appearance_types * p.latent_dim);
    {
        Rng rng = make_rng(p.seed, "codebook");
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& v : codebook)
            v = normal(rng);
    }

    for (const auto& rec : graph.nodes())
        fs.node_ids.push_back(rec.id);
    fs.sat.resize(graph.size() * p.dim);
    fs.street.resize(graph.size() * p.captures * p.dim);

    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> latent(p.dim);
    std::vector<double> z(p.latent_dim);
    std::vector<double> nuisance(width);
    for (NodeIndex n = 0; n < graph.size(); ++n) {
        const auto& rec = graph.node(n);
        if (graph.degree(n) != rec.neighbour_bearings.size())
            throw Error("generate_features: node \"" + rec.id + "\" has no bearings");
        const std::uint64_t key = fnv1a(graph.name() + "/" + rec.id);

        std::vector<char> has_road(p.bins, 0);
        for (double b : rec.neighbour_bearings)
            has_road[heading_bin(b, p.bins)] = 1;

        Rng rng = make_rng(p.seed, "node", key);
        if (p.appearance_types > 0) {
            const double* c = codebook.data() + uniform_index(rng, p.appearance_types) * p.latent_dim;
            for (std::size_t i = 0; i < z.size(); ++i)
                z[i] = c[i] + p.identity_scale * normal(rng);
        } else {
            for (auto& v : z)
                v = normal(rng);
        }
        for (std::size_t b = 0; b < p.bins; ++b) {
            for (std::size_t i = 0; i < width; ++i) {
                const double* row = projection.data() + (b * width + i) * p.latent_dim;
                latent[b * width + i] = std::inner_product(z.begin(), z.end(), row, 0.0) + (has_road[b] ? road[i] : 0.0);
            }
        }
        float* sat = fs.sat.data() + n * p.dim;
        for (std::size_t i = 0; i < p.dim; ++i)
            sat[i] = static_cast<float>(latent[i] + p.noise_sigma * normal(rng));

        for (std::size_t c = 0; c < p.captures; ++c) {
            float* street = fs.street.data() + (n * p.captures + c) * p.dim;
            if (p.noise_sigma == 0.0) {
                std::copy(latent.begin(), latent.end(), street);
                continue;
            }
            // capture-wide part (lighting, season) shared by all bins, plus per-value noise
            Rng crng = make_rng(p.seed, "capture", key * 31 + c);
            for (auto& v : nuisance)
                v = normal(crng);
            const double shared = std::sqrt(p.capture_shared);
            const double own = std::sqrt(1.0 - p.capture_shared);
            for (std::size_t i = 0; i < p.dim; ++i)
                street[i] = static_cast<float>(latent[i] +
                                               p.noise_sigma * (shared * nuisance[i % width] + own * normal(crng)));
        }
    }
    fs.reindex();
    return fs;
}

} // namespace graphloc

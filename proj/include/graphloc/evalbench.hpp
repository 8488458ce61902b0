#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "graphloc/bvm.hpp"
#include "graphloc/metrics.hpp"
#include "graphloc/pipeline.hpp"
#include "graphloc/retrieval.hpp"
#include "graphloc/train.hpp"

namespace graphloc {

struct BenchmarkConfig {
    std::string city;
    std::size_t walk_length = 4;
    std::vector<double> fovs{360.0};
    std::vector<FilterMode> modes{FilterMode::none};
    std::vector<std::size_t> k_list{1, 5, 10};
    std::vector<double> percent_list{1.0};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::size_t bins = 8;
    std::size_t over_fetch = 4;

    void validate() const
    {
        if (walk_length < 1)
            throw Error("benchmark: walk_length must be at least 1");
        if (k_list.empty() || seeds.empty() || fovs.empty() || modes.empty())
            throw Error("benchmark: k_list, seeds, fovs and modes must be non-empty");
        for (auto k : k_list) {
            if (k < 1)
                throw Error("benchmark: k must be at least 1");
        }
        for (double p : percent_list) {
            if (!(p > 0.0 && p <= 100.0))
                throw Error("benchmark: percent must lie in (0, 100]");
        }
        if (bins < 2)
            throw Error("benchmark: need at least 2 bearing bins");
        if (over_fetch < 1)
            throw Error("benchmark: over_fetch must be at least 1");
        for (double fov : fovs) {
            if (!(fov > 0.0))
                throw Error("benchmark: fov must be positive");
            for (auto m : modes) {
                if (m != FilterMode::none && fov < 180.0)
                    throw Error("benchmark: bearing vector matching is unavailable below 180 degrees FOV (requested " +
                                std::to_string(static_cast<int>(fov)) + ")");
            }
        }
    }
};

struct ReportRow {
    std::string city;
    std::size_t walk_length = 0;
    double fov = 360.0;
    FilterMode mode = FilterMode::none;
    std::size_t bins = 0;
    std::optional<std::uint64_t> seed;  // empty = mean over seeds
    std::vector<double> recall_k;
    std::vector<double> recall_pct;
    std::size_t n_queries = 0;
    double mean_candidates = 0.0;
    std::size_t truth_filtered = 0;  // queries whose true node was removed by the filter

    double recall_at(std::size_t i) const { return recall_k.at(i); }
};

struct ReportTable {
    std::vector<std::size_t> k_list;
    std::vector<double> percent_list;
    std::vector<ReportRow> rows;

    void append(const ReportTable& other)
    {
        if (rows.empty()) {
            k_list = other.k_list;
            percent_list = other.percent_list;
        }
        rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    }

    /// Rows averaged over seeds (seed column empty).
    std::vector<const ReportRow*> mean_rows() const
    {
        std::vector<const ReportRow*> out;
        for (const auto& r : rows) {
            if (!r.seed)
                out.push_back(&r);
        }
        return out;
    }

    const ReportRow& find(double fov, FilterMode mode, std::optional<std::uint64_t> seed = std::nullopt,
                          std::optional<std::size_t> walk_length = std::nullopt) const
    {
        for (const auto& r : rows) {
            if (r.fov == fov && r.mode == mode && r.seed == seed && (!walk_length || r.walk_length == *walk_length))
                return r;
        }
        throw Error("report has no row for the requested configuration");
    }

    std::string to_csv() const
    {
        std::ostringstream out;
        out << "city,walk_length,fov,mode,V,seed";
        for (auto k : k_list)
            out << ",recall@" << k;
        for (double p : percent_list)
            out << ",recall@" << format_number(p) << "pct";
        out << ",n_queries,mean_candidates\n";
        for (const auto& r : rows) {
            out << r.city << ',' << r.walk_length << ',' << format_number(r.fov) << ',' << to_string(r.mode) << ','
                << r.bins << ',' << (r.seed ? std::to_string(*r.seed) : std::string("mean"));
            for (double v : r.recall_k)
                out << ',' << fixed(v, 6);
            for (double v : r.recall_pct)
                out << ',' << fixed(v, 6);
            out << ',' << r.n_queries << ',' << fixed(r.mean_candidates, 3) << '\n';
        }
        return out.str();
    }

    /// Plain-text table of the seed-averaged rows, one block per FOV with the
    /// filter modes as rows and recalls in percent.
    std::string to_text() const
    {
        std::ostringstream out;
        std::vector<double> fovs;
        for (const auto* r : mean_rows()) {
            if (std::find(fovs.begin(), fovs.end(), r->fov) == fovs.end())
                fovs.push_back(r->fov);
        }
        for (double fov : fovs) {
            out << "FOV " << format_number(fov) << " deg\n";
            out << pad("Model", 16);
            for (auto k : k_list)
                out << pad("Top-" + std::to_string(k), 10);
            for (double p : percent_list)
                out << pad("Top-" + format_number(p) + "%", 10);
            out << '\n';
            for (const auto* r : mean_rows()) {
                if (r->fov != fov)
                    continue;
                std::string label = "L" + std::to_string(r->walk_length);
                label += r->mode == FilterMode::none ? "" : (r->mode == FilterMode::bvm ? " +B" : " +YB");
                out << pad(label, 16);
                for (double v : r->recall_k)
                    out << pad(fixed(100.0 * v, 2), 10);
                for (double v : r->recall_pct)
                    out << pad(fixed(100.0 * v, 2), 10);
                out << '\n';
            }
            out << '\n';
        }
        return out.str();
    }

    static std::string fixed(double v, int digits)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*f", digits, v);
        return buf;
    }

    static std::string format_number(double v)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%g", v);
        return buf;
    }

private:
    static std::string pad(const std::string& s, std::size_t width)
    {
        return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
    }
};

/// Full inference protocol on a held-out graph: embed every exhaustive
/// reference walk through the satellite branch, index them, embed one sampled
/// query walk per node through the street branch, retrieve an over-fetched
/// candidate pool, filter it with bearing vectors and score Top-K recalls at
/// node level. One row per (seed, fov, mode), followed by seed-mean rows.
template <class S>
ReportTable run_benchmark(const CityGraph& graph, const FeatureSet& fs, const ModelParams<S>& params,
                          const BenchmarkConfig& cfg)
{
    cfg.validate();
    if (graph.empty())
        throw Error("benchmark: empty test graph");

    const auto refs = embed_references(params, graph, fs, cfg.walk_length);
    const auto index = build_index(refs.records());

    std::unordered_map<NodeIndex, BearingVector> ref_bvs;
    std::unordered_set<NodeIndex> db_nodes;
    for (const auto& w : refs.walks)
        db_nodes.insert(w.target());
    for (NodeIndex n = 0; n < graph.size(); ++n)
        ref_bvs.emplace(n, quantise_bearings(graph.node(n).neighbour_bearings, cfg.bins, 0.0));

    ReportTable table;
    table.k_list = cfg.k_list;
    table.percent_list = cfg.percent_list;
    std::vector<std::size_t> pct_k;
    for (double p : cfg.percent_list)
        pct_k.push_back(percent_k(p, db_nodes.size()));
    std::size_t k_max = *std::max_element(cfg.k_list.begin(), cfg.k_list.end());
    for (auto k : pct_k)
        k_max = std::max(k_max, k);
    const std::size_t pool_nodes = k_max * cfg.over_fetch;
    const std::size_t walks_per_node = std::max<std::size_t>(1, refs.walks.size() / std::max<std::size_t>(1, db_nodes.size()));

    for (std::uint64_t seed : cfg.seeds) {
        const auto queries = sample_queries(graph, cfg.walk_length, fs.captures, seed);
        QueryTruth truth;
        for (std::size_t q = 0; q < queries.walks.size(); ++q)
            truth[q] = queries.walks[q].target();

        for (double fov : cfg.fovs) {
            const auto emb = embed_queries(params, graph, fs, queries.walks, queries.captures, fov);
            std::vector<RetrievalResult> pools;
            std::vector<double> q(static_cast<std::size_t>(emb.rows()));
            for (Eigen::Index i = 0; i < emb.cols(); ++i) {
                for (Eigen::Index d = 0; d < emb.rows(); ++d)
                    q[static_cast<std::size_t>(d)] = emb(d, i);
                pools.push_back(index.query_distinct_nodes(q, pool_nodes, pool_nodes * walks_per_node,
                                                           static_cast<WalkId>(i)));
            }
            const auto mask = visible_mask(cfg.bins, fov);

            for (FilterMode mode : cfg.modes) {
                std::vector<RetrievalResult> filtered;
                filtered.reserve(pools.size());
                ReportRow row;
                row.city = cfg.city.empty() ? graph.name() : cfg.city;
                row.walk_length = cfg.walk_length;
                row.fov = fov;
                row.mode = mode;
                row.bins = cfg.bins;
                row.seed = seed;
                row.n_queries = pools.size();
                double candidates = 0.0;
                for (std::size_t i = 0; i < pools.size(); ++i) {
                    const Walk& walk = queries.walks[i];
                    const double yaw = arrival_heading(graph, walk);
                    const auto query_bv =
                        query_bearing_vector(graph.node(walk.target()).neighbour_bearings, cfg.bins, yaw, fov);
                    auto kept = filter_retrievals(pools[i], query_bv, ref_bvs, mode, yaw, pools[i].ranked.size(), mask);
                    const auto before = node_ranking(pools[i]);
                    const auto after = node_ranking(kept);
                    candidates += static_cast<double>(after.size());
                    const NodeIndex t = walk.target();
                    if (std::find(before.begin(), before.end(), t) != before.end() &&
                        std::find(after.begin(), after.end(), t) == after.end())
                        ++row.truth_filtered;
                    filtered.push_back(std::move(kept));
                }
                row.mean_candidates = candidates / static_cast<double>(std::max<std::size_t>(1, pools.size()));
                for (auto k : cfg.k_list)
                    row.recall_k.push_back(recall_at_k(filtered, truth, k));
                for (auto k : pct_k)
                    row.recall_pct.push_back(recall_at_k(filtered, truth, k));
                table.rows.push_back(std::move(row));
            }
        }
    }

    // Seed means, one per (fov, mode) in request order.
    for (double fov : cfg.fovs) {
        for (FilterMode mode : cfg.modes) {
            ReportRow mean;
            std::size_t count = 0;
            for (const auto& r : table.rows) {
                if (!r.seed || r.fov != fov || r.mode != mode)
                    continue;
                if (count == 0) {
                    mean = r;
                    mean.seed.reset();
                    mean.n_queries = 0;
                    mean.truth_filtered = 0;
                    mean.mean_candidates = 0.0;
                    std::fill(mean.recall_k.begin(), mean.recall_k.end(), 0.0);
                    std::fill(mean.recall_pct.begin(), mean.recall_pct.end(), 0.0);
                }
                ++count;
                for (std::size_t i = 0; i < r.recall_k.size(); ++i)
                    mean.recall_k[i] += r.recall_k[i];
                for (std::size_t i = 0; i < r.recall_pct.size(); ++i)
                    mean.recall_pct[i] += r.recall_pct[i];
                mean.n_queries += r.n_queries;
                mean.truth_filtered += r.truth_filtered;
                mean.mean_candidates += r.mean_candidates;
            }
            const double c = static_cast<double>(count);
            for (auto& v : mean.recall_k)
                v /= c;
            for (auto& v : mean.recall_pct)
                v /= c;
            mean.mean_candidates /= c;
            table.rows.push_back(std::move(mean));
        }
    }
    return table;
}

/// Held-out evaluation data for the ablation sweeps.
struct AblationData {
    const GraphSplit& split;
    const FeatureSet& train_features;
    const CityGraph& test_graph;
    const FeatureSet& test_features;
};

/// Retrains and benchmarks once per walk length.
inline ReportTable ablate_walk_length(const AblationData& data, TrainConfig train_cfg, BenchmarkConfig bench_cfg,
                                      const std::vector<std::size_t>& lengths = {1, 2, 3, 4, 5})
{
    ReportTable out;
    for (auto len : lengths) {
        train_cfg.walk_length = len;
        bench_cfg.walk_length = len;
        const auto trained = train(data.split, data.train_features, train_cfg);
        out.append(run_benchmark(data.test_graph, data.test_features, trained.params, bench_cfg));
    }
    return out;
}

/// Retrains with only the first c streetview captures per node, for each c.
inline ReportTable ablate_captures(const AblationData& data, TrainConfig train_cfg, BenchmarkConfig bench_cfg,
                                   const std::vector<std::size_t>& captures = {1, 2, 3, 4, 5})
{
    ReportTable out;
    for (auto c : captures) {
        train_cfg.captures = c;
        const auto trained = train(data.split, data.train_features, train_cfg);
        auto table = run_benchmark(data.test_graph, data.test_features, trained.params, bench_cfg);
        for (auto& r : table.rows)
            r.city += "/captures=" + std::to_string(c);
        out.append(table);
    }
    return out;
}

/// Retrains and evaluates at each field of view.
inline ReportTable ablate_fov(const AblationData& data, TrainConfig train_cfg, BenchmarkConfig bench_cfg,
                              const std::vector<double>& fovs = {360.0, 180.0, 90.0})
{
    ReportTable out;
    const auto modes = bench_cfg.modes;
    for (double fov : fovs) {
        train_cfg.fov = fov;
        bench_cfg.fovs = {fov};
        bench_cfg.modes.clear();
        for (auto m : modes) {
            if (m == FilterMode::none || fov >= 180.0)
                bench_cfg.modes.push_back(m);
        }
        const auto trained = train(data.split, data.train_features, train_cfg);
        out.append(run_benchmark(data.test_graph, data.test_features, trained.params, bench_cfg));
    }
    return out;
}

} // namespace graphloc

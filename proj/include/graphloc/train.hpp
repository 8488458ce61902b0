#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "graphloc/geograph.hpp"
#include "graphloc/gnn.hpp"
#include "graphloc/metrics.hpp"
#include "graphloc/optim.hpp"
#include "graphloc/pipeline.hpp"
#include "graphloc/synthfeat.hpp"
#include "graphloc/walker.hpp"

namespace graphloc {

struct TrainConfig {
    int epochs = 100;
    double learning_rate = 1e-4;
    double margin = 0.2;
    std::size_t walk_length = 4;
    std::size_t batch_size = 32;
    double weight_decay = 0.01;
    int plateau_patience = 5;
    double plateau_factor = 0.5;
    std::vector<std::size_t> layer_dims{768, 256, 64};
    Aggregator aggregator = Aggregator::mean;
    double fov = 360.0;
    std::size_t captures = 0;  // captures per node used for training; 0 = all
    double val_fraction = 1.0 / 9.0;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (epochs < 0)
            throw Error("epochs must be non-negative");
        if (!(learning_rate >= 0.0))
            throw Error("learning_rate must be non-negative");
        if (!(margin > 0.0))
            throw Error("margin must be positive");
        if (walk_length < 1)
            throw Error("walk_length must be at least 1");
        if (batch_size < 1)
            throw Error("batch_size must be at least 1");
        if (plateau_patience < 0 || !(plateau_factor > 0.0 && plateau_factor <= 1.0))
            throw Error("invalid plateau scheduler settings");
        if (layer_dims.size() < 2)
            throw Error("layer_dims needs at least two entries");
        if (!(fov > 0.0))
            throw Error("fov must be positive");
    }
};

struct EpochRecord {
    int epoch = 0;  // 0 = initial parameters, before any update
    double train_loss = 0.0;
    double val_top1 = 0.0;
    double learning_rate = 0.0;
};

struct TrainResult {
    ModelParams<float> params;  // parameters at the best validation Top-1, latest on ties
    std::vector<EpochRecord> log;
    int best_epoch = 0;
};

namespace detail {

struct TripletWalks {
    std::vector<Walk> anchors;
    std::vector<CaptureChoice> captures;
    std::vector<Walk> negatives;
};

inline TripletWalks sample_triplets(const CityGraph& graph, std::span<const NodeIndex> targets,
                                    std::size_t walk_length, std::size_t captures, Rng& rng)
{
    TripletWalks t;
    for (NodeIndex target : targets) {
        t.anchors.push_back(sample_walk(graph, target, walk_length, rng));
        t.captures.push_back(choose_captures(t.anchors.back(), captures, rng));
        NodeIndex other = target;
        if (graph.size() > 1) {
            other = uniform_index(rng, graph.size() - 1);
            if (other >= target)
                ++other;
        }
        t.negatives.push_back(sample_walk(graph, other, walk_length, rng));
    }
    return t;
}

template <class S>
TripletBatch<S> make_batch(const CityGraph& graph, const FeatureSet& fs, const std::vector<std::size_t>& rows,
                           const TripletWalks& t, double fov)
{
    return TripletBatch<S>{street_block<S>(graph, fs, rows, t.anchors, t.captures, fov),
                           satellite_block<S>(fs, rows, t.anchors), satellite_block<S>(fs, rows, t.negatives)};
}

} // namespace detail

/// Trains both branches with walk triplets: street walk as anchor, the same
/// walk's satellite features as positive, a satellite walk ending at another
/// node as negative. One triplet per training node per epoch, AdamW updates,
/// learning rate reduced on validation Top-1 plateaus. Fully determined by
/// `cfg.seed`.
inline TrainResult train(const GraphSplit& split, const FeatureSet& fs, const TrainConfig& cfg,
                         const std::function<void(const EpochRecord&)>& on_epoch = {})
{
    cfg.validate();
    const CityGraph& graph = split.train;
    if (graph.empty())
        throw Error("train: empty training graph");
    if (cfg.layer_dims.front() != fs.dim)
        throw Error("train: layer_dims[0]=" + std::to_string(cfg.layer_dims.front()) +
                    " does not match feature dimension " + std::to_string(fs.dim));
    const std::size_t captures = cfg.captures == 0 ? fs.captures : std::min(cfg.captures, fs.captures);
    const auto rows = fs.rows_for(graph);
    const auto margin = static_cast<float>(cfg.margin);
    const std::uint64_t val_seed = derive_seed(cfg.seed, "validation");

    TrainResult result;
    ModelParams<float> params = ModelParams<float>::init(cfg.layer_dims, cfg.aggregator, derive_seed(cfg.seed, "init"));
    AdamW<float> opt(params, {0.9, 0.999, 1e-8, cfg.weight_decay});
    PlateauScheduler sched(cfg.learning_rate, cfg.plateau_patience, cfg.plateau_factor);

    double best_val = 0.0;
    std::vector<NodeIndex> order(graph.size());
    std::iota(order.begin(), order.end(), NodeIndex{0});

    auto validate = [&](const ModelParams<float>& p) {
        return top1_recall(p, split.validation, fs, cfg.walk_length, cfg.fov, val_seed);
    };

    {
        Rng rng = make_rng(cfg.seed, "epoch", 0);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - start);
            const auto t = detail::sample_triplets(graph, std::span<const NodeIndex>(order).subspan(start, n),
                                                   cfg.walk_length, captures, rng);
            total += static_cast<double>(batch_loss(detail::make_batch<float>(graph, fs, rows, t, cfg.fov), params,
                                                    margin)) *
                     static_cast<double>(n);
        }
        EpochRecord rec{0, total / static_cast<double>(order.size()), validate(params), sched.lr()};
        sched.observe(rec.val_top1);
        best_val = rec.val_top1;
        result.params = params;
        result.log.push_back(rec);
        if (on_epoch)
            on_epoch(rec);
    }

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng = make_rng(cfg.seed, "epoch", static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);
        const double lr = sched.lr();
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - start);
            const auto t = detail::sample_triplets(graph, std::span<const NodeIndex>(order).subspan(start, n),
                                                   cfg.walk_length, captures, rng);
            const auto grads = backward(detail::make_batch<float>(graph, fs, rows, t, cfg.fov), params, margin);
            total += static_cast<double>(grads.loss) * static_cast<double>(n);
            opt.step(params, grads, lr);
        }
        EpochRecord rec{epoch, total / static_cast<double>(order.size()), validate(params), lr};
        sched.observe(rec.val_top1);
        // ties go to the later epoch; tiny validation sets saturate early
        if (rec.val_top1 >= best_val) {
            best_val = rec.val_top1;
            result.params = params;
            result.best_epoch = epoch;
        }
        result.log.push_back(rec);
        if (on_epoch)
            on_epoch(rec);
    }
    return result;
}

/// Splits `graph` into train/validation with cfg.val_fraction, then trains.
inline TrainResult train(const CityGraph& graph, const FeatureSet& fs, const TrainConfig& cfg)
{
    return train(split_graph(graph, cfg.val_fraction, derive_seed(cfg.seed, "split")), fs, cfg);
}

} // namespace graphloc

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graphloc/error.hpp"
#include "graphloc/rng.hpp"

namespace graphloc {

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class Aggregator { mean, sum };

inline const char* to_string(Aggregator a) { return a == Aggregator::mean ? "mean" : "sum"; }

inline Aggregator aggregator_from_string(const std::string& s)
{
    if (s == "mean")
        return Aggregator::mean;
    if (s == "sum")
        return Aggregator::sum;
    throw Error("unknown aggregator \"" + s + "\"");
}

template <class S>
struct LayerParams {
    Matrix<S> weights;  // d_out x d_in
    Vector<S> bias;     // d_out
};

template <class S>
using Branch = std::vector<LayerParams<S>>;

/// Two message-passing stacks with identical shapes and independent weights.
/// Hidden layers use ReLU, the output layer is linear.
template <class S>
struct ModelParams {
    std::vector<std::size_t> layer_dims;
    Aggregator aggregator = Aggregator::mean;
    Branch<S> street;
    Branch<S> sat;

    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t output_dim() const { return layer_dims.back(); }
    std::size_t layers() const { return layer_dims.size() - 1; }

    static ModelParams init(std::vector<std::size_t> dims, Aggregator agg, std::uint64_t seed)
    {
        if (dims.size() < 2)
            throw Error("layer schedule needs at least an input and an output width");
        for (auto d : dims) {
            if (d == 0)
                throw Error("layer widths must be positive");
        }
        ModelParams m;
        m.layer_dims = std::move(dims);
        m.aggregator = agg;
        m.street = init_branch(m.layer_dims, seed, "init_street");
        m.sat = init_branch(m.layer_dims, seed, "init_sat");
        return m;
    }

    template <class T>
    ModelParams<T> cast() const
    {
        ModelParams<T> out;
        out.layer_dims = layer_dims;
        out.aggregator = aggregator;
        auto conv = [](const Branch<S>& b) {
            Branch<T> r;
            for (const auto& l : b)
                r.push_back({l.weights.template cast<T>(), l.bias.template cast<T>()});
            return r;
        };
        out.street = conv(street);
        out.sat = conv(sat);
        return out;
    }

private:
    static Branch<S> init_branch(const std::vector<std::size_t>& dims, std::uint64_t seed, const char* stream)
    {
        Branch<S> branch;
        for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
            const auto d_in = static_cast<Eigen::Index>(dims[k]);
            const auto d_out = static_cast<Eigen::Index>(dims[k + 1]);
            const bool last = k + 2 == dims.size();
            const double limit = last ? std::sqrt(6.0 / static_cast<double>(d_in + d_out))
                                      : std::sqrt(6.0 / static_cast<double>(d_in));
            Rng rng = make_rng(seed, stream, k);
            std::uniform_real_distribution<double> u(-limit, limit);
            LayerParams<S> layer{Matrix<S>(d_out, d_in), Vector<S>::Zero(d_out)};
            for (Eigen::Index c = 0; c < d_in; ++c) {
                for (Eigen::Index r = 0; r < d_out; ++r)
                    layer.weights(r, c) = static_cast<S>(u(rng));
            }
            branch.push_back(std::move(layer));
        }
        return branch;
    }
};

/// A batch of walks laid out as consecutive feature columns. Walk w occupies
/// columns [offsets[w], offsets[w + 1]) in walk order, target last; the walk's
/// adjacency is its path graph.
template <class S>
struct WalkBlock {
    Matrix<S> features;
    std::vector<Eigen::Index> offsets{0};

    std::size_t walks() const { return offsets.size() - 1; }
    Eigen::Index target_column(std::size_t w) const { return offsets[w + 1] - 1; }
};

namespace detail {

inline Eigen::Index neighbourhood_size(Eigen::Index j, Eigen::Index len)
{
    return 1 + (j > 0 ? 1 : 0) + (j + 1 < len ? 1 : 0);
}

// AGG over each node's closed neighbourhood within its walk.
template <class S>
Matrix<S> aggregate(const Matrix<S>& h, const std::vector<Eigen::Index>& offsets, Aggregator agg)
{
    Matrix<S> x(h.rows(), h.cols());
    for (std::size_t w = 0; w + 1 < offsets.size(); ++w) {
        const Eigen::Index o = offsets[w];
        const Eigen::Index len = offsets[w + 1] - o;
        for (Eigen::Index j = 0; j < len; ++j) {
            auto col = x.col(o + j);
            col = h.col(o + j);
            if (j > 0)
                col += h.col(o + j - 1);
            if (j + 1 < len)
                col += h.col(o + j + 1);
            if (agg == Aggregator::mean)
                col /= static_cast<S>(neighbourhood_size(j, len));
        }
    }
    return x;
}

// Adjoint of aggregate().
template <class S>
Matrix<S> aggregate_adjoint(const Matrix<S>& dx, const std::vector<Eigen::Index>& offsets, Aggregator agg)
{
    Matrix<S> scaled = dx;
    if (agg == Aggregator::mean) {
        for (std::size_t w = 0; w + 1 < offsets.size(); ++w) {
            const Eigen::Index o = offsets[w];
            const Eigen::Index len = offsets[w + 1] - o;
            for (Eigen::Index j = 0; j < len; ++j)
                scaled.col(o + j) /= static_cast<S>(neighbourhood_size(j, len));
        }
    }
    // The path adjacency is symmetric, so the adjoint is a plain sum.
    return aggregate(scaled, offsets, Aggregator::sum);
}

template <class S>
struct BranchTrace {
    std::vector<Matrix<S>> aggregated;  // AGG input to layer k
    std::vector<Matrix<S>> preact;      // Omega^k * AGG + bias
    Matrix<S> output;
};

template <class S>
BranchTrace<S> forward_trace(const Branch<S>& branch, const WalkBlock<S>& block, Aggregator agg)
{
    if (branch.empty())
        throw Error("empty branch");
    if (block.features.rows() != branch.front().weights.cols())
        throw Error("dimension mismatch: walk features have " + std::to_string(block.features.rows()) +
                    " rows, first layer expects " + std::to_string(branch.front().weights.cols()));
    BranchTrace<S> t;
    const Matrix<S>* h = &block.features;
    for (std::size_t k = 0; k < branch.size(); ++k) {
        t.aggregated.push_back(aggregate(*h, block.offsets, agg));
        Matrix<S> z = branch[k].weights * t.aggregated.back();
        z.colwise() += branch[k].bias;
        t.preact.push_back(std::move(z));
        if (k + 1 < branch.size()) {
            t.output = t.preact.back().cwiseMax(S(0));
            h = &t.output;
        }
    }
    t.output = t.preact.back();
    return t;
}

template <class S>
Vector<S> normalise(const Vector<S>& v)
{
    const S n = std::max(v.norm(), static_cast<S>(1e-12));
    return v / n;
}

// Gradient of the loss w.r.t. the raw vector given the gradient w.r.t. v / |v|.
template <class S>
Vector<S> normalise_adjoint(const Vector<S>& raw, const Vector<S>& d_unit)
{
    const S n = std::max(raw.norm(), static_cast<S>(1e-12));
    const Vector<S> unit = raw / n;
    return (d_unit - unit * unit.dot(d_unit)) / n;
}

} // namespace detail

template <class S>
struct BranchOutput {
    Matrix<S> node_embeddings;  // d_out x walk length
    Vector<S> target;           // final-layer embedding of the walk's last node
};

/// Message passing over one walk: h^{k+1}_j = act(W^k AGG{h^k_u : u in N[j]} + b^k),
/// where N[j] is j with its walk predecessor and successor.
template <class S>
BranchOutput<S> forward_branch(const Branch<S>& branch, const Matrix<S>& walk_features, Aggregator agg)
{
    if (walk_features.cols() < 1)
        throw Error("walk has no nodes");
    WalkBlock<S> block{walk_features, {0, walk_features.cols()}};
    auto trace = detail::forward_trace(branch, block, agg);
    BranchOutput<S> out;
    out.target = trace.output.col(trace.output.cols() - 1);
    out.node_embeddings = std::move(trace.output);
    return out;
}

/// L2-normalised target embeddings, one column per walk.
template <class S>
Matrix<S> embed_block(const Branch<S>& branch, const WalkBlock<S>& block, Aggregator agg)
{
    const auto trace = detail::forward_trace(branch, block, agg);
    Matrix<S> out(trace.output.rows(), static_cast<Eigen::Index>(block.walks()));
    for (std::size_t w = 0; w < block.walks(); ++w)
        out.col(static_cast<Eigen::Index>(w)) = detail::normalise<S>(trace.output.col(block.target_column(w)));
    return out;
}

/// Hinged triplet loss on squared Euclidean distances.
template <class S>
S triplet_loss(const Vector<S>& anchor, const Vector<S>& positive, const Vector<S>& negative, S margin)
{
    const S gap = (anchor - positive).squaredNorm() - (anchor - negative).squaredNorm() + margin;
    return std::max(S(0), gap);
}

/// Anchors go through the street branch; positives and negatives through the
/// satellite branch. Triplet i is (anchor walk i, positive walk i, negative walk i).
template <class S>
struct TripletBatch {
    WalkBlock<S> anchors;
    WalkBlock<S> positives;
    WalkBlock<S> negatives;

    std::size_t size() const { return anchors.walks(); }
};

template <class S>
struct Gradients {
    Branch<S> street;
    Branch<S> sat;
    S loss = 0;              // mean triplet loss over the batch
    std::size_t active = 0;  // triplets with a positive hinge
};

namespace detail {

template <class S>
WalkBlock<S> concat_blocks(const WalkBlock<S>& a, const WalkBlock<S>& b)
{
    WalkBlock<S> out;
    out.features.resize(a.features.rows(), a.features.cols() + b.features.cols());
    out.features << a.features, b.features;
    out.offsets = a.offsets;
    for (std::size_t i = 1; i < b.offsets.size(); ++i)
        out.offsets.push_back(a.features.cols() + b.offsets[i]);
    return out;
}

template <class S>
Branch<S> backward_branch(const Branch<S>& branch, const WalkBlock<S>& block, const BranchTrace<S>& trace,
                          Matrix<S> d_output, Aggregator agg)
{
    Branch<S> grads(branch.size());
    for (std::size_t k = branch.size(); k-- > 0;) {
        Matrix<S> dz = std::move(d_output);
        if (k + 1 < branch.size())
            dz.array() *= (trace.preact[k].array() > S(0)).template cast<S>();
        grads[k].weights.noalias() = dz * trace.aggregated[k].transpose();
        grads[k].bias = dz.rowwise().sum();
        if (k > 0) {
            Matrix<S> dx = branch[k].weights.transpose() * dz;
            d_output = aggregate_adjoint(dx, block.offsets, agg);
        }
    }
    return grads;
}

} // namespace detail

/// Mean triplet loss over the batch and its gradient w.r.t. every weight and
/// bias of both branches.
template <class S>
Gradients<S> backward(const TripletBatch<S>& batch, const ModelParams<S>& params, S margin)
{
    const std::size_t n = batch.size();
    if (n == 0 || batch.positives.walks() != n || batch.negatives.walks() != n)
        throw Error("triplet batch is empty or unbalanced");

    const auto sat_block = detail::concat_blocks(batch.positives, batch.negatives);
    const auto street_trace = detail::forward_trace(params.street, batch.anchors, params.aggregator);
    const auto sat_trace = detail::forward_trace(params.sat, sat_block, params.aggregator);

    const Eigen::Index d = street_trace.output.rows();
    Matrix<S> d_street = Matrix<S>::Zero(d, street_trace.output.cols());
    Matrix<S> d_sat = Matrix<S>::Zero(d, sat_trace.output.cols());

    Gradients<S> g;
    const S inv_n = S(1) / static_cast<S>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Index ca = batch.anchors.target_column(i);
        const Eigen::Index cp = sat_block.target_column(i);
        const Eigen::Index cn = sat_block.target_column(n + i);
        const Vector<S> ra = street_trace.output.col(ca);
        const Vector<S> rp = sat_trace.output.col(cp);
        const Vector<S> rn = sat_trace.output.col(cn);
        const Vector<S> a = detail::normalise(ra), p = detail::normalise(rp), q = detail::normalise(rn);
        const S gap = (a - p).squaredNorm() - (a - q).squaredNorm() + margin;
        if (gap <= S(0))
            continue;
        g.loss += gap * inv_n;
        ++g.active;
        const Vector<S> da = (q - p) * (S(2) * inv_n);
        const Vector<S> dp = (p - a) * (S(2) * inv_n);
        const Vector<S> dq = (a - q) * (S(2) * inv_n);
        d_street.col(ca) += detail::normalise_adjoint(ra, da);
        d_sat.col(cp) += detail::normalise_adjoint(rp, dp);
        d_sat.col(cn) += detail::normalise_adjoint(rn, dq);
    }

    if (g.active == 0) {
        auto zeros = [](const Branch<S>& b) {
            Branch<S> z;
            for (const auto& l : b)
                z.push_back({Matrix<S>::Zero(l.weights.rows(), l.weights.cols()), Vector<S>::Zero(l.bias.size())});
            return z;
        };
        g.street = zeros(params.street);
        g.sat = zeros(params.sat);
        return g;
    }
    g.street = detail::backward_branch(params.street, batch.anchors, street_trace, std::move(d_street),
                                       params.aggregator);
    g.sat = detail::backward_branch(params.sat, sat_block, sat_trace, std::move(d_sat), params.aggregator);
    return g;
}

/// Mean batch loss only (no gradients).
template <class S>
S batch_loss(const TripletBatch<S>& batch, const ModelParams<S>& params, S margin)
{
    const Matrix<S> a = embed_block(params.street, batch.anchors, params.aggregator);
    const Matrix<S> p = embed_block(params.sat, batch.positives, params.aggregator);
    const Matrix<S> q = embed_block(params.sat, batch.negatives, params.aggregator);
    S total = 0;
    for (Eigen::Index i = 0; i < a.cols(); ++i)
        total += triplet_loss<S>(a.col(i), p.col(i), q.col(i), margin);
    return total / static_cast<S>(a.cols());
}

} // namespace graphloc

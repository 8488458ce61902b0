#pragma once

#include <span>
#include <vector>

#include "graphloc/geograph.hpp"
#include "graphloc/gnn.hpp"
#include "graphloc/retrieval.hpp"
#include "graphloc/synthfeat.hpp"
#include "graphloc/walker.hpp"

namespace graphloc {

/// Camera heading at walk position j: the direction of travel from the
/// previous node, or the node's stored yaw at the first position.
inline double walk_heading(const CityGraph& graph, const Walk& walk, std::size_t j)
{
    if (j > 0)
        return graph.bearing(walk.nodes[j - 1], walk.nodes[j]);
    return graph.node(walk.nodes[j]).yaw;
}

/// Vehicle heading when arriving at the walk's target.
inline double arrival_heading(const CityGraph& graph, const Walk& walk)
{
    return walk_heading(graph, walk, walk.length() - 1);
}

/// One capture index per walk position.
using CaptureChoice = std::vector<std::size_t>;

inline CaptureChoice choose_captures(const Walk& walk, std::size_t available, Rng& rng)
{
    CaptureChoice out(walk.length());
    for (auto& c : out)
        c = uniform_index(rng, available);
    return out;
}

namespace detail {

inline Eigen::Index total_columns(std::span<const Walk> walks)
{
    Eigen::Index n = 0;
    for (const auto& w : walks)
        n += static_cast<Eigen::Index>(w.length());
    return n;
}

template <class S>
void copy_column(Matrix<S>& m, Eigen::Index col, std::span<const float> values)
{
    for (std::size_t i = 0; i < values.size(); ++i)
        m(static_cast<Eigen::Index>(i), col) = static_cast<S>(values[i]);
}

} // namespace detail

/// Satellite features for each walk, laid out as a WalkBlock.
/// `rows` maps graph node indices to feature rows.
template <class S>
WalkBlock<S> satellite_block(const FeatureSet& fs, const std::vector<std::size_t>& rows, std::span<const Walk> walks)
{
    WalkBlock<S> block;
    block.features.resize(static_cast<Eigen::Index>(fs.dim), detail::total_columns(walks));
    Eigen::Index col = 0;
    for (const auto& w : walks) {
        for (NodeIndex n : w.nodes)
            detail::copy_column(block.features, col++, fs.satellite(rows[n]));
        block.offsets.push_back(col);
    }
    return block;
}

/// Streetview features for each walk: the chosen capture at every node,
/// windowed to `fov` around the walk heading at that node.
template <class S>
WalkBlock<S> street_block(const CityGraph& graph, const FeatureSet& fs, const std::vector<std::size_t>& rows,
                          std::span<const Walk> walks, std::span<const CaptureChoice> captures, double fov)
{
    if (captures.size() != walks.size())
        throw Error("street_block: one capture choice per walk required");
    WalkBlock<S> block;
    block.features.resize(static_cast<Eigen::Index>(fs.dim), detail::total_columns(walks));
    Eigen::Index col = 0;
    for (std::size_t w = 0; w < walks.size(); ++w) {
        const Walk& walk = walks[w];
        for (std::size_t j = 0; j < walk.length(); ++j) {
            const auto pano = fs.panorama(rows[walk.nodes[j]], captures[w].at(j));
            const auto input = street_input(pano, fov, walk_heading(graph, walk, j));
            detail::copy_column(block.features, col++, input);
        }
        block.offsets.push_back(col);
    }
    return block;
}

/// Exhaustive reference walks of a graph with their satellite embeddings.
struct ReferenceSet {
    std::vector<Walk> walks;       // walk id = position
    Matrix<float> embeddings;      // d_out x walks

    std::vector<EmbeddingRecord> records() const
    {
        std::vector<EmbeddingRecord> out;
        out.reserve(walks.size());
        for (std::size_t i = 0; i < walks.size(); ++i) {
            const auto col = embeddings.col(static_cast<Eigen::Index>(i));
            EmbeddingRecord r;
            r.vector.assign(col.data(), col.data() + col.size());
            r.walk_id = i;
            r.node = walks[i].target();
            out.push_back(std::move(r));
        }
        return out;
    }
};

inline std::vector<Walk> all_reference_walks(const CityGraph& graph, std::size_t walk_length)
{
    std::vector<Walk> walks;
    for (NodeIndex n = 0; n < graph.size(); ++n) {
        auto ws = reference_walks(graph, n, walk_length);
        walks.insert(walks.end(), ws.begin(), ws.end());
    }
    return walks;
}

inline constexpr std::size_t kEmbedChunk = 2048;

template <class S>
ReferenceSet embed_references(const ModelParams<S>& params, const CityGraph& graph, const FeatureSet& fs,
                              std::size_t walk_length)
{
    ReferenceSet refs;
    refs.walks = all_reference_walks(graph, walk_length);
    const auto rows = fs.rows_for(graph);
    refs.embeddings.resize(static_cast<Eigen::Index>(params.output_dim()),
                           static_cast<Eigen::Index>(refs.walks.size()));
    for (std::size_t start = 0; start < refs.walks.size(); start += kEmbedChunk) {
        const std::size_t n = std::min(kEmbedChunk, refs.walks.size() - start);
        const std::span<const Walk> chunk(refs.walks.data() + start, n);
        const auto block = satellite_block<S>(fs, rows, chunk);
        refs.embeddings.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) =
            embed_block(params.sat, block, params.aggregator).template cast<float>();
    }
    return refs;
}

/// Street-branch embeddings for a batch of query walks (one column each).
template <class S>
Matrix<float> embed_queries(const ModelParams<S>& params, const CityGraph& graph, const FeatureSet& fs,
                            std::span<const Walk> walks, std::span<const CaptureChoice> captures, double fov)
{
    const auto rows = fs.rows_for(graph);
    Matrix<float> out(static_cast<Eigen::Index>(params.output_dim()), static_cast<Eigen::Index>(walks.size()));
    for (std::size_t start = 0; start < walks.size(); start += kEmbedChunk) {
        const std::size_t n = std::min(kEmbedChunk, walks.size() - start);
        const auto block = street_block<S>(graph, fs, rows, walks.subspan(start, n), captures.subspan(start, n), fov);
        out.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) =
            embed_block(params.street, block, params.aggregator).template cast<float>();
    }
    return out;
}

template <class S>
Vector<float> embed_query(const ModelParams<S>& params, const CityGraph& graph, const Walk& walk,
                          const FeatureSet& fs, const CaptureChoice& captures, double fov)
{
    return embed_queries(params, graph, fs, std::span<const Walk>(&walk, 1),
                         std::span<const CaptureChoice>(&captures, 1), fov)
        .col(0);
}

} // namespace graphloc

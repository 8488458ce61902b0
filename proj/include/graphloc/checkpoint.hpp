#pragma once

#include <string>
#include <vector>

#include "graphloc/feature_io.hpp"
#include "graphloc/gnn.hpp"

namespace graphloc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Checkpoint layout (little-endian):
//   "SGBM", version u32, layer count L+1 u32, L+1 widths u32, aggregator u32
//   (0 = mean, 1 = sum), then for the street branch and then the satellite
//   branch, per layer: row-major f32 weights (d_out x d_in) followed by f32 bias.

inline void save_checkpoint(const ModelParams<float>& params, const std::string& path)
{
    binio::Writer w(path);
    w.magic("SGBM");
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(params.layer_dims.size()));
    for (auto d : params.layer_dims)
        w.u32(static_cast<std::uint32_t>(d));
    w.u32(params.aggregator == Aggregator::mean ? 0U : 1U);
    for (const auto* branch : {&params.street, &params.sat}) {
        for (const auto& layer : *branch) {
            const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = layer.weights;
            w.f32(std::span<const float>(rm.data(), static_cast<std::size_t>(rm.size())));
            w.f32(std::span<const float>(layer.bias.data(), static_cast<std::size_t>(layer.bias.size())));
        }
    }
    w.finish();
}

inline ModelParams<float> load_checkpoint(const std::string& path)
{
    binio::Reader r(path);
    r.expect_magic("SGBM");
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw Error("unsupported checkpoint version " + std::to_string(version));
    const auto count = r.u32();
    if (count < 2 || count > 64)
        throw Error("checkpoint \"" + path + "\": implausible layer count " + std::to_string(count));
    ModelParams<float> params;
    for (std::uint32_t i = 0; i < count; ++i) {
        params.layer_dims.push_back(r.u32());
        if (params.layer_dims.back() == 0 || params.layer_dims.back() > (1U << 20))
            throw Error("checkpoint \"" + path + "\": implausible layer width");
    }
    const auto agg = r.u32();
    if (agg > 1)
        throw Error("checkpoint \"" + path + "\": unknown aggregator code " + std::to_string(agg));
    params.aggregator = agg == 0 ? Aggregator::mean : Aggregator::sum;
    for (auto* branch : {&params.street, &params.sat}) {
        for (std::size_t k = 0; k + 1 < params.layer_dims.size(); ++k) {
            const auto d_in = static_cast<Eigen::Index>(params.layer_dims[k]);
            const auto d_out = static_cast<Eigen::Index>(params.layer_dims[k + 1]);
            Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(d_out, d_in);
            r.f32(std::span<float>(rm.data(), static_cast<std::size_t>(rm.size())));
            LayerParams<float> layer{rm, Vector<float>(d_out)};
            r.f32(std::span<float>(layer.bias.data(), static_cast<std::size_t>(d_out)));
            branch->push_back(std::move(layer));
        }
    }
    if (!r.at_end())
        throw Error("checkpoint \"" + path + "\": trailing bytes");
    return params;
}

} // namespace graphloc

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphloc/geograph.hpp"
#include "graphloc/synthfeat.hpp"

namespace graphloc {

namespace binio {

template <class T>
T to_little(T v)
{
    if constexpr (std::endian::native == std::endian::big) {
        std::array<unsigned char, sizeof(T)> bytes;
        std::memcpy(bytes.data(), &v, sizeof(T));
        std::reverse(bytes.begin(), bytes.end());
        std::memcpy(&v, bytes.data(), sizeof(T));
    }
    return v;
}

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path)
    {
        if (!out_)
            throw Error("cannot write \"" + path + "\"");
    }

    void magic(const char (&tag)[5]) { out_.write(tag, 4); }

    void u32(std::uint32_t v)
    {
        v = to_little(v);
        out_.write(reinterpret_cast<const char*>(&v), sizeof v);
    }

    void f32(std::span<const float> values)
    {
        if constexpr (std::endian::native == std::endian::little) {
            out_.write(reinterpret_cast<const char*>(values.data()),
                       static_cast<std::streamsize>(values.size() * sizeof(float)));
        } else {
            for (float v : values) {
                v = to_little(v);
                out_.write(reinterpret_cast<const char*>(&v), sizeof v);
            }
        }
    }

    void finish()
    {
        out_.flush();
        if (!out_)
            throw Error("write failed for \"" + path_ + "\"");
    }

private:
    std::ofstream out_;
    std::string path_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path)
    {
        if (!in_)
            throw Error("cannot open \"" + path + "\"");
    }

    void expect_magic(const char (&tag)[5])
    {
        char got[4] = {};
        read(got, 4);
        if (std::memcmp(got, tag, 4) != 0)
            throw Error("\"" + path_ + "\": bad magic, expected " + std::string(tag, 4));
    }

    std::uint32_t u32()
    {
        std::uint32_t v = 0;
        read(&v, sizeof v);
        return to_little(v);
    }

    void f32(std::span<float> out)
    {
        read(out.data(), out.size() * sizeof(float));
        if constexpr (std::endian::native == std::endian::big) {
            for (auto& v : out)
                v = to_little(v);
        }
    }

    bool at_end()
    {
        return in_.peek() == std::char_traits<char>::eof();
    }

private:
    void read(void* dst, std::size_t bytes)
    {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
        if (static_cast<std::size_t>(in_.gcount()) != bytes)
            throw Error("\"" + path_ + "\": truncated file");
    }

    std::ifstream in_;
    std::string path_;
};

} // namespace binio

inline constexpr std::uint32_t kFeatureFormatVersion = 1;

inline std::string feature_sidecar_path(const std::string& path) { return path + ".json"; }

/// Writes the feature binary (little-endian, magic "SGBF") plus the JSON
/// sidecar listing node ids in file order.
inline void save_features(const FeatureSet& fs, const std::string& path)
{
    binio::Writer w(path);
    w.magic("SGBF");
    w.u32(kFeatureFormatVersion);
    w.u32(static_cast<std::uint32_t>(fs.size()));
    w.u32(static_cast<std::uint32_t>(fs.dim));
    w.u32(static_cast<std::uint32_t>(fs.bins));
    w.u32(static_cast<std::uint32_t>(fs.captures));
    for (std::size_t row = 0; row < fs.size(); ++row) {
        w.f32(fs.satellite(row));
        w.f32(std::span<const float>(fs.street).subspan(row * fs.captures * fs.dim, fs.captures * fs.dim));
    }
    w.finish();

    nlohmann::json side;
    side["node_ids"] = fs.node_ids;
    side["noise_sigma"] = fs.noise_sigma;
    side["seed"] = fs.seed;
    std::ofstream out(feature_sidecar_path(path));
    if (!out)
        throw Error("cannot write \"" + feature_sidecar_path(path) + "\"");
    out << side.dump(1) << '\n';
}

/// Reads a feature binary and its sidecar, checking that every node of
/// `graph` is covered. `expected_dim` of zero accepts any width.
inline FeatureSet load_features(const std::string& path, const CityGraph& graph, std::size_t expected_dim = 0)
{
    nlohmann::json side;
    {
        std::ifstream in(feature_sidecar_path(path));
        if (!in)
            throw Error("cannot open feature sidecar \"" + feature_sidecar_path(path) + "\"");
        try {
            side = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error("malformed feature sidecar: " + std::string(e.what()));
        }
    }
    if (!side.contains("node_ids") || !side["node_ids"].is_array())
        throw Error("feature sidecar lacks a \"node_ids\" array");

    binio::Reader r(path);
    r.expect_magic("SGBF");
    const auto version = r.u32();
    if (version != kFeatureFormatVersion)
        throw Error("unsupported feature format version " + std::to_string(version));
    FeatureSet fs;
    const std::size_t count = r.u32();
    fs.dim = r.u32();
    fs.bins = r.u32();
    fs.captures = r.u32();
    if (fs.bins == 0 || fs.dim % fs.bins != 0)
        throw Error("dimension mismatch: D=" + std::to_string(fs.dim) + " not divisible by A=" +
                    std::to_string(fs.bins));
    if (expected_dim != 0 && fs.dim != expected_dim)
        throw Error("dimension mismatch: file has D=" + std::to_string(fs.dim) + ", expected " +
                    std::to_string(expected_dim));
    fs.node_ids = side["node_ids"].get<std::vector<std::string>>();
    if (fs.node_ids.size() != count)
        throw Error("feature sidecar lists " + std::to_string(fs.node_ids.size()) + " ids but binary holds " +
                    std::to_string(count));
    fs.noise_sigma = side.value("noise_sigma", 0.0);
    fs.seed = side.value("seed", std::uint64_t{0});

    fs.sat.resize(count * fs.dim);
    fs.street.resize(count * fs.captures * fs.dim);
    for (std::size_t row = 0; row < count; ++row) {
        r.f32(std::span<float>(fs.sat).subspan(row * fs.dim, fs.dim));
        r.f32(std::span<float>(fs.street).subspan(row * fs.captures * fs.dim, fs.captures * fs.dim));
    }
    if (!r.at_end())
        throw Error("\"" + path + "\": trailing bytes after feature payload");
    fs.reindex();
    for (const auto& rec : graph.nodes()) {
        if (!fs.contains(rec.feature_ref()))
            throw Error("feature file is missing node \"" + rec.id + "\"");
    }
    return fs;
}

} // namespace graphloc

#pragma once

#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

#include "graphloc/graphloc.hpp"

namespace graphloc::testing {

struct NodeSpec {
    std::string id;
    double lat;
    double lon;
    double yaw = 0.0;
};

inline CityGraph make_graph(const std::string& name, const std::vector<NodeSpec>& nodes,
                            const std::vector<std::pair<std::string, std::string>>& edges)
{
    std::vector<NodeRecord> recs;
    for (const auto& n : nodes) {
        NodeRecord r;
        r.id = n.id;
        r.location = GeoCoord::make(n.lat, n.lon);
        r.yaw = n.yaw;
        recs.push_back(r);
    }
    std::vector<EdgeSpec> es;
    for (const auto& [a, b] : edges)
        es.push_back({a, b});
    return CityGraph::build(name, std::move(recs), es);
}

/// rows x cols lattice with spacing in degrees; ids "r<row>c<col>".
inline CityGraph grid_graph(std::size_t rows, std::size_t cols, double step = 0.001)
{
    std::vector<NodeSpec> nodes;
    std::vector<std::pair<std::string, std::string>> edges;
    auto id = [](std::size_t r, std::size_t c) { return "r" + std::to_string(r) + "c" + std::to_string(c); };
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            nodes.push_back({id(r, c), 51.5 + step * static_cast<double>(r), -0.12 + step * static_cast<double>(c)});
            if (c + 1 < cols)
                edges.emplace_back(id(r, c), id(r, c + 1));
            if (r + 1 < rows)
                edges.emplace_back(id(r, c), id(r + 1, c));
        }
    }
    return make_graph("grid", nodes, edges);
}

/// A-B-C along a meridian-aligned line.
inline CityGraph path_graph()
{
    return make_graph("path", {{"A", 0.0, 0.0}, {"B", 0.0, 0.001}, {"C", 0.0, 0.002}}, {{"A", "B"}, {"B", "C"}});
}

inline CityGraph triangle_graph()
{
    return make_graph("triangle", {{"A", 0.0, 0.0}, {"B", 0.0, 0.001}, {"C", 0.001, 0.0005}},
                      {{"A", "B"}, {"B", "C"}, {"C", "A"}});
}

inline CityGraph star_graph()
{
    return make_graph("star",
                      {{"C", 0.0, 0.0}, {"L1", 0.001, 0.0}, {"L2", 0.0, 0.001}, {"L3", -0.001, 0.0}, {"L4", 0.0, -0.001}},
                      {{"C", "L1"}, {"C", "L2"}, {"C", "L3"}, {"C", "L4"}});
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("graphloc_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace graphloc::testing

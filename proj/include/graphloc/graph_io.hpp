#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "graphloc/geograph.hpp"

namespace graphloc {

// Graph JSON document:
//   { "name": text,
//     "nodes": [ { "id", "lat", "lon", "yaw", "streetview_count" } ],
//     "edges": [ [id, id] ] }
// Bearings are never read from the file.

inline nlohmann::json graph_to_json(const CityGraph& graph)
{
    nlohmann::json doc;
    doc["name"] = graph.name();
    auto& nodes = doc["nodes"] = nlohmann::json::array();
    for (const auto& rec : graph.nodes()) {
        nodes.push_back({{"id", rec.id},
                         {"lat", rec.location.lat},
                         {"lon", rec.location.lon},
                         {"yaw", rec.yaw},
                         {"streetview_count", rec.streetview_count}});
    }
    auto& edges = doc["edges"] = nlohmann::json::array();
    for (const auto& [a, b] : graph.edges())
        edges.push_back({graph.id(a), graph.id(b)});
    return doc;
}

inline CityGraph graph_from_json(const nlohmann::json& doc)
{
    if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array())
        throw Error("malformed graph document: missing \"nodes\" array");
    if (doc.contains("edges") && !doc["edges"].is_array())
        throw Error("malformed graph document: \"edges\" is not an array");

    std::vector<NodeRecord> records;
    records.reserve(doc["nodes"].size());
    for (std::size_t i = 0; i < doc["nodes"].size(); ++i) {
        const auto& jn = doc["nodes"][i];
        if (!jn.is_object() || !jn.contains("id") || !jn["id"].is_string())
            throw Error("malformed graph document: node #" + std::to_string(i) + " has no string id");
        NodeRecord rec;
        rec.id = jn["id"].get<std::string>();
        for (const char* key : {"lat", "lon"}) {
            if (!jn.contains(key) || !jn[key].is_number())
                throw Error("node \"" + rec.id + "\": missing numeric \"" + key + "\"");
        }
        try {
            rec.location = GeoCoord::make(jn["lat"].get<double>(), jn["lon"].get<double>());
        } catch (const Error& e) {
            throw Error("node \"" + rec.id + "\": " + e.what());
        }
        if (jn.contains("yaw")) {
            if (!jn["yaw"].is_number())
                throw Error("node \"" + rec.id + "\": \"yaw\" is not a number");
            rec.yaw = jn["yaw"].get<double>();
            if (!(rec.yaw >= -180.0 && rec.yaw <= 180.0))
                throw Error("node \"" + rec.id + "\": yaw out of range");
        }
        if (jn.contains("streetview_count")) {
            if (!jn["streetview_count"].is_number_integer())
                throw Error("node \"" + rec.id + "\": \"streetview_count\" is not an integer");
            rec.streetview_count = jn["streetview_count"].get<int>();
        }
        records.push_back(std::move(rec));
    }

    std::vector<EdgeSpec> edges;
    if (doc.contains("edges")) {
        for (std::size_t i = 0; i < doc["edges"].size(); ++i) {
            const auto& je = doc["edges"][i];
            if (!je.is_array() || je.size() != 2 || !je[0].is_string() || !je[1].is_string())
                throw Error("malformed graph document: edge #" + std::to_string(i) + " is not an [id, id] pair");
            edges.push_back({je[0].get<std::string>(), je[1].get<std::string>()});
        }
    }
    std::string name = doc.contains("name") && doc["name"].is_string() ? doc["name"].get<std::string>() : "";
    return CityGraph::build(std::move(name), std::move(records), edges);
}

inline CityGraph load_graph(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open graph file \"" + path + "\"");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed graph document \"" + path + "\": " + e.what());
    }
    return graph_from_json(doc);
}

inline void save_graph(const CityGraph& graph, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write graph file \"" + path + "\"");
    out << graph_to_json(graph).dump(1) << '\n';
}

} // namespace graphloc

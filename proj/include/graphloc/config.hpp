#pragma once

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "graphloc/evalbench.hpp"
#include "graphloc/train.hpp"

namespace graphloc {

// JSON views of the run configurations. Keys mirror the struct fields; a
// config document may hold both training and benchmark keys, anything else is
// rejected so typos do not pass silently.

inline nlohmann::json to_json(const TrainConfig& c)
{
    return {{"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"margin", c.margin},
            {"walk_length", c.walk_length},
            {"batch_size", c.batch_size},
            {"weight_decay", c.weight_decay},
            {"plateau_patience", c.plateau_patience},
            {"plateau_factor", c.plateau_factor},
            {"layer_dims", c.layer_dims},
            {"aggregator", to_string(c.aggregator)},
            {"fov", c.fov},
            {"captures", c.captures},
            {"val_fraction", c.val_fraction},
            {"seed", c.seed}};
}

inline nlohmann::json to_json(const BenchmarkConfig& c)
{
    nlohmann::json modes = nlohmann::json::array();
    for (auto m : c.modes)
        modes.push_back(to_string(m));
    return {{"city", c.city},         {"walk_length", c.walk_length}, {"fovs", c.fovs},
            {"modes", modes},         {"k_list", c.k_list},           {"percent_list", c.percent_list},
            {"seeds", c.seeds},       {"bins", c.bins},               {"over_fetch", c.over_fetch}};
}

namespace detail {

template <class T>
void read_key(const nlohmann::json& doc, const char* key, T& out)
{
    if (!doc.contains(key))
        return;
    try {
        out = doc.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error("config key \"" + std::string(key) + "\" has the wrong type: " + doc.at(key).dump());
    }
}

inline const std::set<std::string>& train_keys()
{
    static const std::set<std::string> keys{"epochs",       "learning_rate", "margin",         "walk_length",
                                            "batch_size",   "weight_decay",  "plateau_patience", "plateau_factor",
                                            "layer_dims",   "aggregator",    "fov",            "captures",
                                            "val_fraction", "seed"};
    return keys;
}

inline const std::set<std::string>& benchmark_keys()
{
    static const std::set<std::string> keys{"city",  "walk_length", "fovs", "modes",     "k_list",
                                            "percent_list", "seeds", "bins", "over_fetch"};
    return keys;
}

} // namespace detail

inline void check_config_keys(const nlohmann::json& doc)
{
    if (!doc.is_object())
        throw Error("config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (!detail::train_keys().count(key) && !detail::benchmark_keys().count(key))
            throw Error("unknown config key \"" + key + "\"");
    }
}

inline TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig c = {})
{
    check_config_keys(doc);
    detail::read_key(doc, "epochs", c.epochs);
    detail::read_key(doc, "learning_rate", c.learning_rate);
    detail::read_key(doc, "margin", c.margin);
    detail::read_key(doc, "walk_length", c.walk_length);
    detail::read_key(doc, "batch_size", c.batch_size);
    detail::read_key(doc, "weight_decay", c.weight_decay);
    detail::read_key(doc, "plateau_patience", c.plateau_patience);
    detail::read_key(doc, "plateau_factor", c.plateau_factor);
    detail::read_key(doc, "layer_dims", c.layer_dims);
    if (doc.contains("aggregator")) {
        std::string agg;
        detail::read_key(doc, "aggregator", agg);
        c.aggregator = aggregator_from_string(agg);
    }
    detail::read_key(doc, "fov", c.fov);
    detail::read_key(doc, "captures", c.captures);
    detail::read_key(doc, "val_fraction", c.val_fraction);
    detail::read_key(doc, "seed", c.seed);
    c.validate();
    return c;
}

inline BenchmarkConfig benchmark_config_from_json(const nlohmann::json& doc, BenchmarkConfig c = {})
{
    check_config_keys(doc);
    detail::read_key(doc, "city", c.city);
    detail::read_key(doc, "walk_length", c.walk_length);
    detail::read_key(doc, "fovs", c.fovs);
    if (doc.contains("modes")) {
        std::vector<std::string> names;
        detail::read_key(doc, "modes", names);
        c.modes.clear();
        for (const auto& n : names)
            c.modes.push_back(filter_mode_from_string(n));
    }
    detail::read_key(doc, "k_list", c.k_list);
    detail::read_key(doc, "percent_list", c.percent_list);
    detail::read_key(doc, "seeds", c.seeds);
    detail::read_key(doc, "bins", c.bins);
    detail::read_key(doc, "over_fetch", c.over_fetch);
    c.validate();
    return c;
}

} // namespace graphloc

// graphloc: synthesise cities, train the two-branch model, evaluate and ablate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "graphloc/graphloc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace graphloc;

namespace {

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open \"" + path + "\"");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write \"" + path.string() + "\"");
    out << text;
    if (!out)
        throw Error("write failed for \"" + path.string() + "\"");
}

std::string sha256_file(const std::string& path)
{
    const std::string data = read_file(path);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed for \"" + path + "\"");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

// Records everything needed to replay a run. No timestamps, so two identical
// runs write identical manifests.
struct Manifest {
    std::string command;
    std::string config_path;
    json parameters = json::object();
    std::uint64_t seed = 0;
    fs::path out_dir;
    std::vector<std::string> inputs;
    std::vector<std::string> artifacts;  // file names inside out_dir

    void write() const
    {
        json doc;
        doc["command"] = command;
        doc["config"] = config_path.empty() ? json(nullptr) : json(config_path);
        doc["parameters"] = parameters;
        doc["seed"] = seed;
        doc["output_dir"] = out_dir.string();
        json in = json::object();
        for (const auto& p : inputs) {
            in[p] = sha256_file(p);
            if (fs::exists(feature_sidecar_path(p)))
                in[feature_sidecar_path(p)] = sha256_file(feature_sidecar_path(p));
        }
        doc["inputs"] = in;
        json out = json::object();
        for (const auto& a : artifacts)
            out[a] = sha256_file((out_dir / a).string());
        doc["artifacts"] = out;
        write_file(out_dir / "manifest.json", doc.dump(2) + "\n");
    }
};

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw Error("cannot create output directory \"" + dir.string() + "\"");
}

json load_config(const std::string& path)
{
    if (path.empty())
        return json::object();
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error("malformed config \"" + path + "\": " + e.what());
    }
}

// A directory argument resolves to the graph.json inside it.
std::string resolve_graph_path(const std::string& arg, const char* usage)
{
    if (arg.empty())
        throw Error(std::string("no graph given\nusage: ") + usage);
    fs::path p(arg);
    if (fs::is_directory(p)) {
        if (!fs::exists(p / "graph.json"))
            throw Error("no graph.json in \"" + arg + "\"\nusage: " + usage);
        p /= "graph.json";
    }
    if (!fs::exists(p))
        throw Error("graph file \"" + arg + "\" does not exist\nusage: " + usage);
    return p.string();
}

std::string train_log_csv(const std::vector<EpochRecord>& log)
{
    std::string out = "epoch,train_loss,val_top1,learning_rate\n";
    char buf[128];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6g\n", e.epoch, e.train_loss, e.val_top1, e.learning_rate);
        out += buf;
    }
    return out;
}

template <class T>
void override_if(const std::optional<T>& flag, T& slot)
{
    if (flag)
        slot = *flag;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    std::size_t nodes = 400;
    double noise = 0.3;
    std::uint64_t seed = 0;
    std::uint64_t feature_seed = 0;
    std::size_t captures = 5;
    std::size_t dim = 768;
    std::size_t bins = 8;
    double drop_prob = 0.1;
    std::string name;
    std::string out;
};

void cmd_synth(const SynthArgs& a)
{
    CityParams cp;
    cp.n_nodes = a.nodes;
    cp.seed = a.seed;
    cp.drop_prob = a.drop_prob;
    cp.name = a.name.empty() ? "city-" + std::to_string(a.seed) : a.name;
    FeatureParams fp;
    fp.noise_sigma = a.noise;
    fp.seed = a.feature_seed;
    fp.captures = a.captures;
    fp.dim = a.dim;
    fp.bins = a.bins;

    const auto graph = generate_city(cp);
    const auto features = generate_features(graph, fp);
    const fs::path out(a.out);
    ensure_dir(out);
    save_graph(graph, (out / "graph.json").string());
    save_features(features, (out / "features.bin").string());

    Manifest m{"synth", "", json::object(), a.seed, out, {}, {"graph.json", "features.bin", "features.bin.json"}};
    m.parameters = {{"nodes", a.nodes},     {"noise", a.noise}, {"seed", a.seed},     {"feature_seed", a.feature_seed},
                    {"captures", a.captures}, {"dim", a.dim},   {"bins", a.bins},     {"drop_prob", a.drop_prob},
                    {"name", cp.name}};
    m.write();
    std::cout << "wrote " << graph.size() << " nodes, " << graph.edge_count() << " edges to " << out.string() << "\n";
}

// ---------------------------------------------------------------------------
// stats

constexpr const char* kStatsUsage = "graphloc stats --graph <graph.json | directory> [--walk-length L ...]";

void cmd_stats(const std::string& graph_arg, const std::vector<std::size_t>& lengths)
{
    const auto graph = load_graph(resolve_graph_path(graph_arg, kStatsUsage));
    std::size_t degree_sum = 0, dead_ends = 0, junctions = 0;
    for (NodeIndex i = 0; i < graph.size(); ++i) {
        degree_sum += graph.degree(i);
        dead_ends += graph.degree(i) == 1;
        junctions += graph.degree(i) >= 3;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", graph.empty() ? 0.0 : double(degree_sum) / double(graph.size()));
    std::cout << "graph        " << graph.name() << "\n"
              << "nodes        " << graph.size() << "\n"
              << "edges        " << graph.edge_count() << "\n"
              << "mean_degree  " << buf << "\n"
              << "junctions    " << junctions << "\n"
              << "dead_ends    " << dead_ends << "\n"
              << "connected    " << (graph.connected() ? "yes" : "no") << "\n";
    for (auto len : lengths)
        std::cout << "walks@" << len << std::string(len < 10 ? 6 : 5, ' ') << count_walks(graph, len) << "\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string graph, features, config, out;
    std::optional<int> epochs;
    std::optional<double> lr;
    std::optional<std::size_t> walk_length;
    std::optional<double> fov;
    std::optional<std::size_t> captures;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> batch_size;
    std::optional<double> margin;
    std::optional<std::string> aggregator;
    bool quiet = false;
};

TrainConfig resolve_train_config(const TrainArgs& a)
{
    auto cfg = train_config_from_json(load_config(a.config));
    override_if(a.epochs, cfg.epochs);
    override_if(a.lr, cfg.learning_rate);
    override_if(a.walk_length, cfg.walk_length);
    override_if(a.fov, cfg.fov);
    override_if(a.captures, cfg.captures);
    override_if(a.seed, cfg.seed);
    override_if(a.batch_size, cfg.batch_size);
    override_if(a.margin, cfg.margin);
    if (a.aggregator)
        cfg.aggregator = aggregator_from_string(*a.aggregator);
    cfg.validate();
    return cfg;
}

void cmd_train(const TrainArgs& a)
{
    const auto cfg = resolve_train_config(a);
    const auto graph_path = resolve_graph_path(a.graph, "graphloc train --graph G --features F --out DIR");
    const auto graph = load_graph(graph_path);
    const auto features = load_features(a.features, graph, cfg.layer_dims.front());
    const fs::path out(a.out);
    ensure_dir(out);

    const auto result = train(split_graph(graph, cfg.val_fraction, derive_seed(cfg.seed, "split")), features, cfg,
                              [&](const EpochRecord& e) {
                                  if (!a.quiet)
                                      std::fprintf(stderr, "epoch %3d  loss %.5f  val_top1 %.4f  lr %.3g\n", e.epoch,
                                                   e.train_loss, e.val_top1, e.learning_rate);
                              });
    save_checkpoint(result.params, (out / "model.bin").string());
    write_file(out / "train_log.csv", train_log_csv(result.log));

    Manifest m{"train", a.config, to_json(cfg), cfg.seed, out, {graph_path, a.features}, {"model.bin", "train_log.csv"}};
    m.write();
    std::cout << "best epoch " << result.best_epoch << ", val_top1 " << result.log[result.best_epoch].val_top1 << "\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string checkpoint, graph, features, config, out;
    std::vector<double> fovs;
    std::vector<std::string> modes;
    std::optional<std::size_t> bins;
    std::optional<std::size_t> walk_length;
    std::vector<std::uint64_t> seeds;
    std::vector<std::size_t> k_list;
    std::vector<double> percents;
    std::optional<std::size_t> over_fetch;
    std::optional<std::string> city;
    bool export_embeddings = false;
};

BenchmarkConfig resolve_benchmark_config(const std::string& config, const std::vector<double>& fovs,
                                         const std::vector<std::string>& modes, std::optional<std::size_t> bins,
                                         std::optional<std::size_t> walk_length,
                                         const std::vector<std::uint64_t>& seeds, const std::vector<std::size_t>& k_list,
                                         const std::vector<double>& percents, std::optional<std::size_t> over_fetch,
                                         std::optional<std::string> city)
{
    // walk_length is shared with training, so one config serves both commands.
    auto cfg = benchmark_config_from_json(load_config(config));
    if (!fovs.empty())
        cfg.fovs = fovs;
    if (!modes.empty()) {
        cfg.modes.clear();
        for (const auto& m : modes)
            cfg.modes.push_back(filter_mode_from_string(m));
    }
    override_if(bins, cfg.bins);
    override_if(walk_length, cfg.walk_length);
    if (!seeds.empty())
        cfg.seeds = seeds;
    if (!k_list.empty())
        cfg.k_list = k_list;
    if (!percents.empty())
        cfg.percent_list = percents;
    override_if(over_fetch, cfg.over_fetch);
    override_if(city, cfg.city);
    cfg.validate();
    return cfg;
}

std::string embeddings_csv(const CityGraph& graph, const ReferenceSet& refs)
{
    std::string out = "walk_id,target,walk";
    for (Eigen::Index d = 0; d < refs.embeddings.rows(); ++d)
        out += ",e" + std::to_string(d);
    out += "\n";
    char buf[32];
    for (std::size_t w = 0; w < refs.walks.size(); ++w) {
        const auto ids = refs.walks[w].ids(graph);
        std::string path;
        for (const auto& id : ids)
            path += (path.empty() ? "" : ">") + id;
        out += std::to_string(w) + "," + ids.back() + "," + path;
        for (Eigen::Index d = 0; d < refs.embeddings.rows(); ++d) {
            std::snprintf(buf, sizeof buf, ",%.7g", refs.embeddings(d, static_cast<Eigen::Index>(w)));
            out += buf;
        }
        out += "\n";
    }
    return out;
}

void cmd_eval(const EvalArgs& a)
{
    const auto cfg = resolve_benchmark_config(a.config, a.fovs, a.modes, a.bins, a.walk_length, a.seeds, a.k_list,
                                              a.percents, a.over_fetch, a.city);
    const auto params = load_checkpoint(a.checkpoint);
    const auto graph_path = resolve_graph_path(a.graph, "graphloc eval --checkpoint M --graph G --features F --out DIR");
    const auto graph = load_graph(graph_path);
    const auto features = load_features(a.features, graph, params.input_dim());
    const fs::path out(a.out);
    ensure_dir(out);

    const auto table = run_benchmark(graph, features, params, cfg);
    write_file(out / "report.csv", table.to_csv());
    write_file(out / "report.txt", table.to_text());
    std::vector<std::string> artifacts{"report.csv", "report.txt"};
    if (a.export_embeddings) {
        write_file(out / "embeddings.csv", embeddings_csv(graph, embed_references(params, graph, features, cfg.walk_length)));
        artifacts.push_back("embeddings.csv");
    }
    json p = to_json(cfg);
    p["export_embeddings"] = a.export_embeddings;
    Manifest m{"eval", a.config, p, cfg.seeds.front(), out, {a.checkpoint, graph_path, a.features}, artifacts};
    m.write();
    std::cout << table.to_text();
}

// ---------------------------------------------------------------------------
// ablate

struct AblateArgs {
    std::string sweep, graph, features, test_graph, test_features, config, out;
    std::vector<double> values;
    std::vector<std::string> modes;
    std::optional<std::size_t> bins;
    std::vector<std::uint64_t> seeds;
    std::optional<int> epochs;
    std::optional<std::uint64_t> seed;
};

void cmd_ablate(const AblateArgs& a)
{
    TrainArgs ta;
    ta.config = a.config;
    ta.epochs = a.epochs;
    ta.seed = a.seed;
    const auto train_cfg = resolve_train_config(ta);
    auto bench_cfg = resolve_benchmark_config(a.config, {}, a.modes, a.bins, train_cfg.walk_length, a.seeds, {}, {},
                                              std::nullopt, std::nullopt);

    const auto train_path = resolve_graph_path(a.graph, "graphloc ablate --sweep S --graph G --features F ...");
    const auto test_path = resolve_graph_path(a.test_graph, "graphloc ablate ... --test-graph G --test-features F");
    const auto train_graph = load_graph(train_path);
    const auto train_features = load_features(a.features, train_graph, train_cfg.layer_dims.front());
    const auto test_graph = load_graph(test_path);
    const auto test_features = load_features(a.test_features, test_graph, train_cfg.layer_dims.front());
    const auto split = split_graph(train_graph, train_cfg.val_fraction, derive_seed(train_cfg.seed, "split"));
    const AblationData data{split, train_features, test_graph, test_features};
    if (bench_cfg.city.empty())
        bench_cfg.city = test_graph.name();

    auto as_sizes = [&](std::vector<std::size_t> fallback) {
        if (a.values.empty())
            return fallback;
        std::vector<std::size_t> v;
        for (double x : a.values) {
            if (!(x >= 1.0) || x != std::floor(x))
                throw Error("--values for this sweep must be positive integers");
            v.push_back(static_cast<std::size_t>(x));
        }
        return v;
    };

    ReportTable table;
    if (a.sweep == "walk-length") {
        table = ablate_walk_length(data, train_cfg, bench_cfg, as_sizes({1, 2, 3, 4, 5}));
    } else if (a.sweep == "captures") {
        table = ablate_captures(data, train_cfg, bench_cfg, as_sizes({1, 2, 3, 4, 5}));
    } else if (a.sweep == "fov") {
        table = ablate_fov(data, train_cfg, bench_cfg, a.values.empty() ? std::vector<double>{360, 180, 90} : a.values);
    } else {
        throw Error("unknown sweep \"" + a.sweep + "\" (expected walk-length, captures or fov)");
    }

    const fs::path out(a.out);
    ensure_dir(out);
    const std::string stem = "ablation_" + a.sweep;
    write_file(out / (stem + ".csv"), table.to_csv());
    write_file(out / (stem + ".txt"), table.to_text());
    json p = {{"sweep", a.sweep}, {"values", a.values}, {"train", to_json(train_cfg)}, {"benchmark", to_json(bench_cfg)}};
    Manifest m{"ablate", a.config, p, train_cfg.seed, out,
               {train_path, a.features, test_path, a.test_features}, {stem + ".csv", stem + ".txt"}};
    m.write();
    std::cout << table.to_csv();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"graphloc: graph-based cross-view localisation experiments"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic city graph and its cross-view features");
    s->add_option("--nodes", synth.nodes, "Number of junctions (a perfect square)")->capture_default_str();
    s->add_option("--noise", synth.noise, "Per-capture noise sigma")->capture_default_str();
    s->add_option("--seed", synth.seed, "City layout seed")->capture_default_str();
    s->add_option("--feature-seed", synth.feature_seed, "Appearance model seed, shared by cities of one experiment")
        ->capture_default_str();
    s->add_option("--captures", synth.captures, "Streetview captures per node")->capture_default_str();
    s->add_option("--dim", synth.dim, "Feature dimension")->capture_default_str();
    s->add_option("--bins", synth.bins, "Angular sectors per panorama")->capture_default_str();
    s->add_option("--drop-prob", synth.drop_prob, "Probability of removing a grid edge")->capture_default_str();
    s->add_option("--name", synth.name, "City name (default city-<seed>)");
    s->add_option("--out", synth.out, "Output directory")->required();

    std::string stats_graph;
    std::vector<std::size_t> stats_lengths{1, 2, 3, 4, 5};
    auto* st = app.add_subcommand("stats", "Print node, edge and walk counts of a graph");
    st->add_option("--graph", stats_graph, "Graph JSON file or a directory holding graph.json");
    st->add_option("--walk-length", stats_lengths, "Walk lengths to count")->capture_default_str();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train both branches on a city");
    t->add_option("--graph", tr.graph, "Training graph")->required();
    t->add_option("--features", tr.features, "Feature binary")->required();
    t->add_option("--config", tr.config, "JSON config; flags override its values");
    t->add_option("--out", tr.out, "Output directory")->required();
    t->add_option("--epochs", tr.epochs);
    t->add_option("--lr", tr.lr);
    t->add_option("--walk-length", tr.walk_length);
    t->add_option("--fov", tr.fov);
    t->add_option("--captures", tr.captures, "Captures per node used for training (0 = all)");
    t->add_option("--seed", tr.seed);
    t->add_option("--batch-size", tr.batch_size);
    t->add_option("--margin", tr.margin);
    t->add_option("--aggregator", tr.aggregator)->check(CLI::IsMember({"mean", "sum"}));
    t->add_flag("--quiet", tr.quiet, "Suppress per-epoch progress");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Benchmark a checkpoint on a held-out city");
    e->add_option("--checkpoint", ev.checkpoint)->required();
    e->add_option("--graph", ev.graph)->required();
    e->add_option("--features", ev.features)->required();
    e->add_option("--config", ev.config);
    e->add_option("--out", ev.out)->required();
    e->add_option("--fov", ev.fovs, "One or more of 360 180 90");
    e->add_option("--mode", ev.modes, "One or more of none bvm bvm-yaw");
    e->add_option("--bins", ev.bins, "Bearing vector length V");
    e->add_option("--walk-length", ev.walk_length);
    e->add_option("--seeds", ev.seeds);
    e->add_option("--k", ev.k_list);
    e->add_option("--percent", ev.percents);
    e->add_option("--over-fetch", ev.over_fetch);
    e->add_option("--city", ev.city, "City label in the report");
    e->add_flag("--export-embeddings", ev.export_embeddings, "Also write reference embeddings as CSV");

    AblateArgs ab;
    auto* b = app.add_subcommand("ablate", "Retrain and benchmark across a parameter sweep");
    b->add_option("--sweep", ab.sweep)->required()->check(CLI::IsMember({"walk-length", "captures", "fov"}));
    b->add_option("--graph", ab.graph, "Training graph")->required();
    b->add_option("--features", ab.features)->required();
    b->add_option("--test-graph", ab.test_graph)->required();
    b->add_option("--test-features", ab.test_features)->required();
    b->add_option("--config", ab.config);
    b->add_option("--out", ab.out)->required();
    b->add_option("--values", ab.values, "Sweep values (defaults: 1..5, or 360 180 90)");
    b->add_option("--mode", ab.modes);
    b->add_option("--bins", ab.bins);
    b->add_option("--seeds", ab.seeds);
    b->add_option("--epochs", ab.epochs);
    b->add_option("--seed", ab.seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*s)
            cmd_synth(synth);
        else if (*st)
            cmd_stats(stats_graph, stats_lengths);
        else if (*t)
            cmd_train(tr);
        else if (*e)
            cmd_eval(ev);
        else if (*b)
            cmd_ablate(ab);
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}

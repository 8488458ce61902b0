#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "oracles.hpp"

using namespace graphloc;
using namespace graphloc::testing;

using oracle::angle_diff;
using oracle::tangent_plane_azimuth;

TEST(GeoCoord, WrapsLongitude)
{
    EXPECT_DOUBLE_EQ(GeoCoord::make(10, 190).lon, -170.0);
    EXPECT_DOUBLE_EQ(GeoCoord::make(10, -180).lon, 180.0);
    EXPECT_THROW(GeoCoord::make(91, 0), Error);
    EXPECT_THROW(GeoCoord::make(NAN, 0), Error);
}

TEST(ForwardAzimuth, CardinalDirections)
{
    EXPECT_NEAR(forward_azimuth({0, 0}, {0, 1}), 90.0, 1e-9);
    EXPECT_NEAR(forward_azimuth({0, 0}, {1, 0}), 0.0, 1e-9);
    EXPECT_NEAR(std::abs(forward_azimuth({1, 0}, {0, 0})), 180.0, 1e-9);
    EXPECT_NEAR(forward_azimuth({0, 1}, {0, 0}), -90.0, 1e-9);
}

TEST(ForwardAzimuth, LondonPairMatchesTangentPlane)
{
    const GeoCoord a{51.5000, -0.1200}, b{51.5050, -0.1100};
    EXPECT_LT(angle_diff(forward_azimuth(a, b), tangent_plane_azimuth(a, b)), 0.1);
}

TEST(ForwardAzimuth, RandomShortPairsMatchTangentPlaneAndReverse)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lat(-60, 60), lon(-179, 179), off(-0.012, 0.012);
    for (int i = 0; i < 200; ++i) {
        const GeoCoord a = GeoCoord::make(lat(rng), lon(rng));
        const GeoCoord b = GeoCoord::make(a.lat + off(rng), a.lon + off(rng));
        if (a == b || haversine_m(a, b) > 2000.0)
            continue;
        const double fwd = forward_azimuth(a, b);
        EXPECT_GE(fwd, -180.0);
        EXPECT_LE(fwd, 180.0);
        EXPECT_LT(angle_diff(fwd, tangent_plane_azimuth(a, b)), 0.1);
        EXPECT_LT(angle_diff(forward_azimuth(b, a), fwd + 180.0), 0.2);
    }
}

TEST(ForwardAzimuth, DegeneratePairThrows)
{
    try {
        forward_azimuth({1, 2}, {1, 2});
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("degenerate pair"), std::string::npos);
    }
}

TEST(CityGraph, RejectsBadStructure)
{
    EXPECT_THROW(make_graph("g", {{"a", 0, 0}, {"a", 0, 1}}, {}), Error);
    EXPECT_THROW(make_graph("g", {{"a", 0, 0}}, {{"a", "a"}}), Error);
    EXPECT_THROW(make_graph("g", {{"a", 0, 0}, {"b", 0, 1}}, {{"a", "b"}, {"b", "a"}}), Error);
    EXPECT_THROW(make_graph("g", {{"a", 0, 0, 200.0}}, {}), Error);
    try {
        make_graph("g", {{"a", 0, 0}}, {{"a", "x9"}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("x9"), std::string::npos);
    }
}

TEST(NeighbourBearings, Examples)
{
    const auto g = make_graph("g", {{"o", 0, 0}, {"n", 0.001, 0}, {"e", 0, 0.001}, {"lone", 1, 1}},
                              {{"o", "n"}, {"o", "e"}});
    const auto b = neighbor_bearings(g, "o");
    ASSERT_EQ(b.size(), 2u);
    EXPECT_NEAR(b[0], 0.0, 1e-9);
    EXPECT_NEAR(b[1], 90.0, 1e-9);
    EXPECT_TRUE(neighbor_bearings(g, "lone").empty());
    EXPECT_THROW(neighbor_bearings(g, "zz"), Error);
}

TEST(NeighbourBearings, GridJunctionMatchesTangentPlane)
{
    const auto g = grid_graph(3, 3);
    const NodeIndex centre = g.index_of("r1c1");
    const auto bearings = g.node(centre).neighbour_bearings;
    ASSERT_EQ(bearings.size(), 4u);
    std::vector<double> oracle;
    for (NodeIndex u : g.neighbours(centre))
        oracle.push_back(tangent_plane_azimuth(g.node(centre).location, g.node(u).location));
    for (double o : oracle) {
        double best = 360.0;
        for (double b : bearings)
            best = std::min(best, angle_diff(b, o));
        EXPECT_LT(best, 0.1);
    }
    for (double expect : {0.0, 90.0, 180.0, -90.0}) {
        double best = 360.0;
        for (double b : bearings)
            best = std::min(best, angle_diff(b, expect));
        EXPECT_LT(best, 0.1);
    }
    for (NodeIndex i = 0; i < g.size(); ++i)
        EXPECT_EQ(g.node(i).neighbour_bearings.size(), g.degree(i));
}

TEST(GraphIo, MinimalFileAndRoundTrip)
{
    const auto dir = scratch_dir("graph_io");
    const auto path = (dir / "g.json").string();
    {
        std::ofstream out(path);
        out << R"({"name":"tiny","nodes":[{"id":"a","lat":0,"lon":0,"yaw":10,"streetview_count":5},)"
            << R"({"id":"b","lat":0.001,"lon":0,"yaw":-20,"streetview_count":5}],"edges":[["a","b"]]})";
    }
    const auto g = load_graph(path);
    EXPECT_EQ(g.size(), 2u);
    EXPECT_EQ(g.edge_count(), 1u);
    EXPECT_EQ(g.node(0).neighbour_bearings.size(), 1u);
    EXPECT_EQ(g.node(1).neighbour_bearings.size(), 1u);

    const auto grid = grid_graph(4, 4);
    EXPECT_EQ(grid.edge_count(), 24u);
    save_graph(grid, (dir / "grid.json").string());
    const auto back = load_graph((dir / "grid.json").string());
    EXPECT_EQ(back.size(), 16u);
    EXPECT_EQ(back.edge_count(), 24u);
    EXPECT_TRUE(back == grid);
}

TEST(GraphIo, ErrorsNameTheCulprit)
{
    auto expect_error = [](const std::string& doc, const std::string& needle) {
        try {
            graph_from_json(nlohmann::json::parse(doc));
            ADD_FAILURE() << "no error for " << doc;
        } catch (const Error& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    expect_error(R"({"name":"g","nodes":[{"id":"a","lat":0,"lon":0,"yaw":0}],"edges":[["a","x9"]]})", "x9");
    expect_error(R"({"name":"g","nodes":[{"id":"p7","lat":95,"lon":0,"yaw":0}],"edges":[]})", "p7");
    expect_error(R"({"name":"g","nodes":[{"id":"q","lon":0,"yaw":0}],"edges":[]})", "q");
    expect_error(R"({"name":"g"})", "nodes");
    EXPECT_THROW(load_graph("/nonexistent/graph.json"), Error);
}

TEST(SplitGraph, CornerRegionWithoutCrossingEdges)
{
    const auto g = grid_graph(4, 4);
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto split = split_graph(g, 1.0 / 9.0, seed);
        EXPECT_GE(split.validation.size(), 1u);
        EXPECT_LE(split.validation.size(), 2u);
        EXPECT_EQ(split.train.size() + split.validation.size(), g.size());
        std::set<std::string> val_ids, train_ids;
        for (const auto& r : split.validation.nodes())
            val_ids.insert(r.id);
        for (const auto& r : split.train.nodes()) {
            train_ids.insert(r.id);
            EXPECT_EQ(val_ids.count(r.id), 0u);
        }
        for (const auto& e : split.train.edge_specs())
            EXPECT_TRUE(train_ids.count(e.a) && train_ids.count(e.b));
        for (const auto& e : split.validation.edge_specs())
            EXPECT_TRUE(val_ids.count(e.a) && val_ids.count(e.b));
        for (const auto& e : split.edge_cut)
            EXPECT_NE(val_ids.count(e.a), val_ids.count(e.b));
        EXPECT_EQ(split.train.edge_count() + split.validation.edge_count() + split.edge_cut.size(), g.edge_count());
    }
}

TEST(SplitGraph, DeterministicAndValidated)
{
    const auto g = grid_graph(4, 4);
    const auto a = split_graph(g, 0.2, 5), b = split_graph(g, 0.2, 5);
    EXPECT_TRUE(a.train == b.train);
    EXPECT_TRUE(a.validation == b.validation);
    EXPECT_THROW(split_graph(g, 0.6, 0), Error);
    EXPECT_THROW(split_graph(g, 0.0, 0), Error);
    EXPECT_THROW(split_graph(path_graph(), 0.2, 0), Error);
}

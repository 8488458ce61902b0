#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace graphloc;

namespace {

BearingVector bv(const std::string& s) { return BearingVector::from_string(s); }

BearingVector random_bv(std::mt19937_64& rng, std::size_t bins)
{
    BearingVector out{std::vector<std::uint8_t>(bins)};
    std::bernoulli_distribution coin(0.4);
    for (auto& b : out.bits)
        b = coin(rng);
    return out;
}

RetrievalResult ranked_nodes(std::initializer_list<NodeIndex> nodes)
{
    RetrievalResult r;
    double d = 0.1;
    WalkId w = 0;
    for (NodeIndex n : nodes)
        r.ranked.push_back({n, w++, d += 0.1});
    return r;
}

std::vector<NodeIndex> nodes_of(const RetrievalResult& r)
{
    std::vector<NodeIndex> out;
    for (const auto& c : r.ranked)
        out.push_back(c.node);
    return out;
}

} // namespace

TEST(QuantiseBearings, Examples)
{
    EXPECT_EQ(quantise_bearings({0.0, 90.0, 180.0}, 4, 0.0).to_string(), "1110");
    EXPECT_EQ(quantise_bearings({}, 8, 0.0).to_string(), "00000000");
    // 22.5 is the upper edge of bin 0 at V = 8, which belongs to bin 1.
    EXPECT_EQ(quantise_bearings({22.5}, 8, 0.0).to_string(), "01000000");
    EXPECT_EQ(quantise_bearings({22.4}, 8, 0.0).to_string(), "10000000");
    EXPECT_EQ(quantise_bearings({-90.0}, 4, 0.0).to_string(), "0001");
    EXPECT_EQ(quantise_bearings({90.0}, 4, 90.0).to_string(), "1000");
    EXPECT_THROW(quantise_bearings({0.0}, 1, 0.0), Error);
}

TEST(QuantiseBearings, HeadingOffsetEqualsRotation)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> angle(-180.0, 180.0);
    for (std::size_t bins : {4u, 8u, 16u}) {
        const double w = 360.0 / static_cast<double>(bins);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> bearings;
            for (int i = 0; i < 4; ++i) {
                double a = angle(rng);
                // keep clear of bin edges so rounding cannot move a bearing
                const double frac = std::fmod(std::fmod(a + w / 2.0, w) + w, w) / w;
                if (frac < 1e-6 || frac > 1 - 1e-6)
                    a += 0.01 * w;
                bearings.push_back(a);
            }
            const long s = static_cast<long>(trial % static_cast<int>(bins));
            EXPECT_EQ(quantise_bearings(bearings, bins, static_cast<double>(s) * w),
                      rotate(quantise_bearings(bearings, bins, 0.0), s));
        }
    }
}

TEST(BearingVector, StringRoundTripAndPopcount)
{
    const auto v = bv("10100010");
    EXPECT_EQ(v.to_string(), "10100010");
    EXPECT_EQ(v.popcount(), 3u);
    EXPECT_THROW(bv("102"), Error);
}

TEST(Rotate, MovesBitsTowardsBinZero)
{
    EXPECT_EQ(rotate(bv("0100"), 1).to_string(), "1000");
    EXPECT_EQ(rotate(bv("0100"), -1).to_string(), "0010");
    EXPECT_EQ(rotate(bv("0100"), 5).to_string(), "1000");
    EXPECT_EQ(yaw_shift(90.0, 4), 1);
    EXPECT_EQ(yaw_shift(-90.0, 4), 3);
    EXPECT_EQ(yaw_shift(40.0, 8), 1);
    EXPECT_EQ(yaw_shift(360.0, 8), 0);
}

TEST(Compatible, Examples)
{
    EXPECT_TRUE(compatible(bv("1010"), bv("0101")));
    EXPECT_FALSE(compatible(bv("1100"), bv("1010")));
    EXPECT_TRUE(compatible(bv("1100"), bv("1100")));
    EXPECT_FALSE(compatible(bv("1110"), bv("1100")));
    EXPECT_TRUE(compatible(bv("0000"), bv("0000")));
    EXPECT_THROW(compatible(bv("10"), bv("100")), Error);
}

TEST(CompatibleYaw, Examples)
{
    EXPECT_TRUE(compatible_yaw(bv("1000"), bv("0100"), 90.0));
    EXPECT_FALSE(compatible_yaw(bv("1000"), bv("0010"), 90.0));
    EXPECT_FALSE(compatible_yaw(bv("1000"), bv("0100"), 0.0));
    EXPECT_TRUE(compatible_yaw(bv("1000"), bv("0010"), 180.0));
}

TEST(Compatible, Invariances)
{
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t bins = trial % 2 ? 8 : 16;
        const auto a = random_bv(rng, bins), b = random_bv(rng, bins);
        EXPECT_TRUE(compatible(a, a));
        EXPECT_EQ(compatible(a, b), compatible(b, a));
        if (a.popcount() != b.popcount())
            EXPECT_FALSE(compatible(a, b));
        const long s = static_cast<long>(rng() % bins);
        EXPECT_TRUE(compatible(rotate(a, s), a));
        EXPECT_EQ(compatible(rotate(a, s), b), compatible(a, b));
        const double yaw = static_cast<double>(s) * 360.0 / static_cast<double>(bins);
        EXPECT_TRUE(compatible_yaw(rotate(a, s), a, yaw));
        // yaw-anchored matching is never looser than the rotation search
        if (compatible_yaw(b, a, yaw))
            EXPECT_TRUE(compatible(b, a));
        const auto full = visible_mask(bins, 360.0);
        EXPECT_EQ(compatible_masked(a, b, full), compatible(a, b));
        EXPECT_EQ(compatible_yaw_masked(b, a, yaw, full), compatible_yaw(b, a, yaw));
    }
}

TEST(VisibleMask, Examples)
{
    EXPECT_EQ(visible_mask(8, 360.0).to_string(), "11111111");
    EXPECT_EQ(visible_mask(8, 180.0).to_string(), "11100011");
    EXPECT_EQ(visible_mask(8, 90.0).to_string(), "11000001");
    EXPECT_EQ(visible_mask(8, 10.0).to_string(), "10000000");
}

TEST(QueryBearingVector, SnapsYawAndMasks)
{
    // Roads north, east and west.
    const std::vector<double> roads{0.0, 90.0, -90.0};
    EXPECT_EQ(query_bearing_vector(roads, 8, 0.0).to_string(), "10100010");
    EXPECT_EQ(query_bearing_vector(roads, 8, 90.0).to_string(), "10001010");
    EXPECT_EQ(query_bearing_vector(roads, 8, 100.0).to_string(), "10001010");
    EXPECT_EQ(query_bearing_vector(roads, 8, 90.0, 180.0).to_string(), "10000010");
}

TEST(FilterRetrievals, JunctionShapeScenario)
{
    // Node 0 has the query's junction in the same orientation, node 1 the same
    // junction turned by 90 degrees, node 2 a different junction.
    const auto shape = bv("10100010");
    const std::unordered_map<NodeIndex, BearingVector> refs{
        {0, shape}, {1, rotate(shape, 2)}, {2, bv("11000000")}};
    const auto ranked = ranked_nodes({2, 1, 0});
    const auto q = shape;

    EXPECT_EQ(nodes_of(filter_retrievals(ranked, q, refs, FilterMode::none, std::nullopt, 10)),
              (std::vector<NodeIndex>{2, 1, 0}));
    EXPECT_EQ(nodes_of(filter_retrievals(ranked, q, refs, FilterMode::bvm, std::nullopt, 10)),
              (std::vector<NodeIndex>{1, 0}));
    EXPECT_EQ(nodes_of(filter_retrievals(ranked, q, refs, FilterMode::bvm_yaw, 0.0, 10)),
              (std::vector<NodeIndex>{0}));
    EXPECT_EQ(nodes_of(filter_retrievals(ranked, q, refs, FilterMode::bvm_yaw, -90.0, 10)),
              (std::vector<NodeIndex>{1}));
    EXPECT_EQ(nodes_of(filter_retrievals(ranked, q, refs, FilterMode::bvm, std::nullopt, 1)),
              (std::vector<NodeIndex>{1}));
}

TEST(FilterRetrievals, EdgeCases)
{
    const std::unordered_map<NodeIndex, BearingVector> refs{{0, bv("1100")}, {1, bv("1110")}};
    const auto ranked = ranked_nodes({0, 1, 0});
    EXPECT_EQ(nodes_of(filter_retrievals(ranked, bv("1000"), refs, FilterMode::none, std::nullopt, 2)),
              (std::vector<NodeIndex>{0, 1}));
    EXPECT_TRUE(filter_retrievals(ranked, bv("1000"), refs, FilterMode::bvm, std::nullopt, 5).ranked.empty());
    EXPECT_EQ(nodes_of(filter_retrievals(ranked, bv("0110"), refs, FilterMode::bvm, std::nullopt, 5)),
              (std::vector<NodeIndex>{0, 0}));
    EXPECT_THROW(filter_retrievals(ranked, bv("1100"), refs, FilterMode::bvm_yaw, std::nullopt, 5), Error);
    EXPECT_THROW(filter_retrievals(ranked_nodes({7}), bv("1100"), refs, FilterMode::bvm, std::nullopt, 5), Error);
    // With the back bin hidden, 1100 is consistent with a three-road junction.
    EXPECT_EQ(nodes_of(filter_retrievals(ranked, bv("1100"), refs, FilterMode::bvm, std::nullopt, 5, bv("1101"))),
              (std::vector<NodeIndex>{0, 1, 0}));
}

TEST(FilterMode, Names)
{
    for (auto m : {FilterMode::none, FilterMode::bvm, FilterMode::bvm_yaw})
        EXPECT_EQ(filter_mode_from_string(to_string(m)), m);
    EXPECT_THROW(filter_mode_from_string("bvm+"), Error);
}

TEST(PerturbBearings, ZeroNoiseIsIdentity)
{
    Rng rng = make_rng(1, "noise");
    const std::vector<double> roads{0.0, 90.0, -135.0};
    EXPECT_EQ(perturb_bearings(roads, {}, rng), roads);
    EXPECT_TRUE(perturb_bearings(roads, {0.0, 1.0}, rng).empty());
}

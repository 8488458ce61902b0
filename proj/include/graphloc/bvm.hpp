#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "graphloc/geograph.hpp"
#include "graphloc/retrieval.hpp"
#include "graphloc/rng.hpp"

namespace graphloc {

/// V-bit cyclic code of junction road directions. Bin u is centred on
/// u * 360/V degrees clockwise from the reference heading, so bin 0 is
/// straight ahead; bins are half-open with the lower edge inclusive.
struct BearingVector {
    std::vector<std::uint8_t> bits;

    std::size_t size() const { return bits.size(); }
    std::size_t popcount() const
    {
        std::size_t n = 0;
        for (auto b : bits)
            n += b;
        return n;
    }

    std::string to_string() const
    {
        std::string s;
        for (auto b : bits)
            s.push_back(b ? '1' : '0');
        return s;
    }

    static BearingVector from_string(const std::string& s)
    {
        BearingVector bv;
        for (char c : s) {
            if (c != '0' && c != '1')
                throw Error("bearing vector string must contain only 0 and 1: \"" + s + "\"");
            bv.bits.push_back(c == '1');
        }
        return bv;
    }

    friend bool operator==(const BearingVector&, const BearingVector&) = default;
};

inline double bin_width(std::size_t bins) { return 360.0 / static_cast<double>(bins); }

inline BearingVector quantise_bearings(const std::vector<double>& bearings, std::size_t bins, double reference_heading)
{
    if (bins < 2)
        throw Error("quantise_bearings: need at least 2 bins, got " + std::to_string(bins));
    const double w = bin_width(bins);
    BearingVector bv{std::vector<std::uint8_t>(bins, 0)};
    for (double b : bearings) {
        double shifted = std::fmod(b - reference_heading + w / 2.0, 360.0);
        if (shifted < 0.0)
            shifted += 360.0;
        const auto idx = std::min(static_cast<std::size_t>(std::floor(shifted / w)), bins - 1);
        bv.bits[idx] = 1;
    }
    return bv;
}

/// Turns the reference frame clockwise by `s` bins: the bit in bin u + s moves
/// to bin u. Quantising against heading s * 360/V equals rotate(quantise(.., 0), s).
inline BearingVector rotate(const BearingVector& q, long s)
{
    const auto n = static_cast<long>(q.size());
    BearingVector out{std::vector<std::uint8_t>(q.size(), 0)};
    for (long u = 0; u < n; ++u)
        out.bits[static_cast<std::size_t>(u)] = q.bits[static_cast<std::size_t>(((u + s) % n + n) % n)];
    return out;
}

/// Number of whole bins closest to `yaw`, in [0, V).
inline long yaw_shift(double yaw, std::size_t bins)
{
    const auto n = static_cast<long>(bins);
    const long s = std::lround(yaw / bin_width(bins));
    return ((s % n) + n) % n;
}

/// Bins (in the camera frame) whose centres lie within +-fov/2 of straight ahead.
inline BearingVector visible_mask(std::size_t bins, double fov)
{
    BearingVector mask{std::vector<std::uint8_t>(bins, 0)};
    for (std::size_t u = 0; u < bins; ++u) {
        const double centre = wrap_degrees(static_cast<double>(u) * bin_width(bins));
        mask.bits[u] = fov >= 360.0 || std::abs(centre) <= fov / 2.0;
    }
    return mask;
}

inline BearingVector apply_mask(BearingVector q, const BearingVector& mask)
{
    for (std::size_t u = 0; u < q.size(); ++u)
        q.bits[u] &= mask.bits[u];
    return q;
}

namespace detail {

inline void check_same_size(const BearingVector& a, const BearingVector& b)
{
    if (a.size() != b.size())
        throw Error("bearing vectors differ in length: " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
}

} // namespace detail

/// True iff the query equals some cyclic shift of the reference.
inline bool compatible(const BearingVector& query, const BearingVector& ref)
{
    detail::check_same_size(query, ref);
    if (query.popcount() != ref.popcount())
        return false;
    for (std::size_t s = 0; s < ref.size(); ++s) {
        if (rotate(ref, static_cast<long>(s)) == query)
            return true;
    }
    return false;
}

/// Compatibility when only the bins in `mask` are observable in the query.
inline bool compatible_masked(const BearingVector& query, const BearingVector& ref, const BearingVector& mask)
{
    detail::check_same_size(query, ref);
    detail::check_same_size(query, mask);
    for (std::size_t s = 0; s < ref.size(); ++s) {
        if (apply_mask(rotate(ref, static_cast<long>(s)), mask) == query)
            return true;
    }
    return false;
}

/// Compatibility at the single shift implied by a known vehicle yaw.
inline bool compatible_yaw(const BearingVector& query, const BearingVector& ref, double vehicle_yaw)
{
    detail::check_same_size(query, ref);
    return rotate(ref, yaw_shift(vehicle_yaw, ref.size())) == query;
}

inline bool compatible_yaw_masked(const BearingVector& query, const BearingVector& ref, double vehicle_yaw,
                                  const BearingVector& mask)
{
    detail::check_same_size(query, ref);
    detail::check_same_size(query, mask);
    return apply_mask(rotate(ref, yaw_shift(vehicle_yaw, ref.size())), mask) == query;
}

/// Query-side code for a vehicle at `yaw`: bearings quantised in the camera
/// frame snapped to the bin grid, restricted to the bins visible at `fov`.
inline BearingVector query_bearing_vector(const std::vector<double>& bearings, std::size_t bins, double yaw,
                                          double fov = 360.0)
{
    const auto north = quantise_bearings(bearings, bins, 0.0);
    return apply_mask(rotate(north, yaw_shift(yaw, bins)), visible_mask(bins, fov));
}

/// Injectable error model for estimated query bearings.
struct BearingNoise {
    double jitter_deg = 0.0;  // std-dev of Gaussian angular error
    double miss_prob = 0.0;   // probability that a road goes undetected
};

inline std::vector<double> perturb_bearings(const std::vector<double>& bearings, const BearingNoise& noise, Rng& rng)
{
    std::vector<double> out;
    std::normal_distribution<double> jitter(0.0, noise.jitter_deg);
    std::bernoulli_distribution miss(noise.miss_prob);
    for (double b : bearings) {
        if (noise.miss_prob > 0.0 && miss(rng))
            continue;
        out.push_back(wrap_degrees(b + (noise.jitter_deg > 0.0 ? jitter(rng) : 0.0)));
    }
    return out;
}

enum class FilterMode { none, bvm, bvm_yaw };

inline std::string to_string(FilterMode m)
{
    switch (m) {
    case FilterMode::none: return "none";
    case FilterMode::bvm: return "bvm";
    case FilterMode::bvm_yaw: return "bvm-yaw";
    }
    return "?";
}

inline FilterMode filter_mode_from_string(const std::string& s)
{
    if (s == "none")
        return FilterMode::none;
    if (s == "bvm")
        return FilterMode::bvm;
    if (s == "bvm-yaw" || s == "bvm_yaw")
        return FilterMode::bvm_yaw;
    throw Error("unknown filter mode \"" + s + "\" (expected none, bvm or bvm-yaw)");
}

/// Drops candidates whose reference code is incompatible with the query under
/// `mode`, keeping distance order, and truncates to k. No backfill: fewer than
/// k survivors yields a shorter list. `mask` restricts comparison to the bins
/// visible in the query (defaults to all bins).
inline RetrievalResult filter_retrievals(const RetrievalResult& result, const BearingVector& query_bv,
                                         const std::unordered_map<NodeIndex, BearingVector>& ref_bvs,
                                         FilterMode mode, std::optional<double> yaw, std::size_t k,
                                         const std::optional<BearingVector>& mask = std::nullopt)
{
    if (mode == FilterMode::bvm_yaw && !yaw)
        throw Error("filter_retrievals: yaw-anchored matching requires a yaw");
    RetrievalResult out;
    out.query_walk = result.query_walk;
    if (mode == FilterMode::none) {
        for (std::size_t i = 0; i < result.ranked.size() && i < k; ++i)
            out.ranked.push_back(result.ranked[i]);
        return out;
    }
    const BearingVector full{std::vector<std::uint8_t>(query_bv.size(), 1)};
    const BearingVector& m = mask ? *mask : full;
    std::unordered_map<NodeIndex, bool> verdict;
    for (const auto& c : result.ranked) {
        if (out.ranked.size() >= k)
            break;
        auto it = verdict.find(c.node);
        if (it == verdict.end()) {
            const auto ref = ref_bvs.find(c.node);
            if (ref == ref_bvs.end())
                throw Error("filter_retrievals: no reference bearing vector for node index " + std::to_string(c.node));
            const bool ok = mode == FilterMode::bvm ? compatible_masked(query_bv, ref->second, m)
                                                    : compatible_yaw_masked(query_bv, ref->second, *yaw, m);
            it = verdict.emplace(c.node, ok).first;
        }
        if (it->second)
            out.ranked.push_back(c);
    }
    return out;
}

} // namespace graphloc

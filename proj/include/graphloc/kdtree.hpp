#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace graphloc {

/// Exact k-nearest-neighbour KD-tree over squared Euclidean distance.
///
/// Points are stored row-contiguously; each point carries an integer label
/// used to break distance ties (smaller label wins). Splits are on the axis of
/// largest spread at the median; search descends to the nearer child first and
/// visits the far child only when the splitting plane lies within the current
/// k-th best radius. Pruning is strict, so equidistant points are never
/// skipped and results match a sorted linear scan exactly.
template <class T = double>
class KdTree {
public:
    struct Hit {
        T distance;  // squared
        std::uint64_t label;
        std::size_t index;
    };

    KdTree() = default;

    KdTree(std::vector<T> points, std::size_t dim, std::vector<std::uint64_t> labels, std::size_t leaf_size = 16)
        : data_(std::move(points)), dim_(dim), labels_(std::move(labels)), leaf_size_(std::max<std::size_t>(1, leaf_size))
    {
        const std::size_t n = dim_ == 0 ? 0 : data_.size() / dim_;
        order_.resize(n);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        if (n > 0) {
            nodes_.reserve(2 * n / leaf_size_ + 2);
            build(0, n);
        }
    }

    std::size_t size() const { return order_.size(); }
    std::size_t dim() const { return dim_; }
    std::span<const T> point(std::size_t i) const { return std::span<const T>(data_).subspan(i * dim_, dim_); }
    std::uint64_t label(std::size_t i) const { return labels_[i]; }

    T distance(std::span<const T> q, std::size_t i) const
    {
        const T* p = data_.data() + i * dim_;
        T acc = 0;
        for (std::size_t d = 0; d < dim_; ++d) {
            const T diff = q[d] - p[d];
            acc += diff * diff;
        }
        return acc;
    }

    /// The k nearest points, ascending by (distance, label).
    std::vector<Hit> knn(std::span<const T> query, std::size_t k) const
    {
        std::vector<Hit> heap;
        if (nodes_.empty() || k == 0)
            return heap;
        heap.reserve(k + 1);
        search(0, query, k, heap);
        std::sort_heap(heap.begin(), heap.end(), ranks_before);
        return heap;
    }

private:
    struct Node {
        std::size_t begin, end;  // range in order_
        std::size_t split_dim = 0;
        T split_value = 0;
        std::int64_t left = -1, right = -1;
    };

    // Strict weak order on (distance, label); as a heap comparator it keeps
    // the current worst hit at the front.
    static bool ranks_before(const Hit& a, const Hit& b)
    {
        return a.distance < b.distance || (a.distance == b.distance && a.label < b.label);
    }

    std::int64_t build(std::size_t begin, std::size_t end)
    {
        const auto id = static_cast<std::int64_t>(nodes_.size());
        nodes_.push_back(Node{begin, end});
        if (end - begin <= leaf_size_)
            return id;

        std::size_t best_dim = 0;
        T best_spread = -1;
        for (std::size_t d = 0; d < dim_; ++d) {
            T lo = std::numeric_limits<T>::max(), hi = std::numeric_limits<T>::lowest();
            for (std::size_t i = begin; i < end; ++i) {
                const T v = data_[order_[i] * dim_ + d];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                best_dim = d;
            }
        }
        if (best_spread <= 0)
            return id;  // all points identical: keep as a leaf

        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                         order_.begin() + static_cast<std::ptrdiff_t>(mid),
                         order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                             return data_[a * dim_ + best_dim] < data_[b * dim_ + best_dim];
                         });
        nodes_[id].split_dim = best_dim;
        nodes_[id].split_value = data_[order_[mid] * dim_ + best_dim];
        const auto left = build(begin, mid);
        const auto right = build(mid, end);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void offer(std::vector<Hit>& heap, std::size_t k, Hit h) const
    {
        if (heap.size() < k) {
            heap.push_back(h);
            std::push_heap(heap.begin(), heap.end(), ranks_before);
        } else if (ranks_before(h, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), ranks_before);
            heap.back() = h;
            std::push_heap(heap.begin(), heap.end(), ranks_before);
        }
    }

    void search(std::int64_t id, std::span<const T> q, std::size_t k, std::vector<Hit>& heap) const
    {
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        if (node.left < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                const std::size_t p = order_[i];
                offer(heap, k, Hit{distance(q, p), labels_[p], p});
            }
            return;
        }
        // Points equal to split_value may sit on either side of the median,
        // so both children are bounded only by the plane itself.
        const T diff = q[node.split_dim] - node.split_value;
        const auto near = diff < 0 ? node.left : node.right;
        const auto far = diff < 0 ? node.right : node.left;
        search(near, q, k, heap);
        if (heap.size() < k || diff * diff <= heap.front().distance)
            search(far, q, k, heap);
    }

    std::vector<T> data_;
    std::size_t dim_ = 0;
    std::vector<std::uint64_t> labels_;
    std::size_t leaf_size_ = 16;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
};

} // namespace graphloc

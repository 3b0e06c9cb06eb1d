#include "psplat/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace psplat {

namespace {
constexpr std::int32_t kLeafSize = 16;
}

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("KdTree: empty point set");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    root_ = build(0, std::int32_t(points_.size()), 0);
}

std::int32_t KdTree::build(std::int32_t begin, std::int32_t end, int depth) {
    Node node;
    node.begin = begin;
    node.end = end;
    if (end - begin <= kLeafSize) {
        nodes_.push_back(node);
        return std::int32_t(nodes_.size() - 1);
    }
    // Split on the widest axis at the median.
    Vec3 lo = points_[order_[begin]], hi = lo;
    for (std::int32_t i = begin + 1; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::int32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::int32_t a, std::int32_t b) {
                         return points_[a][axis] != points_[b][axis]
                                    ? points_[a][axis] < points_[b][axis]
                                    : a < b;
                     });
    node.axis = std::int8_t(axis);
    node.split = points_[order_[mid]][axis];
    (void)depth;
    const std::int32_t self = std::int32_t(nodes_.size());
    nodes_.push_back(node);
    const std::int32_t left = build(begin, mid, depth + 1);
    const std::int32_t right = build(mid, end, depth + 1);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
}

void KdTree::search(std::int32_t ni, const Vec3& query, Result& best) const {
    const Node& node = nodes_[ni];
    if (node.axis < 0) {
        for (std::int32_t i = node.begin; i < node.end; ++i) {
            const std::int32_t idx = order_[i];
            const double d = (points_[idx] - query).norm();
            if (d < best.distance ||
                (d == best.distance && std::size_t(idx) < best.index)) {
                best.distance = d;
                best.index = std::size_t(idx);
            }
        }
        return;
    }
    const double delta = query[node.axis] - node.split;
    const std::int32_t first = delta < 0 ? node.left : node.right;
    const std::int32_t second = delta < 0 ? node.right : node.left;
    search(first, query, best);
    if (std::abs(delta) <= best.distance) search(second, query, best);
}

KdTree::Result KdTree::nearest(const Vec3& query) const {
    Result best;
    best.distance = std::numeric_limits<double>::infinity();
    best.index = std::numeric_limits<std::size_t>::max();
    search(root_, query, best);
    return best;
}

}  // namespace psplat

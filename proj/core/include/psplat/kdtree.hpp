#pragma once

#include "psplat/geometry.hpp"

namespace psplat {

/// Static 3D kd-tree for nearest-neighbor queries. Results are independent
/// of the build: exact distances with ties broken toward the lowest point
/// index.
class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points);

    struct Result {
        std::size_t index = 0;
        double distance = 0;
    };
    Result nearest(const Vec3& query) const;

    std::size_t size() const { return points_.size(); }

private:
    struct Node {
        std::int32_t left = -1, right = -1;
        std::int32_t begin = 0, end = 0;  // leaf range into order_
        std::int8_t axis = -1;            // -1 marks a leaf
        double split = 0;
    };
    std::int32_t build(std::int32_t begin, std::int32_t end, int depth);
    void search(std::int32_t node, const Vec3& query, Result& best) const;

    std::vector<Vec3> points_;
    std::vector<std::int32_t> order_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

}  // namespace psplat

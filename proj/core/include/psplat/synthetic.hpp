#pragma once

#include "psplat/geometry.hpp"

namespace psplat {

/// Ground-truth planar face: a rectangle with a free-space-facing normal.
struct GtFace {
    Vec3 center = Vec3::Zero();
    Vec3 u_axis = Vec3::UnitX();  // unit, in-plane
    Vec3 v_axis = Vec3::UnitY();
    double half_u = 0, half_v = 0;
    Vec3 normal = Vec3::UnitZ();  // u_axis x v_axis
    std::uint32_t instance_id = 0;

    double area() const { return 4.0 * half_u * half_v; }
};

struct Pose {
    Mat3 rot_wc = Mat3::Identity();
    Vec3 t_wc = Vec3::Zero();
};

struct SyntheticScene {
    std::vector<GtFace> faces;
    std::vector<Pose> trajectory;
    Vec3 room_min = Vec3::Zero();
    Vec3 room_max = Vec3::Zero();
    // Interior boxes as (min, max) corners; used for free-space tests.
    std::vector<std::pair<Vec3, Vec3>> boxes;

    Vec3 center() const { return 0.5 * (room_min + room_max); }
    bool in_free_space(const Vec3& p, double margin = 0.0) const;
};

constexpr std::uint32_t kInvalidInstance = 0xFFFFFFFFu;

/// Axis-aligned room [0,w]x[0,d]x[0,h] with inward wall normals plus
/// n_boxes floor-standing boxes contributing 5 outward faces each.
/// Overlapping box placements are re-sampled; throws after 100 attempts.
SyntheticScene generate_box_room(double width, double depth, double height, int n_boxes,
                                 std::uint64_t seed);

/// Exact per-pixel nearest ray/face intersection. Fills the view's target
/// depth (z-depth) and camera-facing normal maps; `instance_map` (optional)
/// gets the face instance id or kInvalidInstance. `depth_exact` (optional)
/// receives the depth before float quantization and noise.
void render_ground_truth(const SyntheticScene& scene, CameraView& view,
                         std::vector<std::uint32_t>* instance_map = nullptr,
                         double depth_noise_sigma = 0.0, std::uint64_t noise_seed = 0,
                         std::vector<double>* depth_exact = nullptr);

/// Interior orbit with jittered heights and look-at targets cycling over the
/// faces. Guarantees every face is seen by >= 3 views at <= 60 degrees
/// grazing; throws with the uncovered face ids after 100 attempts.
std::vector<Pose> sample_trajectory(const SyntheticScene& scene, int n_views,
                                    std::uint64_t seed);

}  // namespace psplat

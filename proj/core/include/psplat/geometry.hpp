#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace psplat {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

// Quaternion stored as (w, x, y, z).
using Quat = Eigen::Vector4d;

constexpr double kRadiiFloor = 1e-4;    // meters, lower bound on every radius
constexpr double kParallelEps = 1e-8;   // |d.n| below this counts as parallel
constexpr double kDefaultTNear = 0.01;  // meters, near clip on the ray parameter

/// Learnable 3D rectangle: center, rotation and four directional radii
/// {r_x+, r_x-, r_y+, r_y-} measured along the local X/Y axes.
struct PlanePrimitive {
    Vec3 center = Vec3::Zero();
    Quat rotation = Quat(1, 0, 0, 0);  // unit, renormalized after every update
    Vec4 radii = Vec4::Constant(0.1);  // all > kRadiiFloor
    std::int64_t id = 0;

    double area() const { return (radii[0] + radii[1]) * (radii[2] + radii[3]); }
};

/// Orthonormal local frame of a primitive: in-plane axes and normal.
struct PlaneFrame {
    Vec3 v_x = Vec3::UnitX();
    Vec3 v_y = Vec3::UnitY();
    Vec3 n = Vec3::UnitZ();
};

struct Ray {
    Vec3 origin = Vec3::Zero();
    Vec3 dir = Vec3::UnitZ();  // unit length, world frame
    int u = 0;
    int v = 0;
};

/// Pinhole camera plus its per-view supervision targets.
/// Depth is camera-frame z in meters (<= 0 invalid); normals are unit
/// vectors in the camera frame (zero vector invalid).
struct CameraView {
    int id = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    Mat3 rot_wc = Mat3::Identity();  // camera-to-world rotation
    Vec3 t_wc = Vec3::Zero();        // camera center in world frame
    std::vector<float> target_depth;   // H*W
    std::vector<float> target_normal;  // H*W*3, camera frame

    std::size_t pixel_count() const { return std::size_t(width) * height; }
    bool depth_valid(std::size_t px) const { return target_depth[px] > 0.0f; }
    bool normal_valid(std::size_t px) const {
        return target_normal[3 * px] != 0.0f || target_normal[3 * px + 1] != 0.0f ||
               target_normal[3 * px + 2] != 0.0f;
    }
    Vec3 camera_z_world() const { return rot_wc.col(2); }
};

struct Hit {
    Vec3 point;    // world frame
    double t;      // ray parameter (= metric distance, |dir| = 1)
    double z_cam;  // camera-frame z of the hit
};

Mat3 quat_to_matrix(const Quat& q);
Quat quat_normalized(const Quat& q);
/// Minimal rotation taking (0,0,1) onto `n` (|n|=1). Antipodal case maps
/// to a 180-degree turn about X.
Quat quat_from_z_to(const Vec3& n);

PlaneFrame plane_frame(const Quat& q);

Ray generate_ray(const CameraView& view, int u, int v);

/// Ray/plane intersection per the primitive's supporting plane. Empty when
/// the ray is parallel (|d.n| < parallel_eps) or t <= t_near.
std::optional<Hit> intersect(const Ray& ray, const PlanePrimitive& prim, const PlaneFrame& frame,
                             const Vec3& cam_z_world, double t_near = kDefaultTNear,
                             double parallel_eps = kParallelEps);

/// Rectangle corners in the order (+x+y, -x+y, -x-y, +x-y).
std::array<Vec3, 4> rect_corners(const PlanePrimitive& prim, const PlaneFrame& frame);

/// Exact minimum distance between two rectangles in 3D.
double rect_distance(const PlanePrimitive& a, const PlaneFrame& fa, const PlanePrimitive& b,
                     const PlaneFrame& fb);

struct Scene {
    std::vector<PlanePrimitive> primitives;
    std::int64_t next_id = 0;

    std::int64_t claim_id() { return next_id++; }
};

}  // namespace psplat

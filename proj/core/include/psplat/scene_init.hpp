#pragma once

#include "psplat/geometry.hpp"

namespace psplat {

struct InitConfig {
    enum class Mode { depth, sphere };
    Mode mode = Mode::depth;
    int n_primitives = 2000;
    double radius_scale = 0.5;        // initial radius = scale * nearest-center distance
    double sphere_radius_value = 0.05;
    std::uint64_t seed = 0;
};

/// Back-projects the depth/normal targets of all views into a fused world
/// point cloud, samples n_primitives points uniformly from it and turns each
/// into a primitive (normal -> rotation, nearest-neighbor distance -> radii).
Scene init_from_depth(const std::vector<CameraView>& views, const InitConfig& cfg);

/// Primitives on the scene bounding sphere (Fibonacci lattice with a seeded
/// rotation), normals pointing at the sphere center, fixed radii.
Scene init_sphere(const std::vector<CameraView>& views, const InitConfig& cfg);

}  // namespace psplat

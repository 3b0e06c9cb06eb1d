#include "psplat/scene_init.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace psplat {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(splitmix64(seed)) {}
    std::uint64_t next() { return state = splitmix64(state); }
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }
};

struct Sample {
    Vec3 point;
    Vec3 normal;  // world frame
};

struct Bounds {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
    void add(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    bool valid() const { return (hi - lo).minCoeff() >= 0; }
    double diagonal() const { return (hi - lo).norm(); }
    Vec3 center() const { return 0.5 * (lo + hi); }
};

// Streams every valid back-projected pixel through a reservoir of size k.
void stream_cloud(const std::vector<CameraView>& views, std::size_t k, Rng& rng,
                  std::vector<Sample>& reservoir, Bounds& bounds, std::size_t& total) {
    total = 0;
    for (const CameraView& view : views) {
        for (int v = 0; v < view.height; ++v) {
            for (int u = 0; u < view.width; ++u) {
                const std::size_t px = std::size_t(v) * view.width + u;
                if (!view.depth_valid(px) || !view.normal_valid(px)) continue;
                const double z = view.target_depth[px];
                const Vec3 p_cam((u + 0.5 - view.cx) / view.fx * z,
                                 (v + 0.5 - view.cy) / view.fy * z, z);
                const Vec3 p_world = view.rot_wc * p_cam + view.t_wc;
                bounds.add(p_world);
                const Vec3 n_cam(view.target_normal[3 * px], view.target_normal[3 * px + 1],
                                 view.target_normal[3 * px + 2]);
                Sample s{p_world, (view.rot_wc * n_cam).normalized()};
                if (reservoir.size() < k) {
                    reservoir.push_back(s);
                } else {
                    const std::size_t j = rng.next() % (total + 1);
                    if (j < k) reservoir[j] = s;
                }
                ++total;
            }
        }
    }
}

}  // namespace

Scene init_from_depth(const std::vector<CameraView>& views, const InitConfig& cfg) {
    if (cfg.n_primitives < 1) throw std::invalid_argument("init: n_primitives must be >= 1");
    Rng rng(cfg.seed);
    std::vector<Sample> samples;
    samples.reserve(cfg.n_primitives);
    Bounds bounds;
    std::size_t total = 0;
    stream_cloud(views, std::size_t(cfg.n_primitives), rng, samples, bounds, total);
    if (samples.empty()) throw std::runtime_error("init: no valid depth pixels in any view");

    Scene scene;
    scene.primitives.reserve(samples.size());
    const double fallback_radius = std::max(0.05 * bounds.diagonal(), 10 * kRadiiFloor);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double nearest = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < samples.size(); ++j) {
            if (j == i) continue;
            nearest = std::min(nearest, (samples[i].point - samples[j].point).norm());
        }
        const double radius = samples.size() > 1
                                  ? std::max(cfg.radius_scale * nearest, kRadiiFloor)
                                  : fallback_radius;
        PlanePrimitive prim;
        prim.center = samples[i].point;
        prim.rotation = quat_from_z_to(samples[i].normal);
        prim.radii = Vec4::Constant(radius);
        prim.id = scene.claim_id();
        scene.primitives.push_back(prim);
    }
    return scene;
}

Scene init_sphere(const std::vector<CameraView>& views, const InitConfig& cfg) {
    if (cfg.n_primitives < 1) throw std::invalid_argument("init: n_primitives must be >= 1");
    Rng rng(cfg.seed);
    Bounds bounds;
    for (const CameraView& view : views) {
        bounds.add(view.t_wc);
        for (int v = 0; v < view.height; ++v) {
            for (int u = 0; u < view.width; ++u) {
                const std::size_t px = std::size_t(v) * view.width + u;
                if (!view.depth_valid(px)) continue;
                const double z = view.target_depth[px];
                const Vec3 p_cam((u + 0.5 - view.cx) / view.fx * z,
                                 (v + 0.5 - view.cy) / view.fy * z, z);
                bounds.add(view.rot_wc * p_cam + view.t_wc);
            }
        }
    }
    if (!bounds.valid() || bounds.diagonal() < 1e-9)
        throw std::runtime_error("init: degenerate scene bounds for sphere initialization");

    const Vec3 center = bounds.center();
    const double radius = 0.5 * bounds.diagonal();

    // Seeded random rotation applied to the lattice.
    Quat q;
    for (int k = 0; k < 4; ++k) q[k] = rng.uniform() * 2.0 - 1.0;
    if (q.norm() < 1e-9) q = Quat(1, 0, 0, 0);
    const Mat3 lattice_rot = quat_to_matrix(quat_normalized(q));

    Scene scene;
    const int n = cfg.n_primitives;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / n;
        const double r_xy = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        const Vec3 dir = lattice_rot * Vec3(r_xy * std::cos(phi), r_xy * std::sin(phi), z);
        PlanePrimitive prim;
        prim.center = center + radius * dir;
        prim.rotation = quat_from_z_to(-dir);  // normal points to the sphere center
        prim.radii = Vec4::Constant(cfg.sphere_radius_value);
        prim.id = scene.claim_id();
        scene.primitives.push_back(prim);
    }
    return scene;
}

}  // namespace psplat

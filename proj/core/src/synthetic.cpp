#include "psplat/synthetic.hpp"

#include <cmath>
#include <limits>
#include <sstream>
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
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double gaussian() {
        const double u1 = std::max(uniform(), 1e-300);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
};

GtFace make_face(const Vec3& center, const Vec3& u_axis, const Vec3& v_axis, double half_u,
                 double half_v, std::uint32_t id) {
    GtFace f;
    f.center = center;
    f.u_axis = u_axis;
    f.v_axis = v_axis;
    f.half_u = half_u;
    f.half_v = half_v;
    f.normal = u_axis.cross(v_axis);
    f.instance_id = id;
    return f;
}

void add_box_faces(SyntheticScene& scene, const Vec3& lo, const Vec3& hi) {
    auto next_id = [&scene] { return std::uint32_t(scene.faces.size()); };
    const Vec3 c = 0.5 * (lo + hi);
    const Vec3 h = 0.5 * (hi - lo);
    const Vec3 x = Vec3::UnitX(), y = Vec3::UnitY(), z = Vec3::UnitZ();
    // Top plus four sides, outward normals; the bottom rests on the floor.
    scene.faces.push_back(make_face({c.x(), c.y(), hi.z()}, x, y, h.x(), h.y(), next_id()));
    scene.faces.push_back(make_face({lo.x(), c.y(), c.z()}, z, y, h.z(), h.y(), next_id()));
    scene.faces.push_back(make_face({hi.x(), c.y(), c.z()}, y, z, h.y(), h.z(), next_id()));
    scene.faces.push_back(make_face({c.x(), lo.y(), c.z()}, x, z, h.x(), h.z(), next_id()));
    scene.faces.push_back(make_face({c.x(), hi.y(), c.z()}, z, x, h.z(), h.x(), next_id()));
}

// Nearest ray/face intersection; direction need not be unit length, the
// returned parameter is in units of |dir|.
bool cast_gt_ray(const SyntheticScene& scene, const Vec3& origin, const Vec3& dir, double t_min,
                 double& t_out, int& face_out) {
    double best = std::numeric_limits<double>::infinity();
    int best_face = -1;
    for (std::size_t i = 0; i < scene.faces.size(); ++i) {
        const GtFace& f = scene.faces[i];
        const double denom = dir.dot(f.normal);
        if (std::abs(denom) < 1e-12) continue;
        const double t = (f.center - origin).dot(f.normal) / denom;
        if (t <= t_min || t >= best) continue;
        const Vec3 e = origin + t * dir - f.center;
        if (std::abs(e.dot(f.u_axis)) > f.half_u || std::abs(e.dot(f.v_axis)) > f.half_v)
            continue;
        best = t;
        best_face = int(i);
    }
    if (best_face < 0) return false;
    t_out = best;
    face_out = best_face;
    return true;
}

}  // namespace

bool SyntheticScene::in_free_space(const Vec3& p, double margin) const {
    for (int k = 0; k < 3; ++k)
        if (p[k] < room_min[k] + margin || p[k] > room_max[k] - margin) return false;
    for (const auto& [lo, hi] : boxes) {
        bool inside = true;
        for (int k = 0; k < 3; ++k)
            if (p[k] < lo[k] - margin || p[k] > hi[k] + margin) inside = false;
        if (inside) return false;
    }
    return true;
}

SyntheticScene generate_box_room(double width, double depth, double height, int n_boxes,
                                 std::uint64_t seed) {
    if (width <= 0 || depth <= 0 || height <= 0)
        throw std::invalid_argument("generate_box_room: dimensions must be positive");

    SyntheticScene scene;
    scene.room_min = Vec3::Zero();
    scene.room_max = Vec3(width, depth, height);

    const Vec3 x = Vec3::UnitX(), y = Vec3::UnitY(), z = Vec3::UnitZ();
    const double hw = width / 2, hd = depth / 2, hh = height / 2;
    scene.faces.push_back(make_face({hw, hd, 0}, x, y, hw, hd, 0));        // floor, +z
    scene.faces.push_back(make_face({hw, hd, height}, y, x, hd, hw, 1));   // ceiling, -z
    scene.faces.push_back(make_face({0, hd, hh}, y, z, hd, hh, 2));        // x=0 wall, +x
    scene.faces.push_back(make_face({width, hd, hh}, z, y, hh, hd, 3));    // x=w wall, -x
    scene.faces.push_back(make_face({hw, 0, hh}, z, x, hh, hw, 4));        // y=0 wall, +y
    scene.faces.push_back(make_face({hw, depth, hh}, x, z, hw, hh, 5));    // y=d wall, -y

    Rng rng(seed);
    const double wall_margin = 0.4, box_gap = 0.25;
    for (int b = 0; b < n_boxes; ++b) {
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            const double sx = rng.uniform(0.5, 1.1);
            const double sy = rng.uniform(0.5, 1.1);
            const double sz = rng.uniform(0.4, std::min(1.0, 0.5 * height));
            const double x0 = rng.uniform(wall_margin, width - wall_margin - sx);
            const double y0 = rng.uniform(wall_margin, depth - wall_margin - sy);
            if (x0 < wall_margin || y0 < wall_margin) continue;
            const Vec3 lo(x0, y0, 0.0), hi(x0 + sx, y0 + sy, sz);
            bool overlaps = false;
            for (const auto& [olo, ohi] : scene.boxes) {
                bool gap = false;
                for (int k = 0; k < 2; ++k)
                    if (hi[k] + box_gap < olo[k] || lo[k] - box_gap > ohi[k]) gap = true;
                if (!gap) overlaps = true;
            }
            if (overlaps) continue;
            scene.boxes.emplace_back(lo, hi);
            add_box_faces(scene, lo, hi);
            placed = true;
        }
        if (!placed)
            throw std::runtime_error("generate_box_room: failed to place a box in 100 attempts");
    }
    return scene;
}

void render_ground_truth(const SyntheticScene& scene, CameraView& view,
                         std::vector<std::uint32_t>* instance_map, double depth_noise_sigma,
                         std::uint64_t noise_seed, std::vector<double>* depth_exact) {
    view.target_depth.assign(view.pixel_count(), 0.0f);
    view.target_normal.assign(view.pixel_count() * 3, 0.0f);
    if (instance_map) instance_map->assign(view.pixel_count(), kInvalidInstance);
    if (depth_exact) depth_exact->assign(view.pixel_count(), 0.0);

    Rng noise(noise_seed);
    for (int v = 0; v < view.height; ++v) {
        for (int u = 0; u < view.width; ++u) {
            // Direction with camera z-component 1, so the ray parameter is
            // exactly the z-depth of the hit.
            const Vec3 d_cam((u + 0.5 - view.cx) / view.fx, (v + 0.5 - view.cy) / view.fy, 1.0);
            const Vec3 d_world = view.rot_wc * d_cam;
            double t;
            int face;
            if (!cast_gt_ray(scene, view.t_wc, d_world, 1e-9, t, face)) continue;
            const std::size_t px = std::size_t(v) * view.width + u;
            if (depth_exact) (*depth_exact)[px] = t;
            double depth = t;
            if (depth_noise_sigma > 0)
                depth = std::max(1e-4, depth + depth_noise_sigma * noise.gaussian());
            view.target_depth[px] = float(depth);
            const GtFace& f = scene.faces[face];
            const double flip = f.normal.dot(d_world) > 0 ? -1.0 : 1.0;
            const Vec3 n_cam = view.rot_wc.transpose() * (flip * f.normal);
            for (int k = 0; k < 3; ++k) view.target_normal[3 * px + k] = float(n_cam[k]);
            if (instance_map) (*instance_map)[px] = f.instance_id;
        }
    }
}

namespace {

Pose look_at(const Vec3& position, const Vec3& target) {
    const Vec3 forward = (target - position).normalized();
    Vec3 up = Vec3::UnitZ();
    if (std::abs(forward.dot(up)) > 0.99) up = Vec3::UnitY();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);
    Pose pose;
    pose.rot_wc.col(0) = right;
    pose.rot_wc.col(1) = down;
    pose.rot_wc.col(2) = forward;
    pose.t_wc = position;
    return pose;
}

bool face_observed(const SyntheticScene& scene, const GtFace& face, const Pose& pose,
                   double max_grazing_cos, double fov_cos) {
    // A fixating camera observes the face its optical axis lands on.
    {
        const Vec3 axis = pose.rot_wc.col(2);
        double t;
        int hit_face;
        if (cast_gt_ray(scene, pose.t_wc, axis, 1e-9, t, hit_face) &&
            scene.faces[hit_face].instance_id == face.instance_id &&
            -axis.dot(face.normal) >= max_grazing_cos)
            return true;
    }
    for (int s = 0; s < 5; ++s) {
        const double su = s == 1 || s == 2 ? 0.5 : (s == 3 || s == 4 ? -0.5 : 0.0);
        const double sv = s == 1 || s == 3 ? 0.5 : (s == 2 || s == 4 ? -0.5 : 0.0);
        const Vec3 pt =
            face.center + su * face.half_u * face.u_axis + sv * face.half_v * face.v_axis;
        const Vec3 to_cam = pose.t_wc - pt;
        const double dist = to_cam.norm();
        if (dist < 1e-6) continue;
        if (face.normal.dot(to_cam) / dist < max_grazing_cos) continue;
        const Vec3 dir = -to_cam / dist;
        if (dir.dot(pose.rot_wc.col(2)) < fov_cos) continue;
        double t;
        int hit_face;
        if (!cast_gt_ray(scene, pose.t_wc, dir, 1e-9, t, hit_face)) continue;
        if (scene.faces[hit_face].instance_id != face.instance_id) continue;
        if (std::abs(t - dist) > 1e-6) continue;
        return true;
    }
    return false;
}

}  // namespace

std::vector<Pose> sample_trajectory(const SyntheticScene& scene, int n_views,
                                    std::uint64_t seed) {
    if (n_views < 1) throw std::invalid_argument("sample_trajectory: n_views must be >= 1");
    const Vec3 center = scene.center();
    const double span_x = scene.room_max.x() - scene.room_min.x();
    const double span_y = scene.room_max.y() - scene.room_min.y();
    const double span_z = scene.room_max.z() - scene.room_min.z();
    const double grazing_cos = 0.5;       // 60 degrees
    const double fov_cos = std::cos(28.0 * M_PI / 180.0);

    std::vector<int> uncovered;
    for (int attempt = 0; attempt < 100; ++attempt) {
        Rng rng(splitmix64(seed) ^ splitmix64(std::uint64_t(attempt)));
        std::vector<Pose> poses;
        poses.reserve(n_views);
        for (int i = 0; i < n_views; ++i) {
            // Round-robin fixation so n_views >= 3 * n_faces guarantees
            // every face at least three dedicated views.
            const GtFace& target_face =
                scene.faces[(std::size_t(i) + attempt) % scene.faces.size()];
            const Vec3 target = target_face.center +
                                (rng.uniform() - 0.5) * target_face.half_u * target_face.u_axis +
                                (rng.uniform() - 0.5) * target_face.half_v * target_face.v_axis;

            // Stand off along the target's normal (within its grazing cone),
            // no farther than the free space in front of the face allows.
            double reach = 1.8;
            {
                double t_free;
                int blocker;
                if (cast_gt_ray(scene, target + 1e-6 * target_face.normal, target_face.normal,
                                1e-9, t_free, blocker))
                    reach = std::min(reach, t_free);
            }
            const double hi = std::max(reach - 0.18, 0.2);
            const double lo = std::max(0.35 * hi, 0.18);
            Vec3 position = center;
            bool ok = false;
            for (int inner = 0; inner < 60 && !ok; ++inner) {
                const double standoff = rng.uniform(lo, hi);
                position = target + standoff * target_face.normal +
                           (rng.uniform() - 0.5) * 0.6 * standoff * target_face.u_axis +
                           (rng.uniform() - 0.5) * 0.6 * standoff * target_face.v_axis;
                ok = scene.in_free_space(position, std::min(0.15, 0.45 * standoff));
            }
            for (int inner = 0; inner < 60 && !ok; ++inner) {
                const double theta =
                    2.0 * M_PI * (double(i) + 0.4 * (rng.uniform() - 0.5)) / double(n_views);
                const double orbit = 0.5 * std::min(span_x, span_y) * rng.uniform(0.2, 0.9);
                position = Vec3(center.x() + orbit * std::cos(theta),
                                center.y() + orbit * std::sin(theta),
                                scene.room_min.z() + span_z * rng.uniform(0.3, 0.7));
                ok = scene.in_free_space(position, 0.15);
            }
            poses.push_back(look_at(position, target));
        }

        uncovered.clear();
        for (const GtFace& face : scene.faces) {
            int seen = 0;
            for (const Pose& pose : poses) {
                if (face_observed(scene, face, pose, grazing_cos, fov_cos)) ++seen;
                if (seen >= 3) break;
            }
            if (seen < 3) uncovered.push_back(int(face.instance_id));
        }
        if (uncovered.empty()) return poses;
    }
    std::ostringstream msg;
    msg << "sample_trajectory: coverage failed for faces";
    for (int f : uncovered) msg << ' ' << f;
    throw std::runtime_error(msg.str());
}

}  // namespace psplat

#include "psplat/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace psplat {

Mat3 quat_to_matrix(const Quat& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 m;
    m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return m;
}

Quat quat_normalized(const Quat& q) {
    return q / q.norm();
}

Quat quat_from_z_to(const Vec3& n) {
    const Vec3 e3 = Vec3::UnitZ();
    const double d = e3.dot(n);
    if (1.0 + d < 1e-12) return Quat(0, 1, 0, 0);
    // Half-way construction: q = normalize(1 + e3.n, e3 x n)
    const Vec3 c = e3.cross(n);
    Quat q(1.0 + d, c.x(), c.y(), c.z());
    return quat_normalized(q);
}

PlaneFrame plane_frame(const Quat& q) {
    const Mat3 r = quat_to_matrix(q);
    PlaneFrame f;
    f.v_x = r.col(0);
    f.v_y = r.col(1);
    f.n = r.col(2);
    return f;
}

Ray generate_ray(const CameraView& view, int u, int v) {
    Ray ray;
    ray.u = u;
    ray.v = v;
    ray.origin = view.t_wc;
    const Vec3 d_cam((u + 0.5 - view.cx) / view.fx, (v + 0.5 - view.cy) / view.fy, 1.0);
    ray.dir = (view.rot_wc * d_cam).normalized();
    return ray;
}

std::optional<Hit> intersect(const Ray& ray, const PlanePrimitive& prim, const PlaneFrame& frame,
                             const Vec3& cam_z_world, double t_near, double parallel_eps) {
    const double denom = ray.dir.dot(frame.n);
    if (std::abs(denom) < parallel_eps) return std::nullopt;
    const double t = (prim.center - ray.origin).dot(frame.n) / denom;
    if (t <= t_near) return std::nullopt;
    Hit hit;
    hit.t = t;
    hit.point = ray.origin + t * ray.dir;
    hit.z_cam = t * ray.dir.dot(cam_z_world);
    return hit;
}

std::array<Vec3, 4> rect_corners(const PlanePrimitive& prim, const PlaneFrame& frame) {
    const Vec3& p = prim.center;
    const Vec4& r = prim.radii;
    return {p + r[0] * frame.v_x + r[2] * frame.v_y, p - r[1] * frame.v_x + r[2] * frame.v_y,
            p - r[1] * frame.v_x - r[3] * frame.v_y, p + r[0] * frame.v_x - r[3] * frame.v_y};
}

namespace {

double point_rect_distance(const Vec3& x, const PlanePrimitive& prim, const PlaneFrame& f) {
    const Vec3 e = x - prim.center;
    const double px = std::clamp(e.dot(f.v_x), -prim.radii[1], prim.radii[0]);
    const double py = std::clamp(e.dot(f.v_y), -prim.radii[3], prim.radii[2]);
    const Vec3 closest = prim.center + px * f.v_x + py * f.v_y;
    return (x - closest).norm();
}

double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
    // Ericson, Real-Time Collision Detection, closest point of two segments.
    const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
    const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
    double s = 0, t = 0;
    constexpr double eps = 1e-15;
    if (a <= eps && e <= eps) return r.norm();
    if (a <= eps) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = d1.dot(r);
        if (e <= eps) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = d1.dot(d2), denom = a * e - b * b;
            if (denom > eps) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
            t = (b * s + f) / e;
            if (t < 0) {
                t = 0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1) {
                t = 1;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    return ((p1 + s * d1) - (p2 + t * d2)).norm();
}

// Distance 0 when the segment crosses the rectangle's interior.
bool segment_crosses_rect(const Vec3& a, const Vec3& b, const PlanePrimitive& prim,
                          const PlaneFrame& f) {
    const double ha = (a - prim.center).dot(f.n);
    const double hb = (b - prim.center).dot(f.n);
    if (ha * hb > 0) return false;
    const double denom = ha - hb;
    if (std::abs(denom) < 1e-15) return false;
    const double s = ha / denom;
    const Vec3 x = a + s * (b - a);
    const Vec3 e = x - prim.center;
    const double px = e.dot(f.v_x), py = e.dot(f.v_y);
    return px >= -prim.radii[1] && px <= prim.radii[0] && py >= -prim.radii[3] &&
           py <= prim.radii[2];
}

}  // namespace

double rect_distance(const PlanePrimitive& a, const PlaneFrame& fa, const PlanePrimitive& b,
                     const PlaneFrame& fb) {
    const auto ca = rect_corners(a, fa);
    const auto cb = rect_corners(b, fb);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i) {
        best = std::min(best, point_rect_distance(ca[i], b, fb));
        best = std::min(best, point_rect_distance(cb[i], a, fa));
    }
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            best = std::min(best, segment_segment_distance(ca[i], ca[(i + 1) % 4], cb[j],
                                                           cb[(j + 1) % 4]));
        }
    }
    for (int i = 0; i < 4; ++i) {
        if (segment_crosses_rect(ca[i], ca[(i + 1) % 4], b, fb)) return 0.0;
        if (segment_crosses_rect(cb[i], cb[(i + 1) % 4], a, fa)) return 0.0;
    }
    return best;
}

}  // namespace psplat

#include "psplat/splatting.hpp"

#include <cmath>

namespace psplat {

double lambda_schedule(std::int64_t ite, const SplatParams& params) {
    const double l = params.lambda_base * std::exp(-(1.0 - params.lambda_rate * double(ite)));
    return std::min(l, params.lambda_max);
}

SplatEval plane_splat_weight(double p_x, double p_y, const Vec4& radii, double lambda) {
    const double k = 5.0 * lambda;

    // Branch by the sign of the projection: positive picks r+, else r-.
    const int bx = p_x > 0 ? 0 : 1;
    const int by = p_y > 0 ? 2 : 3;
    const double sx = sigmoid(k * (radii[bx] - std::abs(p_x)));
    const double sy = sigmoid(k * (radii[by] - std::abs(p_y)));

    SplatEval ev;
    ev.w_x = 2.0 * sx;
    ev.w_y = 2.0 * sy;
    ev.x_selected = ev.w_x <= ev.w_y;  // tie selects X for the backward pass
    const double raw = ev.x_selected ? ev.w_x : ev.w_y;
    ev.weight = std::min(raw, 1.0);

    if (raw < 1.0) {
        if (ev.x_selected) {
            const double dwdu = 2.0 * sx * (1.0 - sx);
            ev.d_radii[bx] = dwdu * k;
            ev.d_px = dwdu * k * (p_x > 0 ? -1.0 : 1.0);
        } else {
            const double dwdu = 2.0 * sy * (1.0 - sy);
            ev.d_radii[by] = dwdu * k;
            ev.d_py = dwdu * k * (p_y > 0 ? -1.0 : 1.0);
        }
    }
    return ev;
}

double gaussian_splat_weight(const Vec3& x, const PlanePrimitive& prim, const PlaneFrame& frame) {
    double p_x, p_y;
    project_local(x, prim, frame, p_x, p_y);
    const double s_x = 0.5 * (prim.radii[0] + prim.radii[1]);
    const double s_y = 0.5 * (prim.radii[2] + prim.radii[3]);
    return std::exp(-0.5 * (p_x * p_x / (s_x * s_x) + p_y * p_y / (s_y * s_y)));
}

}  // namespace psplat

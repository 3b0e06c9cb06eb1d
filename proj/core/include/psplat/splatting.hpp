#pragma once

#include "psplat/geometry.hpp"

namespace psplat {

/// Sharpness schedule and filtering constants for the rectangle kernel.
struct SplatParams {
    double lambda_base = 20.0;
    double lambda_rate = 0.001;  // per iteration
    double lambda_max = 300.0;
    double weight_floor = 1e-4;  // intersections below this are dropped
};

/// lambda = min(lambda_base * exp(-(1 - lambda_rate * ite)), lambda_max)
double lambda_schedule(std::int64_t ite, const SplatParams& params = {});

/// One evaluation of the rectangle kernel at local offsets (P_X, P_Y).
/// `weight` is the blending weight, the raw min clamped to [0,1]; raw
/// per-axis values stay in (0,2). Partials are exact derivatives of the
/// clamped composite: zero once the raw min reaches 1, and only the
/// branch selected by the min carries gradient (ties go to X).
struct SplatEval {
    double weight = 0;
    double w_x = 0, w_y = 0;  // raw per-axis weights
    double d_px = 0, d_py = 0;
    Vec4 d_radii = Vec4::Zero();  // order r_x+, r_x-, r_y+, r_y-
    bool x_selected = true;       // which axis the min picked
};

/// In-plane offsets of an on-plane point from the primitive center.
inline void project_local(const Vec3& x, const PlanePrimitive& prim, const PlaneFrame& frame,
                          double& p_x, double& p_y) {
    const Vec3 e = x - prim.center;
    p_x = e.dot(frame.v_x);
    p_y = e.dot(frame.v_y);
}

SplatEval plane_splat_weight(double p_x, double p_y, const Vec4& radii, double lambda);

/// Anisotropic Gaussian baseline; plane-local covariance from the averaged
/// radii, s_x = (r_x+ + r_x-)/2, s_y = (r_y+ + r_y-)/2.
double gaussian_splat_weight(const Vec3& x, const PlanePrimitive& prim, const PlaneFrame& frame);

inline double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

/// Local-space margin beyond a radius where the axis weight is still >= floor.
inline double splat_cut_margin(double lambda, double weight_floor) {
    // 2*sigmoid(-5*lambda*m) >= floor  <=>  m <= ln(2/floor - 1) / (5*lambda)
    return std::log(2.0 / weight_floor - 1.0) / (5.0 * lambda);
}

}  // namespace psplat

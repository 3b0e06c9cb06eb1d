#pragma once

#include "psplat/renderer.hpp"

#include <array>
#include <cmath>

namespace psplat {

struct OptimConfig {
    std::int64_t iterations = 5000;
    double lr_center = 0.001;
    double lr_radii = 0.001;
    double lr_rotation = 0.001;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::int64_t split_interval = 1000;
    double split_grad_threshold = 0.2;
    bool enable_split = true;
    bool single_radii = false;  // ablation: one learned radius per axis
    double merge_normal_deg = 25.0;
    double merge_offset = 0.1;     // scene units (meters)
    double merge_adjacency = 0.05;  // max gap between rectangles of one instance
    bool merge_use_adjacency = true;
    int views_per_step = 1;
    std::uint64_t seed = 0;
    double radii_floor = kRadiiFloor;
};

/// First/second Adam moments for one primitive's 11 scalars, laid out as
/// center(3), rotation(4), radii(4).
struct AdamState {
    std::array<double, 11> m{};
    std::array<double, 11> v{};
    std::int64_t step = 0;
};

/// Textbook Adam on one scalar: updates the moments in place and returns the
/// bias-corrected parameter decrement. `step_after` counts this update.
inline double adam_scalar_update(double& m, double& v, std::int64_t step_after, double g,
                                 double lr, double beta1, double beta2, double eps) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double m_hat = m / (1.0 - std::pow(beta1, double(step_after)));
    const double v_hat = v / (1.0 - std::pow(beta2, double(step_after)));
    return lr * m_hat / (std::sqrt(v_hat) + eps);
}

/// Connected group of merged primitives: the final reconstruction unit.
struct PlaneInstance {
    std::vector<std::int64_t> member_ids;
    std::vector<std::int32_t> member_indices;  // into the scene at merge time
    Vec3 normal = Vec3::UnitZ();
    double offset = 0;  // |(p - scene_center) . n|, area-weighted mean
    double area = 0;
    int id = 0;
};

/// Everything the loop mutates; serialized wholesale by checkpoints.
struct OptimState {
    Scene scene;
    std::vector<AdamState> adam;              // parallel to scene.primitives
    std::vector<Vec4> radii_grad_sum;         // running sum of |dL/dr|
    std::vector<std::int64_t> radii_grad_count;
    std::int64_t iteration = 0;
};

struct LossLogRow {
    std::int64_t iteration = 0;
    double loss = 0;
    double lambda = 0;
    std::size_t primitive_count = 0;
};

std::vector<PlaneInstance> merge_planes(const Scene& scene, const Vec3& scene_center,
                                        const OptimConfig& cfg);

class Optimizer {
public:
    Optimizer(Scene scene, std::vector<CameraView> views, OptimConfig cfg, RenderConfig rcfg,
              SplatParams splat);
    /// Resume from a serialized state (views supplied separately).
    Optimizer(OptimState state, std::vector<CameraView> views, OptimConfig cfg, RenderConfig rcfg,
              SplatParams splat);

    /// One iteration at the current counter: sample views, forward/backward,
    /// Adam update, renormalize rotations, clamp radii, update running means.
    double step();

    /// Splits primitives whose running mean radii gradient exceeds the
    /// threshold. Fires only on interval boundaries; resets all running means
    /// when it fires. Returns the number of primitives split.
    int maybe_split();

    /// Runs maybe_split + step until cfg.iterations, collecting the loss log.
    std::vector<LossLogRow> run();

    const OptimState& state() const { return state_; }
    OptimState& state() { return state_; }
    const Scene& scene() const { return state_.scene; }
    std::int64_t iteration() const { return state_.iteration; }
    const OptimConfig& config() const { return cfg_; }
    const GradientBuffer& last_gradients() const { return gradbuf_; }

    /// View index for global sample slot g (seeded epoch-shuffled round-robin).
    std::size_t view_for_slot(std::int64_t g) const;

private:
    void apply_adam(const GradientBuffer& grads);

    OptimState state_;
    std::vector<CameraView> views_;
    OptimConfig cfg_;
    Renderer renderer_;
    SplatParams splat_;
    GradientBuffer gradbuf_;
    mutable std::vector<std::size_t> epoch_order_;
    mutable std::int64_t epoch_cached_ = -1;
};

}  // namespace psplat

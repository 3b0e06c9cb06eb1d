#pragma once

#include "psplat/geometry.hpp"
#include "psplat/splatting.hpp"

#include <span>

namespace psplat {

struct RenderConfig {
    int max_records = 30;  // M nearest intersections kept per ray
    double weight_floor = 1e-4;
    double t_near = kDefaultTNear;
    double parallel_eps = kParallelEps;
    double alpha_floor = 0.05;  // pixels below this coverage are masked out of the loss
    bool normalize_by_alpha = false;
    double alpha1 = 5.0;  // normal loss weight
    double alpha2 = 1.0;  // depth loss weight
    int tile_size = 16;
    int threads = 0;  // 0 = hardware concurrency
};

/// One surviving ray/primitive intersection. `normal_cam` is the primitive
/// normal in the camera frame, sign-flipped to face the camera.
struct IntersectionRecord {
    std::int32_t prim_index = -1;  // index into the scene's primitive array
    Vec3 point = Vec3::Zero();
    double z_cam = 0;
    double weight = 0;
    Vec3 normal_cam = Vec3::Zero();
};

struct RenderedMaps {
    int width = 0, height = 0;
    std::vector<double> depth;   // H*W
    std::vector<double> normal;  // H*W*3, camera frame, not renormalized
    std::vector<double> alpha;   // H*W, in [0,1]

    void resize(int w, int h) {
        width = w;
        height = h;
        depth.assign(std::size_t(w) * h, 0.0);
        normal.assign(std::size_t(w) * h * 3, 0.0);
        alpha.assign(std::size_t(w) * h, 0.0);
    }
};

/// Forward output plus the per-pixel record lists the backward pass replays.
struct ForwardResult {
    RenderedMaps maps;
    std::vector<std::int32_t> rec_prim;  // H*W*M, depth-sorted per pixel
    std::vector<std::uint16_t> rec_count;  // H*W
    int max_records = 0;
};

struct PrimGrad {
    Vec3 d_center = Vec3::Zero();
    Vec4 d_rotation = Vec4::Zero();
    Vec4 d_radii = Vec4::Zero();
};

struct GradientBuffer {
    std::vector<PrimGrad> grads;  // parallel to scene.primitives

    void reset(std::size_t n) { grads.assign(n, PrimGrad{}); }
};

struct LossGrads {
    double loss = 0;
    std::vector<double> d_depth;   // H*W
    std::vector<double> d_normal;  // H*W*3
    std::vector<double> d_alpha;   // H*W, nonzero only with normalize_by_alpha
};

struct PixelComposite {
    double depth = 0;
    Vec3 normal = Vec3::Zero();
    double alpha = 0;
};

/// All surviving intersections of one ray against every primitive given,
/// weight >= floor, sorted by (z_cam, prim index), truncated to M nearest.
std::vector<IntersectionRecord> gather_intersections(const Ray& ray, const CameraView& view,
                                                     std::span<const PlanePrimitive> prims,
                                                     std::span<const PlaneFrame> frames,
                                                     double lambda, const RenderConfig& cfg);

/// Front-to-back blending of depth-sorted records (Eqs. 12-14 style
/// transmittance compositing).
PixelComposite composite(std::span<const IntersectionRecord> records);

class Renderer {
public:
    explicit Renderer(RenderConfig cfg) : cfg_(cfg) {}

    /// Tiled forward render. With keep_records the result can be fed to
    /// backward(); without it only the maps are produced.
    ForwardResult render_view(const CameraView& view, const Scene& scene, double lambda,
                              bool keep_records = false) const;

    /// L1 depth + (cosine and L1) normal loss against the view's targets,
    /// each term normalized by its valid-target pixel count. Pixels whose
    /// rendered alpha is below alpha_floor are masked out.
    LossGrads render_loss(const RenderedMaps& maps, const CameraView& view) const;

    /// Accumulates exact loss partials for every primitive parameter by
    /// replaying the stored record lists. Throws on non-finite gradients.
    void backward(const CameraView& view, const Scene& scene, double lambda,
                  const ForwardResult& fwd, const LossGrads& loss_grads,
                  GradientBuffer& gradbuf) const;

    const RenderConfig& config() const { return cfg_; }
    RenderConfig& config() { return cfg_; }

private:
    RenderConfig cfg_;
};

}  // namespace psplat

#include "reference_renderer.hpp"

namespace psplat::testing {

std::vector<PlaneFrame> build_frames(const Scene& scene) {
    std::vector<PlaneFrame> frames;
    frames.reserve(scene.primitives.size());
    for (const PlanePrimitive& prim : scene.primitives)
        frames.push_back(plane_frame(quat_normalized(prim.rotation)));
    return frames;
}

RenderedMaps reference_render(const CameraView& view, const Scene& scene, double lambda,
                              const RenderConfig& cfg) {
    RenderedMaps maps;
    maps.resize(view.width, view.height);
    const std::vector<PlaneFrame> frames = build_frames(scene);
    for (int v = 0; v < view.height; ++v) {
        for (int u = 0; u < view.width; ++u) {
            const Ray ray = generate_ray(view, u, v);
            const auto records =
                gather_intersections(ray, view, scene.primitives, frames, lambda, cfg);
            const PixelComposite px = composite(records);
            const std::size_t i = std::size_t(v) * view.width + u;
            maps.depth[i] = px.depth;
            maps.alpha[i] = px.alpha;
            for (int k = 0; k < 3; ++k) maps.normal[3 * i + k] = px.normal[k];
        }
    }
    return maps;
}

}  // namespace psplat::testing

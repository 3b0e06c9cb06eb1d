#pragma once

#include "psplat/geometry.hpp"
#include "psplat/optimizer.hpp"
#include "psplat/synthetic.hpp"

#include <span>

namespace psplat {

struct SampledSurface {
    std::vector<Vec3> points;
    std::vector<std::int32_t> labels;  // instance label per point
};

struct MetricConfig {
    double fscore_tau = 0.05;   // meters; also gates label transfer
    double sample_density = 400.0;  // points per square meter
    int planar_top_k = 20;
    double unmatched_penalty = 0.5;  // meters, for GT planes with no match
    std::uint64_t seed = 0;
};

struct ChamferResult {
    double chamfer = 0;  // meters
    double fscore = 0;   // percent
    double precision = 0, recall = 0;
};

struct SegmentationResult {
    double voi = 0;  // nats
    double ri = 0;
    double sc = 0;
};

struct PlanarResult {
    double fidelity = 0, accuracy = 0, chamfer = 0;  // meters
    int matched = 0, evaluated = 0;
};

/// Symmetric chamfer (mean NN distance both ways, halved) and F-score at tau.
ChamferResult chamfer_fscore(const SampledSurface& pred, const SampledSurface& gt, double tau);

/// Partition-comparison metrics over two labelings of the same point set.
SegmentationResult segmentation_metrics(std::span<const std::int32_t> pred_labels,
                                        std::span<const std::int32_t> gt_labels);

/// Pred labels carried to the gt points by nearest neighbor; points farther
/// than tau from every pred point share one "unassigned" label.
std::vector<std::int32_t> transfer_labels(const SampledSurface& pred, const SampledSurface& gt,
                                          double tau);

/// Top-k-largest GT instances matched to pred instances by point overlap.
PlanarResult planar_metrics(const SampledSurface& pred, const SampledSurface& gt,
                            const MetricConfig& cfg);

/// Rectangle to sample points on, with its instance label.
struct SampleRect {
    Vec3 center, u_axis, v_axis;
    double half_u = 0, half_v = 0;
    std::int32_t label = 0;
};

/// Stratified area-proportional sampling: round(area * density) points per
/// rectangle, deterministic from the seed.
SampledSurface sample_rects(const std::vector<SampleRect>& rects, double density,
                            std::uint64_t seed);

std::vector<SampleRect> rects_from_instances(const Scene& scene,
                                             const std::vector<PlaneInstance>& instances);
std::vector<SampleRect> rects_from_faces(const std::vector<GtFace>& faces);

}  // namespace psplat

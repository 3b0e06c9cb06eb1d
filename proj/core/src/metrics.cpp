#include "psplat/metrics.hpp"

#include "psplat/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace psplat {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

double mean_nn_distance(const SampledSurface& from, const KdTree& to_tree, double tau,
                        double& within_frac) {
    double sum = 0;
    std::size_t within = 0;
    for (const Vec3& p : from.points) {
        const double d = to_tree.nearest(p).distance;
        sum += d;
        if (d < tau) ++within;
    }
    within_frac = double(within) / double(from.points.size());
    return sum / double(from.points.size());
}

}  // namespace

ChamferResult chamfer_fscore(const SampledSurface& pred, const SampledSurface& gt, double tau) {
    if (pred.points.empty() || gt.points.empty())
        throw std::invalid_argument("chamfer_fscore: empty point set");
    const KdTree pred_tree(pred.points);
    const KdTree gt_tree(gt.points);
    ChamferResult res;
    double prec_frac = 0, rec_frac = 0;
    const double d_pg = mean_nn_distance(pred, gt_tree, tau, prec_frac);
    const double d_gp = mean_nn_distance(gt, pred_tree, tau, rec_frac);
    res.chamfer = 0.5 * (d_pg + d_gp);
    res.precision = 100.0 * prec_frac;
    res.recall = 100.0 * rec_frac;
    res.fscore = (res.precision + res.recall) > 0
                     ? 2.0 * res.precision * res.recall / (res.precision + res.recall)
                     : 0.0;
    return res;
}

SegmentationResult segmentation_metrics(std::span<const std::int32_t> pred_labels,
                                        std::span<const std::int32_t> gt_labels) {
    if (pred_labels.empty() || pred_labels.size() != gt_labels.size())
        throw std::invalid_argument("segmentation_metrics: empty or mismatched labelings");
    const double n = double(pred_labels.size());

    std::unordered_map<std::int32_t, double> pred_sizes, gt_sizes;
    std::map<std::pair<std::int32_t, std::int32_t>, double> cells;
    for (std::size_t i = 0; i < pred_labels.size(); ++i) {
        pred_sizes[pred_labels[i]] += 1;
        gt_sizes[gt_labels[i]] += 1;
        cells[{gt_labels[i], pred_labels[i]}] += 1;
    }

    auto entropy = [n](const std::unordered_map<std::int32_t, double>& sizes) {
        double h = 0;
        for (const auto& [label, count] : sizes) h -= (count / n) * std::log(count / n);
        return h;
    };
    double mutual = 0;
    for (const auto& [cell, count] : cells) {
        const double pij = count / n;
        mutual += pij * std::log(pij / ((gt_sizes[cell.first] / n) *
                                        (pred_sizes[cell.second] / n)));
    }

    SegmentationResult res;
    res.voi = std::max(0.0, entropy(pred_sizes) + entropy(gt_sizes) - 2.0 * mutual);

    auto pairs2 = [](double c) { return 0.5 * c * (c - 1.0); };
    double sum_gt = 0, sum_pred = 0, sum_cells = 0;
    for (const auto& [label, count] : gt_sizes) sum_gt += pairs2(count);
    for (const auto& [label, count] : pred_sizes) sum_pred += pairs2(count);
    for (const auto& [cell, count] : cells) sum_cells += pairs2(count);
    const double total_pairs = pairs2(n);
    res.ri = total_pairs > 0
                 ? (total_pairs - sum_gt - sum_pred + 2.0 * sum_cells) / total_pairs
                 : 1.0;

    double sc = 0;
    for (const auto& [gt_label, gt_count] : gt_sizes) {
        double best_iou = 0;
        for (const auto& [pred_label, pred_count] : pred_sizes) {
            const auto it = cells.find({gt_label, pred_label});
            if (it == cells.end()) continue;
            const double inter = it->second;
            best_iou = std::max(best_iou, inter / (gt_count + pred_count - inter));
        }
        sc += (gt_count / n) * best_iou;
    }
    res.sc = sc;
    return res;
}

std::vector<std::int32_t> transfer_labels(const SampledSurface& pred, const SampledSurface& gt,
                                          double tau) {
    if (pred.points.empty()) throw std::invalid_argument("transfer_labels: empty prediction");
    std::int32_t unassigned = 0;
    for (std::int32_t l : pred.labels) unassigned = std::max(unassigned, l + 1);
    const KdTree tree(pred.points);
    std::vector<std::int32_t> out(gt.points.size());
    for (std::size_t i = 0; i < gt.points.size(); ++i) {
        const auto nn = tree.nearest(gt.points[i]);
        out[i] = nn.distance <= tau ? pred.labels[nn.index] : unassigned;
    }
    return out;
}

PlanarResult planar_metrics(const SampledSurface& pred, const SampledSurface& gt,
                            const MetricConfig& cfg) {
    if (gt.points.empty()) throw std::invalid_argument("planar_metrics: empty ground truth");
    PlanarResult res;

    // Rank GT instances by sample count (area proxy under uniform density).
    std::unordered_map<std::int32_t, std::size_t> gt_counts;
    for (std::int32_t l : gt.labels) gt_counts[l] += 1;
    std::vector<std::pair<std::int32_t, std::size_t>> ranked(gt_counts.begin(), gt_counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (int(ranked.size()) > cfg.planar_top_k) ranked.resize(cfg.planar_top_k);

    std::unordered_map<std::int32_t, std::vector<Vec3>> pred_points_by_label;
    for (std::size_t i = 0; i < pred.points.size(); ++i)
        pred_points_by_label[pred.labels[i]].push_back(pred.points[i]);

    std::optional<KdTree> pred_tree;
    if (!pred.points.empty()) pred_tree.emplace(pred.points);

    double fid_sum = 0, acc_sum = 0;
    for (const auto& [gt_label, gt_count] : ranked) {
        std::vector<Vec3> gt_pts;
        for (std::size_t i = 0; i < gt.points.size(); ++i)
            if (gt.labels[i] == gt_label) gt_pts.push_back(gt.points[i]);

        // Match by maximal within-tau point overlap.
        std::map<std::int32_t, std::size_t> overlap;
        if (pred_tree) {
            for (const Vec3& p : gt_pts) {
                const auto nn = pred_tree->nearest(p);
                if (nn.distance <= cfg.fscore_tau) overlap[pred.labels[nn.index]] += 1;
            }
        }
        res.evaluated += 1;
        if (overlap.empty()) {
            fid_sum += cfg.unmatched_penalty;
            acc_sum += cfg.unmatched_penalty;
            continue;
        }
        std::int32_t best_label = overlap.begin()->first;
        std::size_t best_count = overlap.begin()->second;
        for (const auto& [label, count] : overlap) {
            if (count > best_count) {
                best_label = label;
                best_count = count;
            }
        }
        res.matched += 1;

        const KdTree match_tree(pred_points_by_label.at(best_label));
        const KdTree gt_tree(gt_pts);
        double fid = 0;
        for (const Vec3& p : gt_pts) fid += match_tree.nearest(p).distance;
        fid_sum += fid / double(gt_pts.size());
        double acc = 0;
        const auto& match_pts = pred_points_by_label.at(best_label);
        for (const Vec3& p : match_pts) acc += gt_tree.nearest(p).distance;
        acc_sum += acc / double(match_pts.size());
    }
    res.fidelity = fid_sum / double(res.evaluated);
    res.accuracy = acc_sum / double(res.evaluated);
    res.chamfer = 0.5 * (res.fidelity + res.accuracy);
    return res;
}

SampledSurface sample_rects(const std::vector<SampleRect>& rects, double density,
                            std::uint64_t seed) {
    if (density <= 0) throw std::invalid_argument("sample_rects: density must be positive");
    double total_area = 0;
    for (const SampleRect& r : rects) total_area += 4.0 * r.half_u * r.half_v;
    if (total_area <= 0) throw std::invalid_argument("sample_rects: zero total area");

    SampledSurface out;
    for (std::size_t ri = 0; ri < rects.size(); ++ri) {
        const SampleRect& r = rects[ri];
        const double area = 4.0 * r.half_u * r.half_v;
        const long n = std::lround(area * density);
        // Hammersley set with a seeded per-rect toroidal shift.
        const std::uint64_t h = splitmix64(seed ^ splitmix64(ri + 1));
        const double ox = double(h >> 11) * 0x1.0p-53;
        const double oy = double(splitmix64(h) >> 11) * 0x1.0p-53;
        for (long i = 0; i < n; ++i) {
            double a = (double(i) + 0.5) / double(n) + ox;
            a -= std::floor(a);
            double b = 0, base = 0.5;
            for (std::uint64_t bits = std::uint64_t(i); bits; bits >>= 1, base *= 0.5)
                if (bits & 1) b += base;
            b += oy;
            b -= std::floor(b);
            out.points.push_back(r.center + (2 * a - 1) * r.half_u * r.u_axis +
                                 (2 * b - 1) * r.half_v * r.v_axis);
            out.labels.push_back(r.label);
        }
    }
    return out;
}

std::vector<SampleRect> rects_from_instances(const Scene& scene,
                                             const std::vector<PlaneInstance>& instances) {
    std::vector<SampleRect> rects;
    for (const PlaneInstance& inst : instances) {
        for (std::int32_t m : inst.member_indices) {
            const PlanePrimitive& prim = scene.primitives[m];
            const PlaneFrame f = plane_frame(quat_normalized(prim.rotation));
            SampleRect r;
            // Re-center so the asymmetric radii become a symmetric rectangle.
            r.half_u = 0.5 * (prim.radii[0] + prim.radii[1]);
            r.half_v = 0.5 * (prim.radii[2] + prim.radii[3]);
            r.center = prim.center + 0.5 * (prim.radii[0] - prim.radii[1]) * f.v_x +
                       0.5 * (prim.radii[2] - prim.radii[3]) * f.v_y;
            r.u_axis = f.v_x;
            r.v_axis = f.v_y;
            r.label = inst.id;
            rects.push_back(r);
        }
    }
    return rects;
}

std::vector<SampleRect> rects_from_faces(const std::vector<GtFace>& faces) {
    std::vector<SampleRect> rects;
    rects.reserve(faces.size());
    for (const GtFace& f : faces) {
        SampleRect r;
        r.center = f.center;
        r.u_axis = f.u_axis;
        r.v_axis = f.v_axis;
        r.half_u = f.half_u;
        r.half_v = f.half_v;
        r.label = std::int32_t(f.instance_id);
        rects.push_back(r);
    }
    return rects;
}

}  // namespace psplat

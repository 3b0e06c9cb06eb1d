#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "psplat/kdtree.hpp"
#include "psplat/metrics.hpp"
#include "support/test_scenes.hpp"

#include <cmath>
#include <map>

using namespace psplat;
using psplat::testing::TestRng;

namespace {

// Grid of points on the z=0 plane, spacing 0.2, labeled `label`.
SampledSurface plane_grid(int n, double spacing, std::int32_t label, const Vec3& offset) {
    SampledSurface s;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            s.points.push_back(Vec3(i * spacing, j * spacing, 0) + offset);
            s.labels.push_back(label);
        }
    }
    return s;
}

}  // namespace

TEST_CASE("kdtree: matches the brute-force oracle") {
    TestRng rng(9);
    for (int n : {1, 3, 50, 500, 2000}) {
        std::vector<Vec3> pts;
        for (int i = 0; i < n; ++i)
            pts.push_back(Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)));
        const KdTree tree(pts);
        for (int q = 0; q < 200; ++q) {
            const Vec3 query(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
            double best = 1e300;
            std::size_t best_idx = 0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const double d = (pts[i] - query).norm();
                if (d < best) {
                    best = d;
                    best_idx = i;
                }
            }
            const auto got = tree.nearest(query);
            CHECK(got.distance == doctest::Approx(best).epsilon(1e-12));
            CHECK(got.index == best_idx);
        }
    }
}

TEST_CASE("chamfer_fscore: identical clouds") {
    const SampledSurface s = plane_grid(10, 0.2, 0, Vec3::Zero());
    const ChamferResult res = chamfer_fscore(s, s, 0.05);
    CHECK(res.chamfer == 0.0);
    CHECK(res.fscore == doctest::Approx(100.0));
}

TEST_CASE("chamfer_fscore: 0.04 m normal shift keeps F-score 100 with exact chamfer") {
    const SampledSurface gt = plane_grid(12, 0.2, 0, Vec3::Zero());
    const SampledSurface pred = plane_grid(12, 0.2, 0, Vec3(0, 0, 0.04));
    const ChamferResult res = chamfer_fscore(pred, gt, 0.05);
    CHECK(std::abs(res.chamfer - 0.04) < 1e-9);
    CHECK(res.fscore == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("chamfer_fscore: 0.06 m shift beyond tau kills the F-score") {
    const SampledSurface gt = plane_grid(12, 0.2, 0, Vec3::Zero());
    const SampledSurface pred = plane_grid(12, 0.2, 0, Vec3(0, 0, 0.06));
    const ChamferResult res = chamfer_fscore(pred, gt, 0.05);
    CHECK(res.fscore == 0.0);
    CHECK(std::abs(res.chamfer - 0.06) < 1e-9);
}

TEST_CASE("chamfer_fscore: symmetric in its arguments") {
    TestRng rng(17);
    SampledSurface a, b;
    for (int i = 0; i < 300; ++i) {
        a.points.push_back(Vec3(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)));
        a.labels.push_back(0);
        b.points.push_back(Vec3(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)));
        b.labels.push_back(0);
    }
    const ChamferResult ab = chamfer_fscore(a, b, 0.05);
    const ChamferResult ba = chamfer_fscore(b, a, 0.05);
    CHECK(ab.chamfer == doctest::Approx(ba.chamfer).epsilon(1e-12));
    CHECK(ab.fscore == doctest::Approx(ba.fscore).epsilon(1e-12));
}

TEST_CASE("chamfer_fscore: empty inputs are rejected") {
    SampledSurface empty, one;
    one.points.push_back(Vec3::Zero());
    one.labels.push_back(0);
    CHECK_THROWS(chamfer_fscore(empty, one, 0.05));
    CHECK_THROWS(chamfer_fscore(one, empty, 0.05));
}

TEST_CASE("segmentation_metrics: identical partitions") {
    const std::vector<std::int32_t> labels = {0, 0, 1, 1, 2};
    const SegmentationResult res = segmentation_metrics(labels, labels);
    CHECK(res.voi == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res.ri == doctest::Approx(1.0));
    CHECK(res.sc == doctest::Approx(1.0));
}

TEST_CASE("segmentation_metrics: hand-computed 4-point fixtures") {
    const std::vector<std::int32_t> gt = {0, 0, 1, 1};

    SUBCASE("per-point singleton prediction: RI 2/3, SC 0.5, VOI ln 2") {
        const std::vector<std::int32_t> pred = {0, 1, 2, 3};
        const SegmentationResult res = segmentation_metrics(pred, gt);
        CHECK(std::abs(res.ri - 2.0 / 3.0) < 1e-9);
        CHECK(std::abs(res.sc - 0.5) < 1e-9);
        CHECK(std::abs(res.voi - std::log(2.0)) < 1e-9);
    }
    SUBCASE("single-cluster prediction: RI 1/3, SC 0.5, VOI ln 2") {
        const std::vector<std::int32_t> pred = {0, 0, 0, 0};
        const SegmentationResult res = segmentation_metrics(pred, gt);
        CHECK(std::abs(res.ri - 1.0 / 3.0) < 1e-9);
        CHECK(std::abs(res.sc - 0.5) < 1e-9);
        CHECK(std::abs(res.voi - std::log(2.0)) < 1e-9);
    }
}

TEST_CASE("segmentation_metrics: invariant under label permutation") {
    TestRng rng(23);
    std::vector<std::int32_t> gt, pred;
    for (int i = 0; i < 200; ++i) {
        gt.push_back(std::int32_t(rng.next() % 5));
        pred.push_back(std::int32_t(rng.next() % 7));
    }
    const SegmentationResult base = segmentation_metrics(pred, gt);
    // Relabel pred clusters through a fixed permutation.
    std::vector<std::int32_t> permuted;
    const std::int32_t perm[7] = {4, 6, 0, 2, 5, 1, 3};
    for (std::int32_t l : pred) permuted.push_back(perm[l]);
    const SegmentationResult res = segmentation_metrics(permuted, gt);
    CHECK(res.voi == doctest::Approx(base.voi).epsilon(1e-12));
    CHECK(res.ri == doctest::Approx(base.ri).epsilon(1e-12));
    CHECK(res.sc == doctest::Approx(base.sc).epsilon(1e-12));
}

TEST_CASE("transfer_labels: nearest-neighbor transfer with unassigned cluster") {
    SampledSurface pred;
    pred.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    pred.labels = {3, 8};
    SampledSurface gt;
    gt.points = {Vec3(0.01, 0, 0), Vec3(0.99, 0, 0), Vec3(5, 0, 0)};
    gt.labels = {0, 1, 2};
    const auto transferred = transfer_labels(pred, gt, 0.05);
    CHECK(transferred[0] == 3);
    CHECK(transferred[1] == 8);
    CHECK(transferred[2] == 9);  // unassigned = max label + 1
}

TEST_CASE("planar_metrics: perfect reconstruction scores zero") {
    const SampledSurface gt = plane_grid(10, 0.2, 0, Vec3::Zero());
    MetricConfig cfg;
    const PlanarResult res = planar_metrics(gt, gt, cfg);
    CHECK(res.fidelity == 0.0);
    CHECK(res.accuracy == 0.0);
    CHECK(res.chamfer == 0.0);
    CHECK(res.matched == 1);
}

TEST_CASE("planar_metrics: constant parallel offset appears verbatim") {
    // Same in-plane sample layout shifted along the normal: every point's
    // nearest neighbor is its twin at exactly 0.02 m.
    std::vector<SampleRect> rects(1);
    rects[0] = {Vec3(0, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 1.0, 1.0, 0};
    const SampledSurface gt = sample_rects(rects, 200.0, 5);
    rects[0].center.z() = 0.02;
    const SampledSurface pred = sample_rects(rects, 200.0, 5);
    MetricConfig cfg;
    const PlanarResult res = planar_metrics(pred, gt, cfg);
    CHECK(std::abs(res.fidelity - 0.02) < 1e-9);
    CHECK(std::abs(res.accuracy - 0.02) < 1e-9);
    CHECK(std::abs(res.chamfer - 0.02) < 1e-9);
}

TEST_CASE("planar_metrics: unmatched GT planes take the penalty") {
    const SampledSurface gt = plane_grid(8, 0.2, 0, Vec3::Zero());
    const SampledSurface pred = plane_grid(8, 0.2, 0, Vec3(0, 0, 10.0));  // far away
    MetricConfig cfg;
    const PlanarResult res = planar_metrics(pred, gt, cfg);
    CHECK(res.matched == 0);
    CHECK(res.fidelity == doctest::Approx(cfg.unmatched_penalty));
    CHECK(res.accuracy == doctest::Approx(cfg.unmatched_penalty));
}

TEST_CASE("planar_metrics: top-k selection keeps the k largest GT planes") {
    SampledSurface gt;
    // Three GT planes with 100, 50 and 4 points; top-2 keeps the first two.
    auto add = [&gt](int n, std::int32_t label, double z) {
        for (int i = 0; i < n; ++i) {
            gt.points.push_back(Vec3(0.05 * i, 0, z));
            gt.labels.push_back(label);
        }
    };
    add(100, 0, 0.0);
    add(50, 1, 1.0);
    add(4, 2, 2.0);
    MetricConfig cfg;
    cfg.planar_top_k = 2;
    const PlanarResult res = planar_metrics(gt, gt, cfg);
    CHECK(res.evaluated == 2);
}

TEST_CASE("metrics are invariant under a rigid transform of both inputs") {
    TestRng rng(31);
    SampledSurface a = plane_grid(8, 0.21, 0, Vec3::Zero());
    SampledSurface b = plane_grid(8, 0.2, 1, Vec3(0.03, 0.01, 0.02));
    const ChamferResult base = chamfer_fscore(a, b, 0.05);

    const Quat q = rng.unit_quat();
    const Mat3 rot = quat_to_matrix(q);
    const Vec3 t(1.3, -0.7, 2.2);
    SampledSurface a2 = a, b2 = b;
    for (Vec3& p : a2.points) p = rot * p + t;
    for (Vec3& p : b2.points) p = rot * p + t;
    const ChamferResult moved = chamfer_fscore(a2, b2, 0.05);
    CHECK(std::abs(base.chamfer - moved.chamfer) < 1e-9);
    CHECK(std::abs(base.fscore - moved.fscore) < 1e-9);
}

TEST_CASE("sample_rects: deterministic counts and plane membership") {
    std::vector<SampleRect> rects(1);
    rects[0] = {Vec3(0.5, 0.5, 0), Vec3::UnitX(), Vec3::UnitY(), 0.5, 0.5, 7};

    SUBCASE("unit square at density 100 gives exactly 100 points") {
        const SampledSurface s = sample_rects(rects, 100.0, 3);
        CHECK(s.points.size() == 100);
        for (std::int32_t l : s.labels) CHECK(l == 7);
        for (const Vec3& p : s.points) {
            CHECK(std::abs(p.z()) < 1e-9);
            CHECK(p.x() >= 0.0);
            CHECK(p.x() <= 1.0);
        }
    }
    SUBCASE("areas 1 and 3 give counts in ratio 1:3") {
        rects.push_back({Vec3(5, 0, 0), Vec3::UnitX(), Vec3::UnitY(), 1.5, 0.5, 8});
        const SampledSurface s = sample_rects(rects, 100.0, 3);
        std::map<std::int32_t, int> counts;
        for (std::int32_t l : s.labels) counts[l] += 1;
        CHECK(counts[7] == 100);
        CHECK(counts[8] == 300);
    }
    SUBCASE("tilted rectangle points satisfy the plane equation") {
        TestRng rng(41);
        const Quat q = rng.unit_quat();
        const PlaneFrame f = plane_frame(q);
        rects[0] = {Vec3(1, 2, 3), f.v_x, f.v_y, 0.7, 0.4, 0};
        const SampledSurface s = sample_rects(rects, 500.0, 9);
        for (const Vec3& p : s.points) CHECK(std::abs((p - Vec3(1, 2, 3)).dot(f.n)) < 1e-9);
    }
    SUBCASE("same seed reproduces identical samples") {
        const SampledSurface s1 = sample_rects(rects, 123.0, 77);
        const SampledSurface s2 = sample_rects(rects, 123.0, 77);
        CHECK(s1.points == s2.points);
    }
    SUBCASE("zero area is rejected") {
        rects[0].half_u = 0.0;
        CHECK_THROWS(sample_rects(rects, 100.0, 1));
    }
}

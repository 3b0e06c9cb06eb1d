#include "psplat/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
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

// Fisher-Yates with an explicit generator so the order is identical on
// every platform.
void seeded_shuffle(std::vector<std::size_t>& items, std::uint64_t seed) {
    std::uint64_t s = seed;
    for (std::size_t i = items.size(); i > 1; --i) {
        s = splitmix64(s);
        std::swap(items[i - 1], items[s % i]);
    }
}

}  // namespace

Optimizer::Optimizer(Scene scene, std::vector<CameraView> views, OptimConfig cfg,
                     RenderConfig rcfg, SplatParams splat)
    : views_(std::move(views)), cfg_(cfg), renderer_(rcfg), splat_(splat) {
    state_.scene = std::move(scene);
    state_.adam.assign(state_.scene.primitives.size(), AdamState{});
    state_.radii_grad_sum.assign(state_.scene.primitives.size(), Vec4::Zero());
    state_.radii_grad_count.assign(state_.scene.primitives.size(), 0);
}

Optimizer::Optimizer(OptimState state, std::vector<CameraView> views, OptimConfig cfg,
                     RenderConfig rcfg, SplatParams splat)
    : state_(std::move(state)), views_(std::move(views)), cfg_(cfg), renderer_(rcfg),
      splat_(splat) {
    if (state_.adam.size() != state_.scene.primitives.size())
        throw std::invalid_argument("optimizer state: adam/primitive size mismatch");
}

std::size_t Optimizer::view_for_slot(std::int64_t g) const {
    const std::int64_t n = std::int64_t(views_.size());
    const std::int64_t epoch = g / n;
    if (epoch != epoch_cached_) {
        epoch_order_.resize(views_.size());
        std::iota(epoch_order_.begin(), epoch_order_.end(), 0);
        seeded_shuffle(epoch_order_, splitmix64(cfg_.seed) ^ splitmix64(std::uint64_t(epoch)));
        epoch_cached_ = epoch;
    }
    return epoch_order_[g % n];
}

double Optimizer::step() {
    if (views_.empty()) throw std::invalid_argument("optimizer: no views");
    const double lambda = lambda_schedule(state_.iteration, splat_);
    gradbuf_.reset(state_.scene.primitives.size());

    double loss = 0;
    const double view_scale = 1.0 / double(cfg_.views_per_step);
    for (int k = 0; k < cfg_.views_per_step; ++k) {
        const std::int64_t slot = state_.iteration * cfg_.views_per_step + k;
        const CameraView& view = views_[view_for_slot(slot)];
        ForwardResult fwd = renderer_.render_view(view, state_.scene, lambda, true);
        LossGrads lg = renderer_.render_loss(fwd.maps, view);
        if (cfg_.views_per_step > 1) {
            lg.loss *= view_scale;
            for (double& g : lg.d_depth) g *= view_scale;
            for (double& g : lg.d_normal) g *= view_scale;
            for (double& g : lg.d_alpha) g *= view_scale;
        }
        loss += lg.loss;
        renderer_.backward(view, state_.scene, lambda, fwd, lg, gradbuf_);
    }
    if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "optimizer: non-finite loss " << loss << " at iteration " << state_.iteration
            << " (lambda " << lambda << ", " << state_.scene.primitives.size() << " primitives)";
        throw std::runtime_error(msg.str());
    }

    // Raw (pre-Adam) gradients feed the splitting rule.
    for (std::size_t i = 0; i < state_.scene.primitives.size(); ++i) {
        state_.radii_grad_sum[i] += gradbuf_.grads[i].d_radii.cwiseAbs();
        state_.radii_grad_count[i] += 1;
    }

    apply_adam(gradbuf_);
    state_.iteration += 1;
    return loss;
}

void Optimizer::apply_adam(const GradientBuffer& grads) {
    for (std::size_t i = 0; i < state_.scene.primitives.size(); ++i) {
        PlanePrimitive& prim = state_.scene.primitives[i];
        AdamState& st = state_.adam[i];
        std::array<double, 11> g;
        for (int k = 0; k < 3; ++k) g[k] = grads.grads[i].d_center[k];
        for (int k = 0; k < 4; ++k) g[3 + k] = grads.grads[i].d_rotation[k];
        for (int k = 0; k < 4; ++k) g[7 + k] = grads.grads[i].d_radii[k];
        if (cfg_.single_radii) {
            // Tied radii behave as one parameter per axis: sum the pair's
            // gradients and mirror the update below.
            g[7] = g[8] = g[7] + g[8];
            g[9] = g[10] = g[9] + g[10];
            st.m[8] = st.m[7];
            st.v[8] = st.v[7];
            st.m[10] = st.m[9];
            st.v[10] = st.v[9];
        }

        st.step += 1;
        std::array<double, 11> lr;
        for (int k = 0; k < 3; ++k) lr[k] = cfg_.lr_center;
        for (int k = 3; k < 7; ++k) lr[k] = cfg_.lr_rotation;
        for (int k = 7; k < 11; ++k) lr[k] = cfg_.lr_radii;

        std::array<double, 11> upd;
        for (int k = 0; k < 11; ++k)
            upd[k] = adam_scalar_update(st.m[k], st.v[k], st.step, g[k], lr[k], cfg_.beta1,
                                        cfg_.beta2, cfg_.eps);
        for (int k = 0; k < 3; ++k) prim.center[k] -= upd[k];
        for (int k = 0; k < 4; ++k) prim.rotation[k] -= upd[3 + k];
        for (int k = 0; k < 4; ++k) prim.radii[k] -= upd[7 + k];

        if (cfg_.single_radii) {
            prim.radii[1] = prim.radii[0];
            prim.radii[3] = prim.radii[2];
        }
        prim.rotation = quat_normalized(prim.rotation);
        for (int k = 0; k < 4; ++k) prim.radii[k] = std::max(prim.radii[k], cfg_.radii_floor);
    }
}

int Optimizer::maybe_split() {
    if (!cfg_.enable_split || cfg_.split_interval <= 0) return 0;
    if (state_.iteration == 0 || state_.iteration % cfg_.split_interval != 0) return 0;

    const std::size_t n = state_.scene.primitives.size();
    std::vector<int> split_axis(n, -1);  // 0: cut along Y (X grads), 1: cut along X
    int n_split = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (state_.radii_grad_count[i] == 0) continue;
        const Vec4 mean = state_.radii_grad_sum[i] / double(state_.radii_grad_count[i]);
        const double mean_x = 0.5 * (mean[0] + mean[1]);
        const double mean_y = 0.5 * (mean[2] + mean[3]);
        const bool trig_x = mean_x > cfg_.split_grad_threshold;
        const bool trig_y = mean_y > cfg_.split_grad_threshold;
        if (!trig_x && !trig_y) continue;
        split_axis[i] = (trig_x && (!trig_y || mean_x >= mean_y)) ? 0 : 1;
        ++n_split;
    }

    if (n_split > 0) {
        Scene next;
        next.next_id = state_.scene.next_id;
        std::vector<AdamState> next_adam;
        next.primitives.reserve(n + n_split);
        next_adam.reserve(n + n_split);
        for (std::size_t i = 0; i < n; ++i) {
            const PlanePrimitive& parent = state_.scene.primitives[i];
            if (split_axis[i] < 0) {
                next.primitives.push_back(parent);
                next_adam.push_back(state_.adam[i]);
                continue;
            }
            const PlaneFrame f = plane_frame(quat_normalized(parent.rotation));
            PlanePrimitive a = parent, b = parent;
            if (split_axis[i] == 0) {
                // Cut line through the center parallel to v_y; children keep
                // the parent's Y radii and tile its X extent exactly.
                a.center = parent.center + f.v_x * (parent.radii[0] * 0.5);
                a.radii[0] = a.radii[1] = parent.radii[0] * 0.5;
                b.center = parent.center - f.v_x * (parent.radii[1] * 0.5);
                b.radii[0] = b.radii[1] = parent.radii[1] * 0.5;
            } else {
                a.center = parent.center + f.v_y * (parent.radii[2] * 0.5);
                a.radii[2] = a.radii[3] = parent.radii[2] * 0.5;
                b.center = parent.center - f.v_y * (parent.radii[3] * 0.5);
                b.radii[2] = b.radii[3] = parent.radii[3] * 0.5;
            }
            a.id = next.claim_id();
            b.id = next.claim_id();
            next.primitives.push_back(a);
            next.primitives.push_back(b);
            next_adam.emplace_back();
            next_adam.emplace_back();
        }
        state_.scene = std::move(next);
        state_.adam = std::move(next_adam);
    }
    state_.radii_grad_sum.assign(state_.scene.primitives.size(), Vec4::Zero());
    state_.radii_grad_count.assign(state_.scene.primitives.size(), 0);
    return n_split;
}

std::vector<LossLogRow> Optimizer::run() {
    std::vector<LossLogRow> log;
    log.reserve(std::size_t(std::max<std::int64_t>(0, cfg_.iterations - state_.iteration)));
    while (state_.iteration < cfg_.iterations) {
        maybe_split();
        const double lambda = lambda_schedule(state_.iteration, splat_);
        const double loss = step();
        log.push_back({state_.iteration - 1, loss, lambda, state_.scene.primitives.size()});
    }
    return log;
}

namespace {

struct UnionFind {
    std::vector<std::int32_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    std::int32_t find(std::int32_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

std::vector<PlaneInstance> merge_planes(const Scene& scene, const Vec3& scene_center,
                                        const OptimConfig& cfg) {
    const std::size_t n = scene.primitives.size();
    std::vector<PlaneFrame> frames(n);
    std::vector<double> offsets(n), reach(n);
    for (std::size_t i = 0; i < n; ++i) {
        frames[i] = plane_frame(quat_normalized(scene.primitives[i].rotation));
        offsets[i] = std::abs((scene.primitives[i].center - scene_center).dot(frames[i].n));
        const Vec4& r = scene.primitives[i].radii;
        reach[i] = std::hypot(std::max(r[0], r[1]), std::max(r[2], r[3]));
    }

    const double cos_gate = std::cos(cfg.merge_normal_deg * M_PI / 180.0);
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(frames[i].n.dot(frames[j].n)) <= cos_gate) continue;
            if (std::abs(offsets[i] - offsets[j]) >= cfg.merge_offset) continue;
            if (cfg.merge_use_adjacency) {
                const double gap =
                    (scene.primitives[i].center - scene.primitives[j].center).norm() -
                    reach[i] - reach[j];
                if (gap >= cfg.merge_adjacency) continue;
                if (rect_distance(scene.primitives[i], frames[i], scene.primitives[j],
                                  frames[j]) >= cfg.merge_adjacency)
                    continue;
            }
            uf.unite(std::int32_t(i), std::int32_t(j));
        }
    }

    std::vector<std::vector<std::int32_t>> groups(n);
    for (std::size_t i = 0; i < n; ++i) groups[uf.find(std::int32_t(i))].push_back(std::int32_t(i));

    std::vector<PlaneInstance> instances;
    for (auto& members : groups) {
        if (members.empty()) continue;
        PlaneInstance inst;
        inst.member_indices = members;
        std::int32_t largest = members[0];
        for (std::int32_t m : members) {
            inst.area += scene.primitives[m].area();
            inst.member_ids.push_back(scene.primitives[m].id);
            if (scene.primitives[m].area() > scene.primitives[largest].area()) largest = m;
        }
        Vec3 nsum = Vec3::Zero();
        double osum = 0;
        for (std::int32_t m : members) {
            const double sign = frames[m].n.dot(frames[largest].n) < 0 ? -1.0 : 1.0;
            nsum += scene.primitives[m].area() * sign * frames[m].n;
            osum += scene.primitives[m].area() * offsets[m];
        }
        inst.normal = nsum.norm() > 1e-12 ? Vec3(nsum.normalized()) : frames[largest].n;
        inst.offset = osum / inst.area;
        instances.push_back(std::move(inst));
    }
    std::sort(instances.begin(), instances.end(), [](const auto& a, const auto& b) {
        if (a.area != b.area) return a.area > b.area;
        return *std::min_element(a.member_ids.begin(), a.member_ids.end()) <
               *std::min_element(b.member_ids.begin(), b.member_ids.end());
    });
    for (std::size_t i = 0; i < instances.size(); ++i) instances[i].id = int(i);
    return instances;
}

}  // namespace psplat

#include "psplat/renderer.hpp"

#include "psplat/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace psplat {

namespace {

constexpr int kMaxRecordCap = 64;
constexpr double kZClip = 1e-6;  // camera-z clip for projecting bin quads

// Per-primitive constants for one view.
struct PrimView {
    Vec3 v_x, v_y, n;
    Vec3 s_po;     // center - camera origin
    double k_pn;   // (center - origin) . n
    double flip;   // +-1 so the flipped normal faces the camera
    Vec3 m_cam;    // flipped normal, camera frame
    Vec4 radii;
    Quat q_hat;
};

struct RayBasis {
    Vec3 base, du, dv;
};

RayBasis ray_basis(const CameraView& view) {
    RayBasis rb;
    rb.base = view.rot_wc * Vec3((0.5 - view.cx) / view.fx, (0.5 - view.cy) / view.fy, 1.0);
    rb.du = view.rot_wc.col(0) / view.fx;
    rb.dv = view.rot_wc.col(1) / view.fy;
    return rb;
}

std::vector<PrimView> make_prim_views(const CameraView& view, const Scene& scene) {
    std::vector<PrimView> pvs(scene.primitives.size());
    const Mat3 rot_cw = view.rot_wc.transpose();
    for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
        const PlanePrimitive& prim = scene.primitives[i];
        PrimView& pv = pvs[i];
        pv.q_hat = quat_normalized(prim.rotation);
        const PlaneFrame f = plane_frame(pv.q_hat);
        pv.v_x = f.v_x;
        pv.v_y = f.v_y;
        pv.n = f.n;
        pv.s_po = prim.center - view.t_wc;
        pv.k_pn = pv.s_po.dot(f.n);
        pv.flip = pv.k_pn < 0 ? 1.0 : -1.0;
        pv.m_cam = pv.flip * (rot_cw * f.n);
        pv.radii = prim.radii;
    }
    return pvs;
}

struct Binning {
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::int32_t> offsets;  // tiles_x*tiles_y + 1
    std::vector<std::int32_t> items;    // primitive indices, ascending per tile
};

struct PixelRect {
    int u0 = 0, u1 = -1, v0 = 0, v1 = -1;
    bool empty() const { return u0 > u1 || v0 > v1; }
};

PixelRect projected_rect(const CameraView& view, const PrimView& pv, const Vec3& center,
                         double cut) {
    const Mat3 rot_cw = view.rot_wc.transpose();
    const double ex_p = pv.radii[0] + cut, ex_m = pv.radii[1] + cut;
    const double ey_p = pv.radii[2] + cut, ey_m = pv.radii[3] + cut;
    const std::array<Vec3, 4> world = {
        center + ex_p * pv.v_x + ey_p * pv.v_y, center - ex_m * pv.v_x + ey_p * pv.v_y,
        center - ex_m * pv.v_x - ey_m * pv.v_y, center + ex_p * pv.v_x - ey_m * pv.v_y};

    // Clip the quad against z >= kZClip in the camera frame, then project.
    std::array<Vec3, 8> poly;
    int n_poly = 0;
    std::array<Vec3, 4> cam;
    for (int i = 0; i < 4; ++i) cam[i] = rot_cw * (world[i] - view.t_wc);
    for (int i = 0; i < 4; ++i) {
        const Vec3& a = cam[i];
        const Vec3& b = cam[(i + 1) % 4];
        const bool ain = a.z() >= kZClip, bin = b.z() >= kZClip;
        if (ain) poly[n_poly++] = a;
        if (ain != bin) {
            const double s = (kZClip - a.z()) / (b.z() - a.z());
            poly[n_poly++] = a + s * (b - a);
        }
    }
    PixelRect rect;
    if (n_poly == 0) return rect;

    double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
    for (int i = 0; i < n_poly; ++i) {
        const double iz = 1.0 / poly[i].z();
        const double u = view.fx * poly[i].x() * iz + view.cx;
        const double v = view.fy * poly[i].y() * iz + view.cy;
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    rect.u0 = std::max(0, int(std::floor(umin - 0.5)) - 1);
    rect.u1 = std::min(view.width - 1, int(std::ceil(umax - 0.5)) + 1);
    rect.v0 = std::max(0, int(std::floor(vmin - 0.5)) - 1);
    rect.v1 = std::min(view.height - 1, int(std::ceil(vmax - 0.5)) + 1);
    return rect;
}

Binning bin_primitives(const CameraView& view, const Scene& scene,
                       const std::vector<PrimView>& pvs, double lambda,
                       const RenderConfig& cfg) {
    Binning bin;
    bin.tiles_x = (view.width + cfg.tile_size - 1) / cfg.tile_size;
    bin.tiles_y = (view.height + cfg.tile_size - 1) / cfg.tile_size;
    const int n_tiles = bin.tiles_x * bin.tiles_y;
    const double cut = splat_cut_margin(lambda, cfg.weight_floor) * 1.05;

    std::vector<PixelRect> rects(pvs.size());
    std::vector<std::int32_t> counts(n_tiles, 0);
    for (std::size_t i = 0; i < pvs.size(); ++i) {
        rects[i] = projected_rect(view, pvs[i], scene.primitives[i].center, cut);
        if (rects[i].empty()) continue;
        const int tx0 = rects[i].u0 / cfg.tile_size, tx1 = rects[i].u1 / cfg.tile_size;
        const int ty0 = rects[i].v0 / cfg.tile_size, ty1 = rects[i].v1 / cfg.tile_size;
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx) counts[ty * bin.tiles_x + tx]++;
    }
    bin.offsets.assign(n_tiles + 1, 0);
    for (int t = 0; t < n_tiles; ++t) bin.offsets[t + 1] = bin.offsets[t] + counts[t];
    bin.items.resize(bin.offsets.back());
    std::vector<std::int32_t> cursor(bin.offsets.begin(), bin.offsets.end() - 1);
    for (std::size_t i = 0; i < pvs.size(); ++i) {
        if (rects[i].empty()) continue;
        const int tx0 = rects[i].u0 / cfg.tile_size, tx1 = rects[i].u1 / cfg.tile_size;
        const int ty0 = rects[i].v0 / cfg.tile_size, ty1 = rects[i].v1 / cfg.tile_size;
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                bin.items[cursor[ty * bin.tiles_x + tx]++] = std::int32_t(i);
    }
    return bin;
}

// Raw intersection + kernel evaluation shared by forward and backward.
struct PixelRecord {
    std::int32_t prim = -1;
    double z = 0;
    double w = 0;
};

// Returns false when the candidate is filtered out. arg_cut guards the
// sigmoid evaluation: below -(arg_cut+1) the weight is provably under the
// floor, so the exact floor test afterwards never disagrees.
inline bool eval_candidate(const Vec3& d, double mu, const PrimView& pv, double lambda,
                           const RenderConfig& cfg, double arg_cut, double& z_out, double& w_out,
                           double& px_out, double& py_out, double& t_out) {
    const double denom = d.dot(pv.n);
    if (std::abs(denom) < cfg.parallel_eps) return false;
    const double t = pv.k_pn / denom;
    if (t <= cfg.t_near) return false;
    const double k = 5.0 * lambda;
    const Vec3 e = t * d - pv.s_po;
    const double px = e.dot(pv.v_x);
    const double ax = k * ((px > 0 ? pv.radii[0] : pv.radii[1]) - std::abs(px));
    if (ax < -(arg_cut + 1.0)) return false;
    const double py = e.dot(pv.v_y);
    const double ay = k * ((py > 0 ? pv.radii[2] : pv.radii[3]) - std::abs(py));
    if (ay < -(arg_cut + 1.0)) return false;
    const double wx = 2.0 * sigmoid(ax);
    const double wy = 2.0 * sigmoid(ay);
    const double w = std::min(std::min(wx, wy), 1.0);
    if (w < cfg.weight_floor) return false;
    z_out = t * mu;
    w_out = w;
    px_out = px;
    py_out = py;
    t_out = t;
    return true;
}

}  // namespace

std::vector<IntersectionRecord> gather_intersections(const Ray& ray, const CameraView& view,
                                                     std::span<const PlanePrimitive> prims,
                                                     std::span<const PlaneFrame> frames,
                                                     double lambda, const RenderConfig& cfg) {
    const Mat3 rot_cw = view.rot_wc.transpose();
    const Vec3 cam_z = view.camera_z_world();
    std::vector<IntersectionRecord> records;
    for (std::size_t i = 0; i < prims.size(); ++i) {
        const auto hit = intersect(ray, prims[i], frames[i], cam_z, cfg.t_near, cfg.parallel_eps);
        if (!hit) continue;
        double p_x, p_y;
        project_local(hit->point, prims[i], frames[i], p_x, p_y);
        const SplatEval ev = plane_splat_weight(p_x, p_y, prims[i].radii, lambda);
        if (ev.weight < cfg.weight_floor) continue;
        IntersectionRecord rec;
        rec.prim_index = std::int32_t(i);
        rec.point = hit->point;
        rec.z_cam = hit->z_cam;
        rec.weight = ev.weight;
        const double flip = (prims[i].center - ray.origin).dot(frames[i].n) < 0 ? 1.0 : -1.0;
        rec.normal_cam = flip * (rot_cw * frames[i].n);
        records.push_back(rec);
    }
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        return a.z_cam != b.z_cam ? a.z_cam < b.z_cam : a.prim_index < b.prim_index;
    });
    if (int(records.size()) > cfg.max_records) records.resize(cfg.max_records);
    return records;
}

PixelComposite composite(std::span<const IntersectionRecord> records) {
    PixelComposite out;
    double transmittance = 1.0;
    for (const IntersectionRecord& rec : records) {
        const double c = transmittance * rec.weight;
        out.depth += c * rec.z_cam;
        out.normal += c * rec.normal_cam;
        out.alpha += c;
        transmittance *= 1.0 - rec.weight;
    }
    return out;
}

ForwardResult Renderer::render_view(const CameraView& view, const Scene& scene, double lambda,
                                    bool keep_records) const {
    if (view.width < 1 || view.height < 1) throw std::invalid_argument("render_view: empty view");
    if (cfg_.max_records > kMaxRecordCap)
        throw std::invalid_argument("render_view: max_records above compile-time cap");

    ForwardResult result;
    result.maps.resize(view.width, view.height);
    result.max_records = cfg_.max_records;
    if (keep_records) {
        result.rec_prim.assign(view.pixel_count() * cfg_.max_records, -1);
        result.rec_count.assign(view.pixel_count(), 0);
    }

    const std::vector<PrimView> pvs = make_prim_views(view, scene);
    const Binning bin = bin_primitives(view, scene, pvs, lambda, cfg_);
    const RayBasis rb = ray_basis(view);
    const double arg_cut = std::log(2.0 / cfg_.weight_floor - 1.0);
    const int M = cfg_.max_records;

    auto tile_job = [&](std::size_t job) {
        const int tx = int(job) % bin.tiles_x;
        const int ty = int(job) / bin.tiles_x;
        const std::int32_t* cand = bin.items.data() + bin.offsets[job];
        const int n_cand = bin.offsets[job + 1] - bin.offsets[job];
        if (n_cand == 0) return;

        const int u0 = tx * cfg_.tile_size, u1 = std::min(view.width, u0 + cfg_.tile_size);
        const int v0 = ty * cfg_.tile_size, v1 = std::min(view.height, v0 + cfg_.tile_size);

        double rz[kMaxRecordCap], rw[kMaxRecordCap];
        std::int32_t rp[kMaxRecordCap];
        for (int v = v0; v < v1; ++v) {
            for (int u = u0; u < u1; ++u) {
                const Vec3 dir_un = rb.base + double(u) * rb.du + double(v) * rb.dv;
                const double inv_len = 1.0 / dir_un.norm();
                const Vec3 d = dir_un * inv_len;
                const double mu = inv_len;  // d . camera_z
                int cnt = 0;
                for (int c = 0; c < n_cand; ++c) {
                    const std::int32_t pi = cand[c];
                    double z, w, px_l, py_l, t;
                    if (!eval_candidate(d, mu, pvs[pi], lambda, cfg_, arg_cut, z, w, px_l, py_l,
                                        t))
                        continue;
                    // Bounded insertion keeps the M nearest, (z, prim) ascending.
                    int pos = cnt;
                    while (pos > 0 && (rz[pos - 1] > z || (rz[pos - 1] == z && rp[pos - 1] > pi)))
                        --pos;
                    if (pos == M) continue;
                    const int last = std::min(cnt, M - 1);
                    for (int s = last; s > pos; --s) {
                        rz[s] = rz[s - 1];
                        rw[s] = rw[s - 1];
                        rp[s] = rp[s - 1];
                    }
                    rz[pos] = z;
                    rw[pos] = w;
                    rp[pos] = pi;
                    if (cnt < M) ++cnt;
                }
                const std::size_t px = std::size_t(v) * view.width + u;
                double depth = 0, alpha = 0;
                Vec3 normal = Vec3::Zero();
                double transmittance = 1.0;
                for (int j = 0; j < cnt; ++j) {
                    const double cc = transmittance * rw[j];
                    depth += cc * rz[j];
                    normal += cc * pvs[rp[j]].m_cam;
                    alpha += cc;
                    transmittance *= 1.0 - rw[j];
                }
                result.maps.depth[px] = depth;
                result.maps.alpha[px] = alpha;
                result.maps.normal[3 * px] = normal.x();
                result.maps.normal[3 * px + 1] = normal.y();
                result.maps.normal[3 * px + 2] = normal.z();
                if (keep_records) {
                    result.rec_count[px] = std::uint16_t(cnt);
                    for (int j = 0; j < cnt; ++j) result.rec_prim[px * M + j] = rp[j];
                }
            }
        }
    };
    parallel_for(std::size_t(bin.tiles_x) * bin.tiles_y, cfg_.threads, tile_job);
    return result;
}

LossGrads Renderer::render_loss(const RenderedMaps& maps, const CameraView& view) const {
    if (maps.width != view.width || maps.height != view.height)
        throw std::invalid_argument("render_loss: resolution mismatch");

    LossGrads lg;
    lg.d_depth.assign(view.pixel_count(), 0.0);
    lg.d_normal.assign(view.pixel_count() * 3, 0.0);
    if (cfg_.normalize_by_alpha) lg.d_alpha.assign(view.pixel_count(), 0.0);

    std::size_t count_d = 0, count_n = 0;
    for (std::size_t px = 0; px < view.pixel_count(); ++px) {
        if (view.depth_valid(px)) ++count_d;
        if (view.normal_valid(px)) ++count_n;
    }
    const double inv_d = count_d ? 1.0 / double(count_d) : 0.0;
    const double inv_n = count_n ? 1.0 / double(count_n) : 0.0;
    const auto sgn = [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); };

    double sum_depth = 0, sum_normal = 0;
    for (std::size_t px = 0; px < view.pixel_count(); ++px) {
        const double a = maps.alpha[px];
        if (a < cfg_.alpha_floor) continue;
        const bool norm_on = cfg_.normalize_by_alpha && a > 1e-12;
        const double scale = norm_on ? 1.0 / a : 1.0;

        if (view.depth_valid(px)) {
            const double dr = maps.depth[px] * scale;
            const double diff = dr - double(view.target_depth[px]);
            sum_depth += std::abs(diff);
            const double g = cfg_.alpha2 * sgn(diff) * inv_d;
            lg.d_depth[px] = g * scale;
            if (norm_on) lg.d_alpha[px] -= g * dr * scale;
        }
        if (view.normal_valid(px)) {
            const Vec3 nr(maps.normal[3 * px] * scale, maps.normal[3 * px + 1] * scale,
                          maps.normal[3 * px + 2] * scale);
            const Vec3 nt(view.target_normal[3 * px], view.target_normal[3 * px + 1],
                          view.target_normal[3 * px + 2]);
            const double cos_term = 1.0 - nr.dot(nt);
            sum_normal += std::abs(cos_term);
            Vec3 g = -sgn(cos_term) * nt;
            for (int k = 0; k < 3; ++k) {
                sum_normal += std::abs(nr[k] - nt[k]);
                g[k] += sgn(nr[k] - nt[k]);
            }
            g *= cfg_.alpha1 * inv_n;
            for (int k = 0; k < 3; ++k) lg.d_normal[3 * px + k] = g[k] * scale;
            if (norm_on) lg.d_alpha[px] -= g.dot(nr) * scale;
        }
    }
    lg.loss = cfg_.alpha1 * sum_normal * inv_n + cfg_.alpha2 * sum_depth * inv_d;
    return lg;
}

void Renderer::backward(const CameraView& view, const Scene& scene, double lambda,
                        const ForwardResult& fwd, const LossGrads& loss_grads,
                        GradientBuffer& gradbuf) const {
    if (fwd.rec_count.empty())
        throw std::invalid_argument("backward: forward pass ran without keep_records");
    const int M = fwd.max_records;

    const std::vector<PrimView> pvs = make_prim_views(view, scene);
    const Binning bin = bin_primitives(view, scene, pvs, lambda, cfg_);
    const RayBasis rb = ray_basis(view);
    const bool has_alpha_grad = !loss_grads.d_alpha.empty();

    // Quaternion jacobians of the rotated basis vectors, per primitive.
    struct PrimJac {
        Eigen::Matrix<double, 3, 4> j_vx, j_vy, j_n;
    };
    std::vector<PrimJac> jacs(pvs.size());
    for (std::size_t i = 0; i < pvs.size(); ++i) {
        const double qw = pvs[i].q_hat[0], qx = pvs[i].q_hat[1], qy = pvs[i].q_hat[2],
                     qz = pvs[i].q_hat[3];
        jacs[i].j_vx << 0, 0, -4 * qy, -4 * qz,
                        2 * qz, 2 * qy, 2 * qx, 2 * qw,
                        -2 * qy, 2 * qz, -2 * qw, 2 * qx;
        jacs[i].j_vy << -2 * qz, 2 * qy, 2 * qx, -2 * qw,
                        0, -4 * qx, 0, -4 * qz,
                        2 * qx, 2 * qw, 2 * qz, 2 * qy;
        jacs[i].j_n << 2 * qy, 2 * qz, 2 * qw, 2 * qx,
                       -2 * qx, -2 * qw, 2 * qz, 2 * qy,
                       0, -4 * qx, -4 * qy, 0;
    }

    const std::size_t n_tiles = std::size_t(bin.tiles_x) * bin.tiles_y;
    std::vector<std::vector<PrimGrad>> tile_grads(n_tiles);

    auto tile_job = [&](std::size_t job) {
        const std::int32_t* cand = bin.items.data() + bin.offsets[job];
        const int n_cand = bin.offsets[job + 1] - bin.offsets[job];
        if (n_cand == 0) return;
        const int tx = int(job) % bin.tiles_x;
        const int ty = int(job) / bin.tiles_x;
        const int u0 = tx * cfg_.tile_size, u1 = std::min(view.width, u0 + cfg_.tile_size);
        const int v0 = ty * cfg_.tile_size, v1 = std::min(view.height, v0 + cfg_.tile_size);

        std::vector<PrimGrad> local(n_cand);
        auto slot_of = [&](std::int32_t prim) {
            return int(std::lower_bound(cand, cand + n_cand, prim) - cand);
        };

        double rz[kMaxRecordCap], rw[kMaxRecordCap], rt[kMaxRecordCap], rpx[kMaxRecordCap],
            rpy[kMaxRecordCap], rT[kMaxRecordCap], rphi[kMaxRecordCap];

        for (int v = v0; v < v1; ++v) {
            for (int u = u0; u < u1; ++u) {
                const std::size_t px = std::size_t(v) * view.width + u;
                const int cnt = fwd.rec_count[px];
                if (cnt == 0) continue;
                const double g_d = loss_grads.d_depth[px];
                const Vec3 g_n(loss_grads.d_normal[3 * px], loss_grads.d_normal[3 * px + 1],
                               loss_grads.d_normal[3 * px + 2]);
                const double g_a = has_alpha_grad ? loss_grads.d_alpha[px] : 0.0;
                if (g_d == 0.0 && g_a == 0.0 && g_n.isZero()) continue;

                const Vec3 dir_un = rb.base + double(u) * rb.du + double(v) * rb.dv;
                const double inv_len = 1.0 / dir_un.norm();
                const Vec3 d = dir_un * inv_len;
                const double mu = inv_len;
                const Vec3 g_n_world = view.rot_wc * g_n;

                // Replay the stored records; same arithmetic as forward.
                double transmittance = 1.0;
                for (int j = 0; j < cnt; ++j) {
                    const std::int32_t pi = fwd.rec_prim[px * M + j];
                    const PrimView& pv = pvs[pi];
                    const double denom = d.dot(pv.n);
                    const double t = pv.k_pn / denom;
                    const Vec3 e = t * d - pv.s_po;
                    rt[j] = t;
                    rz[j] = t * mu;
                    rpx[j] = e.dot(pv.v_x);
                    rpy[j] = e.dot(pv.v_y);
                    const SplatEval ev =
                        plane_splat_weight(rpx[j], rpy[j], pv.radii, lambda);
                    rw[j] = ev.weight;
                    rT[j] = transmittance;
                    transmittance *= 1.0 - ev.weight;
                    rphi[j] = g_d * rz[j] + g_n.dot(pv.m_cam) + g_a;
                }

                // Suffix sweep: dL/dw_k = T_k (phi_k - A_k) with
                // A_k the composited phi of everything behind k.
                double suffix = 0.0;
                for (int j = cnt - 1; j >= 0; --j) {
                    const std::int32_t pi = fwd.rec_prim[px * M + j];
                    const PrimView& pv = pvs[pi];
                    const double g_w = rT[j] * (rphi[j] - suffix);
                    suffix = rw[j] * rphi[j] + (1.0 - rw[j]) * suffix;

                    const double c = rT[j] * rw[j];
                    const double g_z = c * g_d;
                    const SplatEval ev = plane_splat_weight(rpx[j], rpy[j], pv.radii, lambda);
                    const double denom = d.dot(pv.n);
                    const double t = rt[j];
                    const Vec3 e = t * d - pv.s_po;

                    const double d_p_sel = ev.x_selected ? ev.d_px : ev.d_py;
                    const Vec3& v_sel = ev.x_selected ? pv.v_x : pv.v_y;
                    const auto& j_sel = ev.x_selected ? jacs[pi].j_vx : jacs[pi].j_vy;
                    const double d_dot_vsel = d.dot(v_sel);

                    PrimGrad& pg = local[slot_of(pi)];
                    const double coef_n = (g_w * d_p_sel * d_dot_vsel + g_z * mu) / denom;
                    pg.d_center += coef_n * pv.n - (g_w * d_p_sel) * v_sel;
                    pg.d_radii += g_w * ev.d_radii;

                    const Vec3 s_minus_td = pv.s_po - t * d;
                    for (int a = 0; a < 4; ++a) {
                        const Vec3 dn_a = jacs[pi].j_n.col(a);
                        const double dt_a = s_minus_td.dot(dn_a) / denom;
                        const double dp_a = d_dot_vsel * dt_a + e.dot(j_sel.col(a));
                        pg.d_rotation[a] += g_w * d_p_sel * dp_a + g_z * mu * dt_a +
                                            c * pv.flip * g_n_world.dot(dn_a);
                    }
                }
            }
        }
        tile_grads[job] = std::move(local);
    };
    parallel_for(n_tiles, cfg_.threads, tile_job);

    // Ordered reduction over tiles keeps the sums independent of thread count.
    if (gradbuf.grads.size() != scene.primitives.size()) gradbuf.reset(scene.primitives.size());
    for (std::size_t tile = 0; tile < n_tiles; ++tile) {
        if (tile_grads[tile].empty()) continue;
        const std::int32_t* cand = bin.items.data() + bin.offsets[tile];
        for (std::size_t c = 0; c < tile_grads[tile].size(); ++c) {
            PrimGrad& dst = gradbuf.grads[cand[c]];
            const PrimGrad& src = tile_grads[tile][c];
            dst.d_center += src.d_center;
            dst.d_rotation += src.d_rotation;
            dst.d_radii += src.d_radii;
        }
    }

    // Project rotation gradients onto the unit-sphere tangent so they are
    // consistent with post-step renormalization, then check finiteness.
    for (std::size_t i = 0; i < pvs.size(); ++i) {
        PrimGrad& pg = gradbuf.grads[i];
        pg.d_rotation -= pvs[i].q_hat * pvs[i].q_hat.dot(pg.d_rotation);
        if (!pg.d_center.allFinite() || !pg.d_rotation.allFinite() || !pg.d_radii.allFinite()) {
            std::ostringstream msg;
            msg << "backward: non-finite gradient for primitive id "
                << scene.primitives[i].id;
            throw std::runtime_error(msg.str());
        }
    }
}

}  // namespace psplat

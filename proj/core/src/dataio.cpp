#include "psplat/dataio.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace psplat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMapMagic[4] = {'P', 'S', 'M', 'P'};
constexpr std::uint32_t kMapVersion = 1;
constexpr char kCheckpointMagic[4] = {'P', 'S', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

[[noreturn]] void fail(const fs::path& path, const std::string& what) {
    throw std::runtime_error(path.string() + ": " + what);
}

template <typename T>
void write_raw(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
}

void write_map_header(std::ostream& out, int width, int height) {
    out.write(kMapMagic, 4);
    write_raw(out, kMapVersion);
    write_raw(out, std::uint32_t(width));
    write_raw(out, std::uint32_t(height));
}

void read_map_header(std::istream& in, const fs::path& path, int& width, int& height) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMapMagic, 4) != 0) fail(path, "bad map magic");
    const auto version = read_raw<std::uint32_t>(in);
    if (version != kMapVersion) fail(path, "unsupported map version");
    width = int(read_raw<std::uint32_t>(in));
    height = int(read_raw<std::uint32_t>(in));
    if (!in || width <= 0 || height <= 0) fail(path, "bad map dimensions");
}

std::uintmax_t payload_size(const fs::path& path) {
    return fs::file_size(path) - 16;
}

}  // namespace

void write_map_f32(const fs::path& path, int width, int height, int channels,
                   const float* data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    write_map_header(out, width, height);
    out.write(reinterpret_cast<const char*>(data),
              std::streamsize(sizeof(float)) * width * height * channels);
    if (!out) fail(path, "write failed");
}

void write_map_u32(const fs::path& path, int width, int height, const std::uint32_t* data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    write_map_header(out, width, height);
    out.write(reinterpret_cast<const char*>(data),
              std::streamsize(sizeof(std::uint32_t)) * width * height);
    if (!out) fail(path, "write failed");
}

MapF32 read_map_f32(const fs::path& path, int expected_channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    MapF32 map;
    read_map_header(in, path, map.width, map.height);
    map.channels = expected_channels;
    const std::size_t count = std::size_t(map.width) * map.height * expected_channels;
    if (payload_size(path) != count * sizeof(float))
        fail(path, "payload length does not match header");
    map.data.resize(count);
    in.read(reinterpret_cast<char*>(map.data.data()), std::streamsize(count * sizeof(float)));
    if (!in) fail(path, "truncated payload");
    return map;
}

MapU32 read_map_u32(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    MapU32 map;
    read_map_header(in, path, map.width, map.height);
    const std::size_t count = std::size_t(map.width) * map.height;
    if (payload_size(path) != count * sizeof(std::uint32_t))
        fail(path, "payload length does not match header");
    map.data.resize(count);
    in.read(reinterpret_cast<char*>(map.data.data()),
            std::streamsize(count * sizeof(std::uint32_t)));
    if (!in) fail(path, "truncated payload");
    return map;
}

namespace {

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }

void validate_view(const CameraView& view, const fs::path& root) {
    const Mat3 should_be_identity = view.rot_wc.transpose() * view.rot_wc - Mat3::Identity();
    if (should_be_identity.cwiseAbs().maxCoeff() > 1e-6)
        fail(root, "view " + std::to_string(view.id) + ": pose rotation not orthonormal");
    for (std::size_t px = 0; px < view.pixel_count(); ++px) {
        if (!view.normal_valid(px)) continue;
        const double n = std::sqrt(double(view.target_normal[3 * px]) * view.target_normal[3 * px] +
                                   double(view.target_normal[3 * px + 1]) * view.target_normal[3 * px + 1] +
                                   double(view.target_normal[3 * px + 2]) * view.target_normal[3 * px + 2]);
        if (n < 1.0 - 1e-4 || n > 1.0 + 1e-4)
            fail(root, "view " + std::to_string(view.id) + ": non-unit target normal");
    }
}

}  // namespace

Dataset load_dataset(const fs::path& root, int stride) {
    if (stride < 1) throw std::invalid_argument("load_dataset: stride must be >= 1");
    const fs::path cams = root / "cameras.txt";
    std::ifstream in(cams);
    if (!in) fail(cams, "cannot open");

    Dataset ds;
    std::string line;
    int line_index = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const int idx = line_index++;
        if (idx % stride != 0) continue;
        std::istringstream ls(line);
        CameraView view;
        double m[16];
        ls >> view.id >> view.fx >> view.fy >> view.cx >> view.cy >> view.width >> view.height;
        for (double& x : m) ls >> x;
        if (!ls) fail(cams, "malformed camera line: " + line);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) view.rot_wc(r, c) = m[4 * r + c];
        view.t_wc = Vec3(m[3], m[7], m[11]);

        const fs::path depth_path = root / "depth" / (std::to_string(view.id) + ".f32");
        const fs::path normal_path = root / "normal" / (std::to_string(view.id) + ".f32");
        MapF32 depth = read_map_f32(depth_path, 1);
        MapF32 normal = read_map_f32(normal_path, 3);
        if (depth.width != view.width || depth.height != view.height)
            fail(depth_path, "resolution differs from cameras.txt");
        if (normal.width != view.width || normal.height != view.height)
            fail(normal_path, "resolution differs from cameras.txt");
        view.target_depth = std::move(depth.data);
        view.target_normal = std::move(normal.data);
        validate_view(view, root);
        ds.views.push_back(std::move(view));
    }
    if (ds.views.empty()) fail(cams, "no cameras loaded");

    const fs::path meta_path = root / "meta.json";
    if (fs::exists(meta_path)) {
        std::ifstream mf(meta_path);
        json j;
        try {
            mf >> j;
        } catch (const std::exception& e) {
            fail(meta_path, e.what());
        }
        ds.meta.scene_center = vec3_from_json(j.at("scene_center"));
        ds.meta.units = j.value("units", "meters");
        if (j.contains("gt_faces")) {
            for (const json& fj : j.at("gt_faces")) {
                GtFace f;
                f.instance_id = fj.at("id");
                f.center = vec3_from_json(fj.at("center"));
                f.u_axis = vec3_from_json(fj.at("u_axis"));
                f.v_axis = vec3_from_json(fj.at("v_axis"));
                f.half_u = fj.at("half_u");
                f.half_v = fj.at("half_v");
                f.normal = f.u_axis.cross(f.v_axis);
                ds.meta.gt_faces.push_back(f);
            }
        }
        ds.has_meta = true;
    }
    return ds;
}

void write_dataset(const fs::path& root, const std::vector<CameraView>& views,
                   const SceneMeta& meta,
                   const std::vector<std::vector<std::uint32_t>>* instance_maps) {
    fs::create_directories(root / "depth");
    fs::create_directories(root / "normal");
    if (instance_maps) fs::create_directories(root / "instance");

    std::ofstream cams(root / "cameras.txt");
    if (!cams) fail(root / "cameras.txt", "cannot open for writing");
    cams.precision(17);
    for (std::size_t vi = 0; vi < views.size(); ++vi) {
        const CameraView& view = views[vi];
        cams << view.id << ' ' << view.fx << ' ' << view.fy << ' ' << view.cx << ' ' << view.cy
             << ' ' << view.width << ' ' << view.height;
        double m[16] = {0};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) m[4 * r + c] = view.rot_wc(r, c);
            m[4 * r + 3] = view.t_wc[r];
        }
        m[15] = 1.0;
        for (double x : m) cams << ' ' << x;
        cams << '\n';

        write_map_f32(root / "depth" / (std::to_string(view.id) + ".f32"), view.width,
                      view.height, 1, view.target_depth.data());
        write_map_f32(root / "normal" / (std::to_string(view.id) + ".f32"), view.width,
                      view.height, 3, view.target_normal.data());
        if (instance_maps)
            write_map_u32(root / "instance" / (std::to_string(view.id) + ".u32"), view.width,
                          view.height, (*instance_maps)[vi].data());
    }

    json j;
    j["scene_center"] = vec3_to_json(meta.scene_center);
    j["units"] = meta.units;
    if (!meta.gt_faces.empty()) {
        json faces = json::array();
        for (const GtFace& f : meta.gt_faces) {
            json fj;
            fj["id"] = f.instance_id;
            fj["center"] = vec3_to_json(f.center);
            fj["u_axis"] = vec3_to_json(f.u_axis);
            fj["v_axis"] = vec3_to_json(f.v_axis);
            fj["half_u"] = f.half_u;
            fj["half_v"] = f.half_v;
            faces.push_back(fj);
        }
        j["gt_faces"] = faces;
    }
    std::ofstream mf(root / "meta.json");
    mf << j.dump(2) << '\n';
}

void save_checkpoint(const fs::path& path, const OptimState& state, std::uint64_t config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out.write(kCheckpointMagic, 4);
    write_raw(out, kCheckpointVersion);
    write_raw(out, config_hash);
    write_raw(out, state.iteration);
    write_raw(out, state.scene.next_id);
    write_raw(out, std::uint64_t(state.scene.primitives.size()));
    for (std::size_t i = 0; i < state.scene.primitives.size(); ++i) {
        const PlanePrimitive& prim = state.scene.primitives[i];
        write_raw(out, prim.id);
        for (int k = 0; k < 3; ++k) write_raw(out, prim.center[k]);
        for (int k = 0; k < 4; ++k) write_raw(out, prim.rotation[k]);
        for (int k = 0; k < 4; ++k) write_raw(out, prim.radii[k]);
        const AdamState& adam = state.adam[i];
        write_raw(out, adam.step);
        for (double x : adam.m) write_raw(out, x);
        for (double x : adam.v) write_raw(out, x);
        for (int k = 0; k < 4; ++k) write_raw(out, state.radii_grad_sum[i][k]);
        write_raw(out, state.radii_grad_count[i]);
    }
    if (!out) fail(path, "write failed");
}

std::uint64_t peek_checkpoint_hash(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) fail(path, "bad checkpoint magic");
    const auto version = read_raw<std::uint32_t>(in);
    if (version != kCheckpointVersion) fail(path, "unsupported checkpoint version");
    return read_raw<std::uint64_t>(in);
}

OptimState load_checkpoint(const fs::path& path, std::uint64_t expected_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) fail(path, "bad checkpoint magic");
    const auto version = read_raw<std::uint32_t>(in);
    if (version != kCheckpointVersion) fail(path, "unsupported checkpoint version");
    const auto hash = read_raw<std::uint64_t>(in);
    if (hash != expected_hash)
        fail(path, "config hash mismatch: checkpoint was written with a different "
                   "effective configuration");

    OptimState state;
    state.iteration = read_raw<std::int64_t>(in);
    state.scene.next_id = read_raw<std::int64_t>(in);
    const auto n = read_raw<std::uint64_t>(in);
    state.scene.primitives.resize(n);
    state.adam.resize(n);
    state.radii_grad_sum.resize(n);
    state.radii_grad_count.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        PlanePrimitive& prim = state.scene.primitives[i];
        prim.id = read_raw<std::int64_t>(in);
        for (int k = 0; k < 3; ++k) prim.center[k] = read_raw<double>(in);
        for (int k = 0; k < 4; ++k) prim.rotation[k] = read_raw<double>(in);
        for (int k = 0; k < 4; ++k) prim.radii[k] = read_raw<double>(in);
        AdamState& adam = state.adam[i];
        adam.step = read_raw<std::int64_t>(in);
        for (double& x : adam.m) x = read_raw<double>(in);
        for (double& x : adam.v) x = read_raw<double>(in);
        for (int k = 0; k < 4; ++k) state.radii_grad_sum[i][k] = read_raw<double>(in);
        state.radii_grad_count[i] = read_raw<std::int64_t>(in);
    }
    if (!in) fail(path, "truncated checkpoint");
    return state;
}

namespace {

std::array<std::uint8_t, 3> instance_color(int id) {
    double hue = std::fmod(0.618033988749895 * (id + 1), 1.0) * 6.0;
    const double s = 0.65, v = 0.95;
    const int i = int(hue);
    const double f = hue - i;
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double r, g, b;
    switch (i % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    return {std::uint8_t(r * 255), std::uint8_t(g * 255), std::uint8_t(b * 255)};
}

}  // namespace

void export_instances_ply(const fs::path& path, const Scene& scene,
                          const std::vector<PlaneInstance>& instances, bool binary,
                          bool project) {
    if (instances.empty()) throw std::invalid_argument("export_instances_ply: no instances");
    std::size_t n_prims = 0;
    for (const PlaneInstance& inst : instances) n_prims += inst.member_indices.size();

    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) fail(path, "cannot open for writing");
    out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii")
        << " 1.0\nelement vertex " << 4 * n_prims
        << "\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\n"
           "property uchar green\nproperty uchar blue\nelement face "
        << 2 * n_prims << "\nproperty list uchar int vertex_indices\nend_header\n";

    std::size_t vertex_base = 0;
    std::ostringstream faces;
    for (const PlaneInstance& inst : instances) {
        const auto color = instance_color(inst.id);
        Vec3 plane_point = Vec3::Zero();
        if (project) {
            double area = 0;
            for (std::int32_t m : inst.member_indices) {
                plane_point += scene.primitives[m].area() * scene.primitives[m].center;
                area += scene.primitives[m].area();
            }
            plane_point /= area;
        }
        for (std::int32_t m : inst.member_indices) {
            const PlanePrimitive& prim = scene.primitives[m];
            const PlaneFrame f = plane_frame(quat_normalized(prim.rotation));
            auto corners = rect_corners(prim, f);
            if (project) {
                for (Vec3& c : corners)
                    c -= (c - plane_point).dot(inst.normal) * inst.normal;
            }
            for (const Vec3& c : corners) {
                if (binary) {
                    const float xyz[3] = {float(c.x()), float(c.y()), float(c.z())};
                    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
                    out.write(reinterpret_cast<const char*>(color.data()), 3);
                } else {
                    out << float(c.x()) << ' ' << float(c.y()) << ' ' << float(c.z()) << ' '
                        << int(color[0]) << ' ' << int(color[1]) << ' ' << int(color[2]) << '\n';
                }
            }
            if (binary) {
                const std::uint8_t three = 3;
                const std::int32_t tri0[3] = {std::int32_t(vertex_base),
                                              std::int32_t(vertex_base + 1),
                                              std::int32_t(vertex_base + 2)};
                const std::int32_t tri1[3] = {std::int32_t(vertex_base),
                                              std::int32_t(vertex_base + 2),
                                              std::int32_t(vertex_base + 3)};
                faces.write(reinterpret_cast<const char*>(&three), 1);
                faces.write(reinterpret_cast<const char*>(tri0), sizeof(tri0));
                faces.write(reinterpret_cast<const char*>(&three), 1);
                faces.write(reinterpret_cast<const char*>(tri1), sizeof(tri1));
            } else {
                faces << "3 " << vertex_base << ' ' << vertex_base + 1 << ' ' << vertex_base + 2
                      << "\n3 " << vertex_base << ' ' << vertex_base + 2 << ' '
                      << vertex_base + 3 << '\n';
            }
            vertex_base += 4;
        }
    }
    out << faces.str();
    if (!out) fail(path, "write failed");
}

void write_loss_log_csv(const fs::path& path, const std::vector<LossLogRow>& rows) {
    std::ofstream out(path);
    if (!out) fail(path, "cannot open for writing");
    out.precision(17);
    out << "iteration,loss,lambda,primitives\n";
    for (const LossLogRow& row : rows)
        out << row.iteration << ',' << row.loss << ',' << row.lambda << ','
            << row.primitive_count << '\n';
}

void write_rendered_maps(const fs::path& dir, const std::string& stem,
                         const RenderedMaps& maps) {
    fs::create_directories(dir);
    std::vector<float> tmp(maps.depth.begin(), maps.depth.end());
    write_map_f32(dir / (stem + "_depth.f32"), maps.width, maps.height, 1, tmp.data());
    tmp.assign(maps.normal.begin(), maps.normal.end());
    write_map_f32(dir / (stem + "_normal.f32"), maps.width, maps.height, 3, tmp.data());
    tmp.assign(maps.alpha.begin(), maps.alpha.end());
    write_map_f32(dir / (stem + "_alpha.f32"), maps.width, maps.height, 1, tmp.data());
}

MapF32 read_depth_png(const fs::path& path, double scale) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) fail(path, "cannot open");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        fail(path, "libpng failed to decode");
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const int width = int(png_get_image_width(png, info));
    const int height = int(png_get_image_height(png, info));
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        fail(path, "expected 16-bit grayscale PNG");
    }
    png_set_swap(png);  // PNG is big-endian
    std::vector<std::uint16_t> raw(std::size_t(width) * height);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = reinterpret_cast<png_bytep>(raw.data() + std::size_t(y) * width);
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    MapF32 map;
    map.width = width;
    map.height = height;
    map.channels = 1;
    map.data.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) map.data[i] = float(raw[i] * scale);
    return map;
}

void write_preview_pgm(const fs::path& path, const std::vector<double>& values, int width,
                       int height) {
    double lo = 1e300, hi = -1e300;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out << "P5\n" << width << ' ' << height << "\n255\n";
    for (double v : values) out.put(char(std::uint8_t(255.0 * (v - lo) / span)));
}

void write_normal_preview_ppm(const fs::path& path, const std::vector<double>& normals,
                              int width, int height) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out << "P6\n" << width << ' ' << height << "\n255\n";
    for (std::size_t px = 0; px < std::size_t(width) * height; ++px)
        for (int k = 0; k < 3; ++k)
            out.put(char(std::uint8_t(std::clamp(127.5 * (normals[3 * px + k] + 1.0), 0.0,
                                                 255.0))));
}

}  // namespace psplat

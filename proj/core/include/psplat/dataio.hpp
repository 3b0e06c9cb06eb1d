#pragma once

#include "psplat/optimizer.hpp"
#include "psplat/renderer.hpp"
#include "psplat/synthetic.hpp"

#include <filesystem>
#include <string>

namespace psplat {

// Binary map container: 16-byte header (magic "PSMP", u32 version, u32 W,
// u32 H, little-endian) followed by the row-major channel-interleaved
// payload. Loaders reject malformed files instead of repairing them.

void write_map_f32(const std::filesystem::path& path, int width, int height, int channels,
                   const float* data);
void write_map_u32(const std::filesystem::path& path, int width, int height,
                   const std::uint32_t* data);

struct MapF32 {
    int width = 0, height = 0, channels = 0;
    std::vector<float> data;
};
struct MapU32 {
    int width = 0, height = 0;
    std::vector<std::uint32_t> data;
};

MapF32 read_map_f32(const std::filesystem::path& path, int expected_channels);
MapU32 read_map_u32(const std::filesystem::path& path);

struct SceneMeta {
    Vec3 scene_center = Vec3::Zero();
    std::string units = "meters";
    std::vector<GtFace> gt_faces;  // present for synthetic datasets
};

struct Dataset {
    std::vector<CameraView> views;
    SceneMeta meta;
    bool has_meta = false;
};

/// Loads cameras.txt + depth/normal maps, validating headers, resolutions
/// and the view invariants. `stride` keeps every stride-th camera line.
Dataset load_dataset(const std::filesystem::path& root, int stride = 1);

void write_dataset(const std::filesystem::path& root, const std::vector<CameraView>& views,
                   const SceneMeta& meta,
                   const std::vector<std::vector<std::uint32_t>>* instance_maps = nullptr);

/// Full optimization state; load refuses on config-hash or version mismatch.
void save_checkpoint(const std::filesystem::path& path, const OptimState& state,
                     std::uint64_t config_hash);
OptimState load_checkpoint(const std::filesystem::path& path, std::uint64_t expected_hash);
std::uint64_t peek_checkpoint_hash(const std::filesystem::path& path);

/// Each member primitive contributes its 4 corners and 2 triangles, colored
/// by instance id. `project` flattens members onto their instance plane.
void export_instances_ply(const std::filesystem::path& path, const Scene& scene,
                          const std::vector<PlaneInstance>& instances, bool binary = false,
                          bool project = false);

void write_loss_log_csv(const std::filesystem::path& path,
                        const std::vector<LossLogRow>& rows);

void write_rendered_maps(const std::filesystem::path& dir, const std::string& stem,
                         const RenderedMaps& maps);

/// 16-bit grayscale PNG (ScanNet millimeter convention) to meters.
MapF32 read_depth_png(const std::filesystem::path& path, double scale);

void write_preview_pgm(const std::filesystem::path& path, const std::vector<double>& values,
                       int width, int height);
void write_normal_preview_ppm(const std::filesystem::path& path,
                              const std::vector<double>& normals, int width, int height);

}  // namespace psplat

#pragma once

#include "psplat/metrics.hpp"
#include "psplat/optimizer.hpp"
#include "psplat/renderer.hpp"
#include "psplat/scene_init.hpp"
#include "psplat/splatting.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <variant>

namespace psplat {

/// Merged configuration addressable by dotted keys (optimizer.merge_offset,
/// splat.lambda_max, ...). Every constant the pipeline uses lives here;
/// unknown keys are rejected and the effective set can be echoed verbatim.
struct RunConfig {
    SplatParams splat;
    RenderConfig renderer;
    OptimConfig optimizer;
    InitConfig init;
    MetricConfig metrics;

    struct Synth {
        double room_width = 4.0, room_depth = 4.0, room_height = 3.0;
        std::int64_t boxes = 0;
        std::int64_t views = 100;
        std::uint64_t seed = 7;
        std::int64_t image_width = 320, image_height = 240;
        double hfov_deg = 75.0;
        double depth_noise = 0.0;
    } synth;

    struct Io {
        std::int64_t stride = 1;
        bool ply_binary = false;
        bool ply_project = false;
    } io;

    struct Run {
        std::string data;
        std::string out;
        std::string checkpoint;
        std::int64_t view_id = 0;
        double lambda_override = 0.0;  // <= 0 uses the schedule value
        bool resume = false;
        bool eval_gt_self = false;
    } run;

    /// Renderer config with the shared weight floor folded in.
    RenderConfig render_config() const {
        RenderConfig rc = renderer;
        rc.weight_floor = splat.weight_floor;
        return rc;
    }
};

class ConfigRegistry {
public:
    explicit ConfigRegistry(RunConfig& cfg);

    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    bool has(const std::string& key) const;
    std::vector<std::string> keys() const;

    /// `key = value` lines; '#' starts a comment. Unknown keys throw.
    void load_file(const std::filesystem::path& path);
    /// PSPLAT_<KEY with dots as underscores, uppercased> overrides.
    void apply_env();
    /// Canonical echo, sorted by key; parseable by load_file.
    std::string echo() const;
    void write_echo(const std::filesystem::path& path) const;

    /// FNV-1a over the echo of the optimization-relevant sections (splat,
    /// renderer minus thread count, optimizer, init). Changing any of them
    /// invalidates checkpoints.
    std::uint64_t state_hash() const;

private:
    struct Entry {
        std::variant<double*, std::int64_t*, int*, std::uint64_t*, bool*, std::string*,
                     InitConfig::Mode*>
            target;
    };
    std::map<std::string, Entry> entries_;
};

}  // namespace psplat

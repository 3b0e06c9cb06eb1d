#include "psplat/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using psplat::ConfigRegistry;
using psplat::RunConfig;

struct CommonArgs {
    std::string config_file;
    std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* cmd, CommonArgs& common) {
    cmd->add_option("--config", common.config_file, "Key=value config file");
    cmd->add_option("--set", common.overrides, "Override any config key (key=value)")
        ->expected(-1);
}

// Precedence: defaults < config file < PSPLAT_* env < --set < named flags.
void apply_common(ConfigRegistry& reg, const CommonArgs& common) {
    if (!common.config_file.empty()) reg.load_file(common.config_file);
    reg.apply_env();
    for (const std::string& kv : common.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        reg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
}

// Named flags recorded as key/value pairs and applied last.
struct FlagBinder {
    std::vector<std::pair<std::string, std::string>> values;

    CLI::Option* bind(CLI::App* cmd, const std::string& flag, const std::string& key,
                      const std::string& desc) {
        std::function<void(const std::string&)> sink = [this, key](const std::string& v) {
            values.emplace_back(key, v);
        };
        return cmd->add_option_function<std::string>(flag, std::move(sink), desc);
    }
    void apply(ConfigRegistry& reg) const {
        for (const auto& [key, value] : values) reg.set(key, value);
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"psplat: planar-primitive splatting reconstruction"};
    app.require_subcommand(1);

    RunConfig cfg;
    ConfigRegistry reg(cfg);

    CommonArgs common;
    FlagBinder flags;

    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic box-room dataset");
    add_common(synth, common);
    flags.bind(synth, "--out", "run.out", "Output dataset directory");
    flags.bind(synth, "--boxes", "synth.boxes", "Number of interior boxes");
    flags.bind(synth, "--views", "synth.views", "Number of camera views");
    flags.bind(synth, "--seed", "synth.seed", "Generation seed");
    flags.bind(synth, "--width", "synth.room_width", "Room width (m)");
    flags.bind(synth, "--depth", "synth.room_depth", "Room depth (m)");
    flags.bind(synth, "--height", "synth.room_height", "Room height (m)");
    flags.bind(synth, "--img-width", "synth.image_width", "Image width (px)");
    flags.bind(synth, "--img-height", "synth.image_height", "Image height (px)");
    flags.bind(synth, "--depth-noise", "synth.depth_noise", "Gaussian depth noise sigma (m)");

    CLI::App* optimize = app.add_subcommand("optimize", "Fit plane primitives to a dataset");
    add_common(optimize, common);
    flags.bind(optimize, "--data", "run.data", "Dataset directory");
    flags.bind(optimize, "--out", "run.out", "Output directory");
    flags.bind(optimize, "--iters", "optimizer.iterations", "Optimization iterations");
    flags.bind(optimize, "--init", "init.mode", "Initialization mode (depth|sphere)");
    flags.bind(optimize, "--n-primitives", "init.n_primitives", "Initial primitive count");
    flags.bind(optimize, "--radii", "init.sphere_radius", "Sphere-init radius (m)");
    flags.bind(optimize, "--seed", "optimizer.seed", "Optimization seed");
    flags.bind(optimize, "--threads", "renderer.threads", "Worker threads (0 = hardware)");
    flags.bind(optimize, "--merge-offset", "optimizer.merge_offset", "Merge offset gate (m)");
    flags.bind(optimize, "--checkpoint", "run.checkpoint", "Checkpoint to resume from");
    flags.bind(optimize, "--resume", "run.resume", "Resume from --checkpoint (true|false)");
    flags.bind(optimize, "--stride", "io.stride", "Frame subsampling stride");

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint against ground truth");
    add_common(eval, common);
    flags.bind(eval, "--data", "run.data", "Dataset directory (with GT meta)");
    flags.bind(eval, "--out", "run.out", "Report directory");
    flags.bind(eval, "--checkpoint", "run.checkpoint", "Checkpoint to evaluate");
    flags.bind(eval, "--fscore-tau", "metrics.fscore_tau", "F-score threshold (m)");
    flags.bind(eval, "--density", "metrics.density", "Sampling density (points/m^2)");
    flags.bind(eval, "--gt-self", "run.eval_gt_self", "Evaluate GT against itself (true|false)");

    CLI::App* render = app.add_subcommand("render", "Dump rendered maps for one view");
    add_common(render, common);
    flags.bind(render, "--data", "run.data", "Dataset directory");
    flags.bind(render, "--out", "run.out", "Output directory");
    flags.bind(render, "--checkpoint", "run.checkpoint", "Checkpoint to render");
    flags.bind(render, "--view", "run.view_id", "View id");
    flags.bind(render, "--lambda", "run.lambda_override", "Sharpness override (>0)");

    CLI::App* convert = app.add_subcommand("convert-depth",
                                           "Convert 16-bit millimeter PNG depth to .f32");
    std::string conv_in, conv_out;
    double conv_scale = 0.001;
    convert->add_option("--in", conv_in, "Input PNG")->required();
    convert->add_option("--out", conv_out, "Output .f32 map")->required();
    convert->add_option("--scale", conv_scale, "Meters per input unit (default 0.001)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (convert->parsed())
            return psplat::cmd_convert_depth(conv_in, conv_out, conv_scale, std::cout);
        apply_common(reg, common);
        flags.apply(reg);
        if (synth->parsed()) return psplat::cmd_synth(cfg, reg, std::cout);
        if (optimize->parsed()) return psplat::cmd_optimize(cfg, reg, std::cout);
        if (eval->parsed()) return psplat::cmd_eval(cfg, reg, std::cout);
        if (render->parsed()) return psplat::cmd_render(cfg, reg, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include "psplat/commands.hpp"

#include "psplat/dataio.hpp"
#include "psplat/parallel.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>

namespace psplat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void echo_config(const RunConfig& cfg, const ConfigRegistry& reg) {
    fs::create_directories(cfg.run.out);
    reg.write_echo(fs::path(cfg.run.out) / "config.cfg");
}

std::vector<CameraView> synth_views(const RunConfig& cfg, const SyntheticScene& scene,
                                    const std::vector<Pose>& poses,
                                    std::vector<std::vector<std::uint32_t>>& instance_maps) {
    const int w = int(cfg.synth.image_width), h = int(cfg.synth.image_height);
    const double fx = (w / 2.0) / std::tan(cfg.synth.hfov_deg * M_PI / 360.0);
    std::vector<CameraView> views(poses.size());
    instance_maps.assign(poses.size(), {});
    parallel_for(poses.size(), cfg.renderer.threads, [&](std::size_t i) {
        CameraView& view = views[i];
        view.id = int(i);
        view.width = w;
        view.height = h;
        view.fx = view.fy = fx;
        view.cx = w / 2.0;
        view.cy = h / 2.0;
        view.rot_wc = poses[i].rot_wc;
        view.t_wc = poses[i].t_wc;
        render_ground_truth(scene, view, &instance_maps[i], cfg.synth.depth_noise,
                            cfg.synth.seed ^ (i * 0x9E3779B97F4A7C15ull));
    });
    return views;
}

Scene initialize_scene(const RunConfig& cfg, const std::vector<CameraView>& views) {
    return cfg.init.mode == InitConfig::Mode::depth ? init_from_depth(views, cfg.init)
                                                    : init_sphere(views, cfg.init);
}

json instance_json(const std::vector<PlaneInstance>& instances) {
    json arr = json::array();
    for (const PlaneInstance& inst : instances) {
        json ij;
        ij["id"] = inst.id;
        ij["members"] = inst.member_ids;
        ij["normal"] = {inst.normal.x(), inst.normal.y(), inst.normal.z()};
        ij["offset"] = inst.offset;
        ij["area"] = inst.area;
        arr.push_back(ij);
    }
    return arr;
}

}  // namespace

int cmd_synth(const RunConfig& cfg, const ConfigRegistry& reg, std::ostream& out) {
    if (cfg.run.out.empty()) throw std::invalid_argument("synth: run.out must be set");
    const SyntheticScene scene =
        generate_box_room(cfg.synth.room_width, cfg.synth.room_depth, cfg.synth.room_height,
                          int(cfg.synth.boxes), cfg.synth.seed);
    SyntheticScene with_poses = scene;
    with_poses.trajectory = sample_trajectory(scene, int(cfg.synth.views), cfg.synth.seed);

    std::vector<std::vector<std::uint32_t>> instance_maps;
    const std::vector<CameraView> views = synth_views(cfg, with_poses, with_poses.trajectory,
                                                      instance_maps);
    SceneMeta meta;
    meta.scene_center = scene.center();
    meta.gt_faces = scene.faces;
    write_dataset(cfg.run.out, views, meta, &instance_maps);
    echo_config(cfg, reg);
    out << "synth: wrote " << scene.faces.size() << " ground-truth faces, " << views.size()
        << " views to " << cfg.run.out << "\n";
    return 0;
}

int cmd_optimize(const RunConfig& cfg, const ConfigRegistry& reg, std::ostream& out) {
    if (cfg.run.data.empty() || cfg.run.out.empty())
        throw std::invalid_argument("optimize: run.data and run.out must be set");
    echo_config(cfg, reg);
    const Dataset ds = load_dataset(cfg.run.data, int(cfg.io.stride));
    const std::uint64_t hash = reg.state_hash();

    std::unique_ptr<Optimizer> opt;
    if (cfg.run.resume) {
        if (cfg.run.checkpoint.empty())
            throw std::invalid_argument("optimize: resume requested without run.checkpoint");
        OptimState state = load_checkpoint(cfg.run.checkpoint, hash);
        out << "optimize: resuming at iteration " << state.iteration << " with "
            << state.scene.primitives.size() << " primitives\n";
        opt = std::make_unique<Optimizer>(std::move(state), ds.views, cfg.optimizer,
                                          cfg.render_config(), cfg.splat);
    } else {
        Scene scene = initialize_scene(cfg, ds.views);
        out << "optimize: initialized " << scene.primitives.size() << " primitives ("
            << (cfg.init.mode == InitConfig::Mode::depth ? "depth" : "sphere") << " mode)\n";
        opt = std::make_unique<Optimizer>(std::move(scene), ds.views, cfg.optimizer,
                                          cfg.render_config(), cfg.splat);
    }

    const std::vector<LossLogRow> log = opt->run();

    const Vec3 scene_center = ds.has_meta ? ds.meta.scene_center : [&] {
        Vec3 c = Vec3::Zero();
        for (const PlanePrimitive& p : opt->scene().primitives) c += p.center;
        return Vec3(c / double(opt->scene().primitives.size()));
    }();
    const std::vector<PlaneInstance> instances =
        merge_planes(opt->scene(), scene_center, cfg.optimizer);

    const fs::path out_dir(cfg.run.out);
    save_checkpoint(out_dir / "checkpoint.psck", opt->state(), hash);
    write_loss_log_csv(out_dir / "loss_log.csv", log);
    export_instances_ply(out_dir / "instances.ply", opt->scene(), instances, cfg.io.ply_binary,
                         cfg.io.ply_project);
    {
        json j;
        j["instances"] = instance_json(instances);
        j["primitives"] = opt->scene().primitives.size();
        j["iterations"] = opt->iteration();
        std::ofstream jf(out_dir / "instances.json");
        jf << j.dump(2) << '\n';
    }

    out << "optimize: " << opt->iteration() << " iterations, "
        << opt->scene().primitives.size() << " primitives, " << instances.size()
        << " instances";
    if (!log.empty()) out << ", final loss " << log.back().loss;
    out << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const ConfigRegistry& reg, std::ostream& out) {
    if (cfg.run.data.empty() || cfg.run.out.empty())
        throw std::invalid_argument("eval: run.data and run.out must be set");
    const Dataset ds = load_dataset(cfg.run.data, int(cfg.io.stride));
    if (!ds.has_meta || ds.meta.gt_faces.empty())
        throw std::runtime_error("eval: dataset has no ground-truth plane list in meta.json");

    const SampledSurface gt =
        sample_rects(rects_from_faces(ds.meta.gt_faces), cfg.metrics.sample_density,
                     cfg.metrics.seed);

    SampledSurface pred;
    std::size_t n_instances = 0;
    if (cfg.run.eval_gt_self) {
        pred = gt;
        n_instances = ds.meta.gt_faces.size();
    } else {
        if (cfg.run.checkpoint.empty())
            throw std::invalid_argument("eval: run.checkpoint must be set (or run.eval_gt_self)");
        const OptimState state = load_checkpoint(cfg.run.checkpoint, reg.state_hash());
        const std::vector<PlaneInstance> instances =
            merge_planes(state.scene, ds.meta.scene_center, cfg.optimizer);
        n_instances = instances.size();
        pred = sample_rects(rects_from_instances(state.scene, instances),
                            cfg.metrics.sample_density, cfg.metrics.seed ^ 0xABCDu);
    }

    const ChamferResult geo = chamfer_fscore(pred, gt, cfg.metrics.fscore_tau);
    const std::vector<std::int32_t> transferred =
        transfer_labels(pred, gt, cfg.metrics.fscore_tau);
    const SegmentationResult seg = segmentation_metrics(transferred, gt.labels);
    const PlanarResult planar = planar_metrics(pred, gt, cfg.metrics);

    json j;
    j["constants"] = {{"fscore_tau", cfg.metrics.fscore_tau},
                      {"density", cfg.metrics.sample_density},
                      {"top_k", cfg.metrics.planar_top_k},
                      {"unmatched_penalty", cfg.metrics.unmatched_penalty},
                      {"merge_normal_deg", cfg.optimizer.merge_normal_deg},
                      {"merge_offset", cfg.optimizer.merge_offset},
                      {"merge_adjacency", cfg.optimizer.merge_adjacency},
                      {"seed", cfg.metrics.seed}};
    j["geometry"] = {{"chamfer_m", geo.chamfer},         {"chamfer_cm", 100.0 * geo.chamfer},
                     {"fscore", geo.fscore},             {"precision", geo.precision},
                     {"recall", geo.recall}};
    j["segmentation"] = {{"voi", seg.voi}, {"ri", seg.ri}, {"sc", seg.sc}};
    j["planar"] = {{"fidelity_m", planar.fidelity},
                   {"accuracy_m", planar.accuracy},
                   {"chamfer_m", planar.chamfer},
                   {"matched", planar.matched},
                   {"evaluated", planar.evaluated}};
    j["instances"] = n_instances;

    fs::create_directories(cfg.run.out);
    {
        std::ofstream jf(fs::path(cfg.run.out) / "report.json");
        jf << j.dump(2) << '\n';
    }
    echo_config(cfg, reg);

    out << "eval (tau " << cfg.metrics.fscore_tau << " m, density "
        << cfg.metrics.sample_density << " /m^2, top-" << cfg.metrics.planar_top_k
        << ", penalty " << cfg.metrics.unmatched_penalty << " m)\n"
        << "  chamfer       " << 100.0 * geo.chamfer << " cm\n"
        << "  f-score       " << geo.fscore << " %\n"
        << "  VOI / RI / SC " << seg.voi << " / " << seg.ri << " / " << seg.sc << "\n"
        << "  planar fid/acc/chamfer " << 100.0 * planar.fidelity << " / "
        << 100.0 * planar.accuracy << " / " << 100.0 * planar.chamfer << " cm ("
        << planar.matched << "/" << planar.evaluated << " matched)\n";
    return 0;
}

int cmd_render(const RunConfig& cfg, const ConfigRegistry& reg, std::ostream& out) {
    if (cfg.run.data.empty() || cfg.run.out.empty() || cfg.run.checkpoint.empty())
        throw std::invalid_argument("render: run.data, run.out and run.checkpoint must be set");
    const Dataset ds = load_dataset(cfg.run.data, int(cfg.io.stride));
    const OptimState state = load_checkpoint(cfg.run.checkpoint, reg.state_hash());

    const CameraView* view = nullptr;
    for (const CameraView& v : ds.views)
        if (v.id == cfg.run.view_id) view = &v;
    if (!view)
        throw std::invalid_argument("render: view id " + std::to_string(cfg.run.view_id) +
                                    " not in dataset");

    const double lambda = cfg.run.lambda_override > 0
                              ? cfg.run.lambda_override
                              : lambda_schedule(state.iteration, cfg.splat);
    const Renderer renderer(cfg.render_config());
    const ForwardResult fwd = renderer.render_view(*view, state.scene, lambda);

    const fs::path out_dir(cfg.run.out);
    write_rendered_maps(out_dir, "view" + std::to_string(view->id), fwd.maps);
    write_preview_pgm(out_dir / ("view" + std::to_string(view->id) + "_depth.pgm"),
                      fwd.maps.depth, fwd.maps.width, fwd.maps.height);
    write_normal_preview_ppm(out_dir / ("view" + std::to_string(view->id) + "_normal.ppm"),
                             fwd.maps.normal, fwd.maps.width, fwd.maps.height);
    echo_config(cfg, reg);
    out << "render: view " << view->id << " at lambda " << lambda << " -> " << cfg.run.out
        << "\n";
    return 0;
}

int cmd_convert_depth(const std::string& input_png, const std::string& output_f32, double scale,
                      std::ostream& out) {
    const MapF32 map = read_depth_png(input_png, scale);
    write_map_f32(output_f32, map.width, map.height, 1, map.data.data());
    out << "convert-depth: " << input_png << " (" << map.width << "x" << map.height << ") -> "
        << output_f32 << "\n";
    return 0;
}

}  // namespace psplat

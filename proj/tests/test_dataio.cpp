#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "psplat/dataio.hpp"
#include "psplat/scene_init.hpp"
#include "support/test_scenes.hpp"

#include <filesystem>
#include <fstream>

using namespace psplat;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("psplat_test_" + std::to_string(std::uint64_t(::getpid())) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

std::vector<CameraView> tiny_dataset_views(int n_views) {
    const SyntheticScene scene = generate_box_room(4, 4, 3, 1, 13);
    auto poses = sample_trajectory(scene, 35, 13);  // coverage needs 3 views per face
    poses.resize(std::size_t(n_views));
    std::vector<CameraView> views;
    for (std::size_t i = 0; i < poses.size(); ++i) {
        CameraView view = testing::make_view(16, 12, 10.0);
        view.id = int(i);
        view.rot_wc = poses[i].rot_wc;
        view.t_wc = poses[i].t_wc;
        render_ground_truth(scene, view);
        views.push_back(view);
    }
    return views;
}

std::vector<char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("binary maps: round trip is bitwise exact") {
    TempDir dir;
    std::vector<float> data = {0.5f, -1.25f, 3.75f, 1e-20f, 1e20f, 0.0f};
    write_map_f32(dir.path / "m.f32", 3, 2, 1, data.data());
    const MapF32 map = read_map_f32(dir.path / "m.f32", 1);
    CHECK(map.width == 3);
    CHECK(map.height == 2);
    CHECK(map.data == data);

    std::vector<std::uint32_t> ids = {0, 1, 0xFFFFFFFFu, 42};
    write_map_u32(dir.path / "i.u32", 2, 2, ids.data());
    CHECK(read_map_u32(dir.path / "i.u32").data == ids);
}

TEST_CASE("binary maps: truncated payload is rejected with the path in the message") {
    TempDir dir;
    std::vector<float> data(12, 1.0f);
    const fs::path p = dir.path / "trunc.f32";
    write_map_f32(p, 4, 3, 1, data.data());
    fs::resize_file(p, fs::file_size(p) - 5);
    try {
        read_map_f32(p, 1);
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("trunc.f32") != std::string::npos);
    }
}

TEST_CASE("binary maps: wrong magic and wrong channel count are rejected") {
    TempDir dir;
    {
        std::ofstream out(dir.path / "bad.f32", std::ios::binary);
        out << "NOPE" << std::string(12, '\0');
    }
    CHECK_THROWS(read_map_f32(dir.path / "bad.f32", 1));

    std::vector<float> data(6, 0.0f);
    write_map_f32(dir.path / "one.f32", 3, 2, 1, data.data());
    CHECK_THROWS(read_map_f32(dir.path / "one.f32", 3));  // payload length mismatch
}

TEST_CASE("dataset: write -> load round trip preserves maps bitwise") {
    TempDir dir;
    const auto views = tiny_dataset_views(4);
    SceneMeta meta;
    meta.scene_center = Vec3(2, 2, 1.5);
    write_dataset(dir.path, views, meta);

    const Dataset ds = load_dataset(dir.path);
    REQUIRE(ds.views.size() == views.size());
    for (std::size_t i = 0; i < views.size(); ++i) {
        CHECK(ds.views[i].target_depth == views[i].target_depth);
        CHECK(ds.views[i].target_normal == views[i].target_normal);
        CHECK(ds.views[i].fx == views[i].fx);
        CHECK((ds.views[i].rot_wc - views[i].rot_wc).norm() == 0.0);
        CHECK(ds.views[i].t_wc == views[i].t_wc);
    }
    CHECK(ds.has_meta);
    CHECK(ds.meta.scene_center == Vec3(2, 2, 1.5));
}

TEST_CASE("dataset: stride subsampling") {
    TempDir dir;
    const auto views = tiny_dataset_views(8);
    write_dataset(dir.path, views, SceneMeta{});
    CHECK(load_dataset(dir.path, 2).views.size() == 4);
    CHECK(load_dataset(dir.path, 8).views.size() == 1);
    CHECK_THROWS(load_dataset(dir.path, 0));
}

TEST_CASE("dataset: missing files and malformed lines are reported by path") {
    TempDir dir;
    const auto views = tiny_dataset_views(2);
    write_dataset(dir.path, views, SceneMeta{});
    fs::remove(dir.path / "normal" / "1.f32");
    CHECK_THROWS(load_dataset(dir.path));

    std::ofstream(dir.path / "cameras.txt") << "0 bad line\n";
    CHECK_THROWS(load_dataset(dir.path));
}

TEST_CASE("dataset: gt face metadata round trips") {
    TempDir dir;
    const SyntheticScene scene = generate_box_room(4, 4, 3, 2, 21);
    SceneMeta meta;
    meta.scene_center = scene.center();
    meta.gt_faces = scene.faces;
    write_dataset(dir.path, tiny_dataset_views(2), meta);
    const Dataset ds = load_dataset(dir.path);
    REQUIRE(ds.meta.gt_faces.size() == scene.faces.size());
    for (std::size_t i = 0; i < scene.faces.size(); ++i) {
        CHECK(ds.meta.gt_faces[i].center == scene.faces[i].center);
        CHECK(ds.meta.gt_faces[i].half_u == scene.faces[i].half_u);
        CHECK((ds.meta.gt_faces[i].normal - scene.faces[i].normal).norm() < 1e-15);
    }
}

TEST_CASE("checkpoint: save -> load -> save produces identical bytes") {
    TempDir dir;
    OptimState state;
    state.scene = testing::random_scene(4, 12);
    state.iteration = 1234;
    state.adam.assign(12, AdamState{});
    state.adam[3].m[5] = 0.125;
    state.adam[3].v[5] = 1e-9;
    state.adam[3].step = 77;
    state.radii_grad_sum.assign(12, Vec4::Zero());
    state.radii_grad_sum[2] = Vec4(0.1, 0.2, 0.3, 0.4);
    state.radii_grad_count.assign(12, 41);

    const fs::path p1 = dir.path / "a.psck";
    const fs::path p2 = dir.path / "b.psck";
    save_checkpoint(p1, state, 0xDEADBEEFull);
    const OptimState loaded = load_checkpoint(p1, 0xDEADBEEFull);
    save_checkpoint(p2, loaded, 0xDEADBEEFull);
    CHECK(read_bytes(p1) == read_bytes(p2));
    CHECK(loaded.iteration == 1234);
    CHECK(loaded.adam[3].step == 77);
    CHECK(loaded.scene.primitives[5].center == state.scene.primitives[5].center);
}

TEST_CASE("checkpoint: config hash mismatch refuses to load") {
    TempDir dir;
    OptimState state;
    state.scene = testing::random_scene(4, 2);
    state.adam.assign(2, AdamState{});
    state.radii_grad_sum.assign(2, Vec4::Zero());
    state.radii_grad_count.assign(2, 0);
    save_checkpoint(dir.path / "c.psck", state, 111);
    CHECK(peek_checkpoint_hash(dir.path / "c.psck") == 111);
    CHECK_THROWS(load_checkpoint(dir.path / "c.psck", 222));
}

TEST_CASE("ply export: vertex counts, corner identities, instance colors") {
    TempDir dir;
    Scene scene;
    PlanePrimitive p0;
    p0.center = Vec3(1, 2, 3);
    p0.rotation = Quat(1, 0, 0, 0);
    p0.radii = Vec4(0.5, 0.25, 1.0, 0.75);
    p0.id = 0;
    PlanePrimitive p1 = p0;
    p1.center = Vec3(1.9, 2, 3);
    p1.id = 1;
    PlanePrimitive p2 = p0;
    p2.center = Vec3(10, 0, 0);
    p2.id = 2;
    scene.primitives = {p0, p1, p2};
    scene.next_id = 3;

    const auto instances = merge_planes(scene, Vec3::Zero(), OptimConfig{});
    REQUIRE(instances.size() == 2);
    export_instances_ply(dir.path / "out.ply", scene, instances);

    std::ifstream in(dir.path / "out.ply");
    std::string line;
    int vertex_count = 0, face_count = 0;
    std::vector<std::array<double, 6>> vertices;
    while (std::getline(in, line)) {
        if (line.rfind("element vertex", 0) == 0) vertex_count = std::stoi(line.substr(15));
        if (line.rfind("element face", 0) == 0) face_count = std::stoi(line.substr(13));
        if (line == "end_header") break;
    }
    CHECK(vertex_count == 12);
    CHECK(face_count == 6);
    for (int i = 0; i < vertex_count; ++i) {
        std::getline(in, line);
        std::istringstream ls(line);
        std::array<double, 6> v;
        for (double& x : v) ls >> x;
        vertices.push_back(v);
    }
    // First primitive's first corner: center + r_x+ * v_x + r_y+ * v_y.
    CHECK(vertices[0][0] == doctest::Approx(1.5).epsilon(1e-6));
    CHECK(vertices[0][1] == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(vertices[0][2] == doctest::Approx(3.0).epsilon(1e-6));
    // Members of one instance share a color; the isolated primitive differs.
    CHECK(vertices[0][3] == vertices[4][3]);
    CHECK(vertices[0][4] == vertices[4][4]);
    const bool different = vertices[0][3] != vertices[8][3] || vertices[0][4] != vertices[8][4] ||
                           vertices[0][5] != vertices[8][5];
    CHECK(different);
}

TEST_CASE("loss log: csv layout") {
    TempDir dir;
    write_loss_log_csv(dir.path / "log.csv", {{0, 1.5, 7.35, 100}, {1, 1.25, 7.4, 101}});
    std::ifstream in(dir.path / "log.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "iteration,loss,lambda,primitives");
    std::getline(in, line);
    CHECK(line.rfind("0,1.5,", 0) == 0);
}

#include "psplat/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <variant>

namespace psplat {

namespace {

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "on") return true;
    if (s == "false" || s == "0" || s == "off") return false;
    throw std::invalid_argument("expected a boolean, got '" + s + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

ConfigRegistry::ConfigRegistry(RunConfig& cfg) {
    auto add = [this](const std::string& key, auto* ptr) { entries_[key] = Entry{ptr}; };

    add("splat.lambda_base", &cfg.splat.lambda_base);
    add("splat.lambda_rate", &cfg.splat.lambda_rate);
    add("splat.lambda_max", &cfg.splat.lambda_max);
    add("splat.weight_floor", &cfg.splat.weight_floor);

    add("renderer.max_records", &cfg.renderer.max_records);
    add("renderer.t_near", &cfg.renderer.t_near);
    add("renderer.parallel_eps", &cfg.renderer.parallel_eps);
    add("renderer.alpha_floor", &cfg.renderer.alpha_floor);
    add("renderer.normalize_by_alpha", &cfg.renderer.normalize_by_alpha);
    add("renderer.alpha1", &cfg.renderer.alpha1);
    add("renderer.alpha2", &cfg.renderer.alpha2);
    add("renderer.tile_size", &cfg.renderer.tile_size);
    add("renderer.threads", &cfg.renderer.threads);

    add("optimizer.iterations", &cfg.optimizer.iterations);
    add("optimizer.lr_center", &cfg.optimizer.lr_center);
    add("optimizer.lr_radii", &cfg.optimizer.lr_radii);
    add("optimizer.lr_rotation", &cfg.optimizer.lr_rotation);
    add("optimizer.beta1", &cfg.optimizer.beta1);
    add("optimizer.beta2", &cfg.optimizer.beta2);
    add("optimizer.eps", &cfg.optimizer.eps);
    add("optimizer.split_interval", &cfg.optimizer.split_interval);
    add("optimizer.split_grad_threshold", &cfg.optimizer.split_grad_threshold);
    add("optimizer.enable_split", &cfg.optimizer.enable_split);
    add("optimizer.single_radii", &cfg.optimizer.single_radii);
    add("optimizer.merge_normal_deg", &cfg.optimizer.merge_normal_deg);
    add("optimizer.merge_offset", &cfg.optimizer.merge_offset);
    add("optimizer.merge_adjacency", &cfg.optimizer.merge_adjacency);
    add("optimizer.merge_use_adjacency", &cfg.optimizer.merge_use_adjacency);
    add("optimizer.views_per_step", &cfg.optimizer.views_per_step);
    add("optimizer.seed", &cfg.optimizer.seed);
    add("optimizer.radii_floor", &cfg.optimizer.radii_floor);

    add("init.mode", &cfg.init.mode);
    add("init.n_primitives", &cfg.init.n_primitives);
    add("init.radius_scale", &cfg.init.radius_scale);
    add("init.sphere_radius", &cfg.init.sphere_radius_value);
    add("init.seed", &cfg.init.seed);

    add("metrics.fscore_tau", &cfg.metrics.fscore_tau);
    add("metrics.density", &cfg.metrics.sample_density);
    add("metrics.top_k", &cfg.metrics.planar_top_k);
    add("metrics.unmatched_penalty", &cfg.metrics.unmatched_penalty);
    add("metrics.seed", &cfg.metrics.seed);

    add("synth.room_width", &cfg.synth.room_width);
    add("synth.room_depth", &cfg.synth.room_depth);
    add("synth.room_height", &cfg.synth.room_height);
    add("synth.boxes", &cfg.synth.boxes);
    add("synth.views", &cfg.synth.views);
    add("synth.seed", &cfg.synth.seed);
    add("synth.image_width", &cfg.synth.image_width);
    add("synth.image_height", &cfg.synth.image_height);
    add("synth.hfov_deg", &cfg.synth.hfov_deg);
    add("synth.depth_noise", &cfg.synth.depth_noise);

    add("io.stride", &cfg.io.stride);
    add("io.ply_binary", &cfg.io.ply_binary);
    add("io.ply_project", &cfg.io.ply_project);

    add("run.data", &cfg.run.data);
    add("run.out", &cfg.run.out);
    add("run.checkpoint", &cfg.run.checkpoint);
    add("run.view_id", &cfg.run.view_id);
    add("run.lambda_override", &cfg.run.lambda_override);
    add("run.resume", &cfg.run.resume);
    add("run.eval_gt_self", &cfg.run.eval_gt_self);
}

void ConfigRegistry::set(const std::string& key, const std::string& value) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
    try {
        std::visit(
            [&](auto* ptr) {
                using T = std::remove_pointer_t<decltype(ptr)>;
                if constexpr (std::is_same_v<T, double>) {
                    *ptr = std::stod(value);
                } else if constexpr (std::is_same_v<T, std::int64_t>) {
                    *ptr = std::stoll(value);
                } else if constexpr (std::is_same_v<T, int>) {
                    *ptr = int(std::stol(value));
                } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                    *ptr = std::stoull(value);
                } else if constexpr (std::is_same_v<T, bool>) {
                    *ptr = parse_bool(value);
                } else if constexpr (std::is_same_v<T, std::string>) {
                    *ptr = value;
                } else {
                    if (value == "depth") {
                        *ptr = InitConfig::Mode::depth;
                    } else if (value == "sphere") {
                        *ptr = InitConfig::Mode::sphere;
                    } else {
                        throw std::invalid_argument("expected depth|sphere, got '" + value + "'");
                    }
                }
            },
            it->second.target);
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("bad value '" + value + "' for config key '" + key + "'");
    }
}

std::string ConfigRegistry::get(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
    return std::visit(
        [](auto* ptr) -> std::string {
            using T = std::remove_pointer_t<decltype(ptr)>;
            if constexpr (std::is_same_v<T, double>) {
                return format_double(*ptr);
            } else if constexpr (std::is_same_v<T, bool>) {
                return *ptr ? "true" : "false";
            } else if constexpr (std::is_same_v<T, std::string>) {
                return *ptr;
            } else if constexpr (std::is_same_v<T, InitConfig::Mode>) {
                return *ptr == InitConfig::Mode::depth ? "depth" : "sphere";
            } else {
                return std::to_string(*ptr);
            }
        },
        it->second.target);
}

bool ConfigRegistry::has(const std::string& key) const { return entries_.count(key) != 0; }

std::vector<std::string> ConfigRegistry::keys() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [key, entry] : entries_) out.push_back(key);
    return out;
}

void ConfigRegistry::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot open config file");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected 'key = value'");
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void ConfigRegistry::apply_env() {
    for (const auto& [key, entry] : entries_) {
        std::string env_name = "PSPLAT_";
        for (char c : key) env_name += c == '.' ? '_' : char(std::toupper(c));
        if (const char* value = std::getenv(env_name.c_str())) set(key, value);
    }
}

std::string ConfigRegistry::echo() const {
    std::string out;
    for (const auto& [key, entry] : entries_) {
        out += key;
        out += " = ";
        out += get(key);
        out += '\n';
    }
    return out;
}

void ConfigRegistry::write_echo(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": cannot write config echo");
    out << echo();
}

std::uint64_t ConfigRegistry::state_hash() const {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    auto feed = [&hash](const std::string& s) {
        for (unsigned char c : s) {
            hash ^= c;
            hash *= 0x100000001b3ull;
        }
    };
    for (const auto& [key, entry] : entries_) {
        const bool relevant = key.rfind("splat.", 0) == 0 || key.rfind("optimizer.", 0) == 0 ||
                              key.rfind("init.", 0) == 0 ||
                              (key.rfind("renderer.", 0) == 0 && key != "renderer.threads");
        if (!relevant) continue;
        feed(key);
        feed("=");
        feed(get(key));
        feed("\n");
    }
    return hash;
}

}  // namespace psplat

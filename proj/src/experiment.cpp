#include "sctx/experiment.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <chrono>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <filesystem>
#include <functional>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "sctx/context_store.hpp"
#include "sctx/rng.hpp"
#include "sctx/service.hpp"

namespace sctx {

namespace fs = std::filesystem;

const char* to_string(Scenario scenario) {
    switch (scenario) {
        case Scenario::Single: return "single";
        case Scenario::Multi: return "multi";
        case Scenario::Guided: return "guided";
        case Scenario::Full: return "full";
        case Scenario::Baseline: return "baseline";
    }
    return "unknown";
}

Scenario parse_scenario(const std::string& name) {
    for (Scenario s : kAllScenarios)
        if (name == to_string(s)) return s;
    throw InvalidArgument("unknown scenario '" + name +
                          "' (expected single, multi, guided, full or baseline)");
}

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out = "invalid experiment config:";
    for (const auto& l : lines) out += "\n  " + l;
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    return out;
}

std::vector<double> parse_numbers(const std::string& text) {
    std::istringstream in(text);
    std::vector<double> v;
    for (std::string tok; in >> tok;) {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw InvalidArgument("not a number: " + tok);
    }
    return v;
}

template <typename T>
T parse_value(const std::string& text);

template <>
int parse_value<int>(const std::string& text) {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size() || v < INT32_MIN || v > INT32_MAX) throw InvalidArgument("not an integer");
    return int(v);
}

template <>
std::uint64_t parse_value<std::uint64_t>(const std::string& text) {
    std::size_t used = 0;
    if (!text.empty() && text[0] == '-') throw InvalidArgument("must not be negative");
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw InvalidArgument("not an unsigned integer");
    return v;
}

template <>
double parse_value<double>(const std::string& text) {
    const auto v = parse_numbers(text);
    if (v.size() != 1) throw InvalidArgument("expected one number");
    return v[0];
}

template <>
bool parse_value<bool>(const std::string& text) {
    if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "off" || text == "no") return false;
    throw InvalidArgument("expected true or false");
}

double horizontal_distance(const Box& box, const Vec3d& p) {
    const double dx = std::max({box.min.x() - p.x(), 0.0, p.x() - box.max.x()});
    const double dy = std::max({box.min.y() - p.y(), 0.0, p.y() - box.max.y()});
    return std::hypot(dx, dy);
}

ScenarioParams base_params(const ExperimentConfig& config, const Placement& placement) {
    ScenarioParams p;
    p.anchor = placement.anchor;
    p.frame_count = config.frame_count;
    p.frame_rate = config.frame_rate;
    p.seed = placement.seed;
    p.user_id = 0;
    return p;
}

/// User 0 of the formation; identical to gen_multi_user's first user.
ScenarioParams first_user(const ExperimentConfig& config, const Placement& placement) {
    ScenarioParams p = base_params(config, placement);
    const double az = deg_to_rad(placement.formation_azimuth_deg);
    p.user_position =
        placement.anchor.head<2>() + config.formation_radius * Eigen::Vector2d(std::cos(az), std::sin(az));
    return p;
}

bool formation_fits(const SceneSpec& scene, const ExperimentConfig& config, Placement& placement) {
    try {
        gen_multi_user(scene, base_params(config, placement), config.n_users,
                       config.formation_radius, placement.formation_azimuth_deg);
        gen_guided(scene, first_user(config, placement));
        return true;
    } catch (const InvalidArgument&) {
        return false;
    }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : InvalidArgument(join_lines(problems)), problems_(std::move(problems)) {}

void ExperimentConfig::validate() const {
    std::vector<std::string> bad;
    auto require = [&](bool ok, const char* field, const std::string& what) {
        if (!ok) bad.push_back(std::string(field) + ": " + what);
    };
    require(!scenarios.empty(), "scenarios", "at least one scenario is required");
    require(std::set<Scenario>(scenarios.begin(), scenarios.end()).size() == scenarios.size(),
            "scenarios", "duplicate scenario");
    require(n_users >= 2, "users", "needs at least 2 users");
    require(formation_radius >= 0.8 && formation_radius <= 2.0, "formation_radius",
            "must be within 0.8-2.0 m");
    require(!placements.empty() || placement_count >= 1, "placement_count", "must be positive");
    require(probe_height > 0, "probe_height", "must be positive");
    require(placement_clearance >= 0, "placement_clearance", "must not be negative");
    require(frame_count >= 2, "frames", "must be at least 2");
    require(frame_rate > 0, "frame_rate", "must be positive");
    require(full_rig_poses >= 1, "full_rig_poses", "must be positive");
    require(map_width >= 2 && map_width % 2 == 0, "map_width", "must be even and at least 2");
    require(camera_width > 0, "camera_width", "must be positive");
    require(camera_height > 0, "camera_height", "must be positive");
    require(camera_hfov_deg > 0 && camera_hfov_deg < 180, "camera_hfov_deg", "must be within (0, 180)");
    require(voxel_size > 0 && std::isfinite(voxel_size), "voxel_size", "must be positive");
    require(noise_sigma >= 0, "noise_sigma", "must not be negative");
    require((hole_color.array() >= 0).all() && (hole_color.array() <= 1).all(), "hole_color",
            "channels must be within [0, 1]");
    require(!out_dir.empty(), "out", "must not be empty");
    if (!bad.empty()) throw ConfigError(std::move(bad));
}

CameraIntrinsics ExperimentConfig::camera() const {
    return CameraIntrinsics::from_hfov(camera_width, camera_height, camera_hfov_deg);
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError({std::string("syntax: ") + e.what()});
    }

    ExperimentConfig c;
    std::vector<std::string> bad;
    for (const auto& [section, body] : tree) {
        if (section != "experiment") {
            bad.push_back(section + ": unknown section");
            continue;
        }
        for (const auto& [key, node] : body) {
            const std::string value = trim(node.data());
            try {
                if (key == "scene") c.scene_path = value;
                else if (key == "scenarios") {
                    c.scenarios.clear();
                    for (const auto& name : split(value, ',')) c.scenarios.push_back(parse_scenario(name));
                } else if (key == "users") c.n_users = parse_value<int>(value);
                else if (key == "formation_radius") c.formation_radius = parse_value<double>(value);
                else if (key == "placements") {
                    c.placements.clear();
                    for (const auto& item : split(value, ';')) {
                        const auto v = parse_numbers(item);
                        if (v.size() != 3) throw InvalidArgument("each placement needs x y z");
                        c.placements.emplace_back(v[0], v[1], v[2]);
                    }
                } else if (key == "placement_count") c.placement_count = parse_value<int>(value);
                else if (key == "probe_height") c.probe_height = parse_value<double>(value);
                else if (key == "placement_clearance") c.placement_clearance = parse_value<double>(value);
                else if (key == "frames") c.frame_count = parse_value<int>(value);
                else if (key == "frame_rate") c.frame_rate = parse_value<double>(value);
                else if (key == "full_rig_poses") c.full_rig_poses = parse_value<int>(value);
                else if (key == "map_width") c.map_width = parse_value<int>(value);
                else if (key == "camera_width") c.camera_width = parse_value<int>(value);
                else if (key == "camera_height") c.camera_height = parse_value<int>(value);
                else if (key == "camera_hfov_deg") c.camera_hfov_deg = parse_value<double>(value);
                else if (key == "voxel_size") c.voxel_size = float(parse_value<double>(value));
                else if (key == "seed") c.seed = parse_value<std::uint64_t>(value);
                else if (key == "noise") c.noise = parse_value<bool>(value);
                else if (key == "noise_sigma") c.noise_sigma = parse_value<double>(value);
                else if (key == "hole_color") {
                    const auto v = parse_numbers(value);
                    if (v.size() != 3) throw InvalidArgument("expected r g b");
                    c.hole_color = Vec3f(float(v[0]), float(v[1]), float(v[2]));
                } else if (key == "out") c.out_dir = value;
                else if (key == "images") c.write_images = parse_value<bool>(value);
                else bad.push_back(key + ": unknown key");
            } catch (const std::exception& e) {
                bad.push_back(key + ": " + e.what());
            }
        }
    }
    if (!bad.empty()) throw ConfigError(std::move(bad));
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open experiment config '" + path + "'");
    return parse(in);
}

void ExperimentConfig::write(std::ostream& out) const {
    std::string names;
    for (Scenario s : scenarios) names += (names.empty() ? "" : ",") + std::string(to_string(s));
    std::string anchors;
    for (const auto& p : placements)
        anchors += fmt::format("{}{} {} {}", anchors.empty() ? "" : "; ", p.x(), p.y(), p.z());
    fmt::print(out, "[experiment]\n");
    if (!scene_path.empty()) fmt::print(out, "scene = {}\n", scene_path);
    fmt::print(out, "scenarios = {}\n", names);
    fmt::print(out, "users = {}\nformation_radius = {}\n", n_users, formation_radius);
    if (!anchors.empty()) fmt::print(out, "placements = {}\n", anchors);
    fmt::print(out, "placement_count = {}\nprobe_height = {}\nplacement_clearance = {}\n",
               placement_count, probe_height, placement_clearance);
    fmt::print(out, "frames = {}\nframe_rate = {}\nfull_rig_poses = {}\nmap_width = {}\n",
               frame_count, frame_rate, full_rig_poses, map_width);
    fmt::print(out, "camera_width = {}\ncamera_height = {}\ncamera_hfov_deg = {}\n", camera_width,
               camera_height, camera_hfov_deg);
    fmt::print(out, "voxel_size = {}\nseed = {}\nnoise = {}\nnoise_sigma = {}\n", voxel_size, seed,
               noise ? "true" : "false", noise_sigma);
    fmt::print(out, "hole_color = {} {} {}\nout = {}\nimages = {}\n", hole_color.x(),
               hole_color.y(), hole_color.z(), out_dir, write_images ? "true" : "false");
}

std::vector<Placement> sample_placements(const SceneSpec& scene, const ExperimentConfig& config) {
    std::vector<Placement> out;
    constexpr std::uint64_t kPlacementStream = 0x504c4143;
    Rng rng(derive_seed(config.seed, kPlacementStream));
    auto seed_for = [&](std::size_t i) { return derive_seed(config.seed, 1000 + i); };

    if (!config.placements.empty()) {
        for (std::size_t i = 0; i < config.placements.size(); ++i) {
            Placement p{config.placements[i], 0.0, seed_for(i)};
            if (!scene.free_space(p.anchor))
                throw ConfigError({fmt::format("placements[{}]: anchor is not in free space", i)});
            bool ok = false;
            for (int step = 0; step < 72 && !ok; ++step) {
                p.formation_azimuth_deg = 5.0 * step;
                ok = formation_fits(scene, config, p);
            }
            if (!ok)
                throw ConfigError(
                    {fmt::format("placements[{}]: no user formation fits around the anchor", i)});
            out.push_back(p);
        }
        return out;
    }

    const Box& room = scene.room;
    const double c = config.placement_clearance;
    const double z = room.min.z() + config.probe_height;
    constexpr int kMaxAttempts = 100000;
    for (int attempt = 0; attempt < kMaxAttempts && int(out.size()) < config.placement_count;
         ++attempt) {
        const Vec3d anchor(rng.uniform(room.min.x() + c, room.max.x() - c),
                           rng.uniform(room.min.y() + c, room.max.y() - c), z);
        const double start = rng.uniform(0.0, 360.0);
        if (!scene.free_space(anchor)) continue;
        bool clear = true;
        for (const auto& o : scene.obstacles) clear = clear && horizontal_distance(o.box, anchor) >= c;
        if (!clear) continue;
        Placement p{anchor, 0.0, seed_for(out.size())};
        bool ok = false;
        for (int step = 0; step < 12 && !ok; ++step) {
            p.formation_azimuth_deg = std::fmod(start + 30.0 * step, 360.0);
            ok = formation_fits(scene, config, p);
        }
        if (ok) out.push_back(p);
    }
    if (int(out.size()) < config.placement_count)
        throw ConfigError({fmt::format("placement_count: only {} of {} placements fit the scene",
                                       out.size(), config.placement_count)});
    return out;
}

void write_metrics_header(std::ostream& out) { out << kMetricsHeader << '\n'; }

void write_metrics_row(std::ostream& out, const MetricsRecord& r) {
    fmt::print(out, "{},{},{:.6f},{:.6f},{:.6f},{},{},{}\n", r.placement, r.frame, r.timestamp,
               r.psnr_db, r.coverage, r.memory_bytes, to_string(r.scenario), r.seed);
}

std::vector<MetricsRecord> read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != kMetricsHeader)
        throw InvalidArgument("metrics CSV: unexpected header");
    std::vector<MetricsRecord> out;
    for (int row = 2; std::getline(in, line); ++row) {
        if (trim(line).empty()) continue;
        const auto f = split(line, ',');
        try {
            if (f.size() != 8) throw InvalidArgument("expected 8 fields");
            MetricsRecord r;
            r.placement = parse_value<int>(f[0]);
            r.frame = parse_value<int>(f[1]);
            r.timestamp = parse_value<double>(f[2]);
            r.psnr_db = parse_value<double>(f[3]);
            r.coverage = parse_value<double>(f[4]);
            r.memory_bytes = parse_value<std::uint64_t>(f[5]);
            r.scenario = parse_scenario(f[6]);
            r.seed = parse_value<std::uint64_t>(f[7]);
            out.push_back(r);
        } catch (const std::exception& e) {
            throw InvalidArgument(fmt::format("metrics CSV row {}: {}", row, e.what()));
        }
    }
    return out;
}

std::vector<Trajectory> scenario_trajectories(const SceneSpec& scene,
                                              const ExperimentConfig& config,
                                              const Placement& placement, Scenario scenario) {
    switch (scenario) {
        case Scenario::Multi:
            return gen_multi_user(scene, base_params(config, placement), config.n_users,
                                  config.formation_radius, placement.formation_azimuth_deg);
        case Scenario::Single:
        case Scenario::Baseline:
            return {gen_look_around(scene, first_user(config, placement))};
        case Scenario::Guided:
            return {gen_guided(scene, first_user(config, placement))};
        case Scenario::Full:
            return {gen_full_rig(scene, placement.anchor, config.full_rig_poses, config.frame_rate, 0)};
    }
    throw InvalidArgument("unknown scenario");
}

PlacementResult run_placement(const SceneSpec& scene, const ExperimentConfig& config,
                              const Placement& placement, int placement_index, Scenario scenario,
                              const EnvMap& truth) {
    const auto trajectories = scenario_trajectories(scene, config, placement, scenario);
    const CameraIntrinsics k = config.camera();
    const EquirectGrid grid = config.grid();
    const StoreOptions options{config.voxel_size, true};

    auto render = [&](const Trajectory& t, std::size_t f) {
        RenderOptions o;
        o.timestamp = t.frames[f].timestamp;
        o.user_id = t.user_id;
        if (config.noise) {
            o.depth_noise = config.noise_sigma;
            o.noise_seed = derive_seed(placement.seed, (std::uint64_t(t.user_id) << 32) | f);
        }
        return render_frame(scene, t.frames[f].pose, k, o);
    };

    // Sessions publish through the in-memory transport; the baseline swaps in
    // a fresh store and connection every frame.
    std::unique_ptr<ContextStore> store;
    std::unique_ptr<InMemoryServer> server;
    std::vector<std::unique_ptr<Client>> clients;
    auto open_store = [&] {
        clients.clear();
        server.reset();
        store = std::make_unique<ContextStore>(options);
        server = std::make_unique<InMemoryServer>(*store);
        for (const auto& t : trajectories) {
            clients.push_back(std::make_unique<Client>(server->connect()));
            clients.back()->hello(t.user_id);
        }
    };
    open_store();

    PlacementResult result;
    const std::size_t frames = trajectories.front().size();
    for (std::size_t f = 0; f < frames; ++f) {
        if (scenario == Scenario::Baseline && f > 0) open_store();
        for (std::size_t u = 0; u < trajectories.size(); ++u)
            clients[u]->publish(render(trajectories[u], f));

        const auto [cloud, version] = store->shared_cloud();
        result.estimate = estimate_envmap(*cloud, placement.anchor, grid, config.hole_color);
        MetricsRecord r;
        r.placement = placement_index;
        r.frame = int(f);
        r.timestamp = trajectories.front().frames[f].timestamp;
        r.psnr_db = psnr(result.estimate, truth);
        r.coverage = coverage(result.estimate);
        r.memory_bytes = store->memory_usage();
        r.scenario = scenario;
        r.seed = config.seed;
        result.records.push_back(r);

        if (f + 1 == frames) {
            result.cloud_bytes = kEntryHeaderBytes + cloud_blob_size(cloud->size());
            result.observation_bytes = r.memory_bytes - result.cloud_bytes;
        }
    }
    result.reprojection = reprojection_error(result.estimate, truth);
    clients.clear();
    return result;
}

namespace {

void write_binary(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    body(out);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    auto seconds_since = [](std::chrono::steady_clock::time_point t) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
    };
    const SceneSpec scene = config.scene_path.empty() ? SceneSpec::default_scene()
                                                      : load_scene(config.scene_path);
    ExperimentResult result;
    result.placements = sample_placements(scene, config);

    const fs::path out = config.out_dir;
    fs::create_directories(out / "trajectories");
    if (config.write_images) fs::create_directories(out / "images");

    write_binary(out / "placements.csv", [&](std::ostream& s) {
        s << "placement,x,y,z,formation_azimuth_deg,trajectory_seed\n";
        for (std::size_t i = 0; i < result.placements.size(); ++i) {
            const auto& p = result.placements[i];
            fmt::print(s, "{},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", i, p.anchor.x(), p.anchor.y(),
                       p.anchor.z(), p.formation_azimuth_deg, p.seed);
        }
    });

    const EquirectGrid grid = config.grid();
    std::vector<EnvMap> truths;
    for (std::size_t i = 0; i < result.placements.size(); ++i) {
        truths.push_back(render_panorama(scene, result.placements[i].anchor, grid));
        if (config.write_images)
            write_binary(out / "images" / fmt::format("truth_p{:02}.ppm", i),
                         [&](std::ostream& s) { write_ppm(s, truths.back()); });
    }

    result.setup_seconds = seconds_since(started);

    for (Scenario scenario : config.scenarios) {
        const auto scenario_started = std::chrono::steady_clock::now();
        const std::string name = to_string(scenario);
        ScenarioRun run;
        run.scenario = scenario;
        run.csv_path = (out / (name + ".csv")).string();
        std::ofstream csv(run.csv_path, std::ios::binary);
        std::ofstream finals(out / (name + "_final.csv"), std::ios::binary);
        if (!csv || !finals) throw Error("cannot write CSVs under " + out.string());
        write_metrics_header(csv);
        finals << "placement,psnr_db,coverage,memory_bytes,observation_bytes,cloud_bytes,"
                  "covered_pixels,covered_mse,outlier_fraction\n";

        for (std::size_t i = 0; i < result.placements.size(); ++i) {
            const auto& placement = result.placements[i];
            write_binary(out / "trajectories" / fmt::format("{}_p{:02}.csv", name, i),
                         [&](std::ostream& s) {
                             write_trajectory_csv(
                                 s, scenario_trajectories(scene, config, placement, scenario));
                         });
            PlacementResult pr = run_placement(scene, config, placement, int(i), scenario, truths[i]);
            for (const auto& r : pr.records) write_metrics_row(csv, r);
            const auto& last = pr.records.back();
            fmt::print(finals, "{},{:.6f},{:.6f},{},{},{},{},{:.8f},{:.6f}\n", i, last.psnr_db,
                       last.coverage, last.memory_bytes, pr.observation_bytes, pr.cloud_bytes,
                       pr.reprojection.covered, pr.reprojection.mse,
                       pr.reprojection.outlier_fraction);
            if (config.write_images) {
                write_binary(out / "images" / fmt::format("{}_p{:02}.ppm", name, i),
                             [&](std::ostream& s) { write_ppm(s, pr.estimate); });
                write_binary(out / "images" / fmt::format("{}_p{:02}_mask.pgm", name, i),
                             [&](std::ostream& s) { write_pgm_mask(s, pr.estimate); });
            }
            run.placements.push_back(std::move(pr));
        }
        run.seconds = seconds_since(scenario_started);
        result.runs.push_back(std::move(run));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Report

const ScenarioSummary* Report::find(Scenario s) const {
    for (const auto& x : scenarios)
        if (x.scenario == s) return &x;
    return nullptr;
}

Report compare_report(const std::vector<std::string>& csv_paths) {
    std::vector<MetricsRecord> all;
    for (const auto& path : csv_paths) {
        std::ifstream in(path);
        if (!in) throw InvalidArgument("cannot open metrics CSV '" + path + "'");
        try {
            auto rows = read_metrics_csv(in);
            all.insert(all.end(), rows.begin(), rows.end());
        } catch (const InvalidArgument& e) {
            throw InvalidArgument(path + ": " + e.what());
        }
    }
    return compare_report(all);
}

Report compare_report(const std::vector<MetricsRecord>& records) {
    std::map<Scenario, std::map<int, std::vector<MetricsRecord>>> by;
    for (const auto& r : records) by[r.scenario][r.placement].push_back(r);
    if (by.size() < 2) throw InvalidArgument("report needs at least two scenarios");

    Report report;
    std::set<std::pair<int, std::uint64_t>> reference_set;
    Scenario reference_scenario{};
    for (auto& [scenario, placements] : by) {
        ScenarioSummary s;
        s.scenario = scenario;
        std::set<std::pair<int, std::uint64_t>> keys;
        for (auto& [index, rows] : placements) {
            std::sort(rows.begin(), rows.end(),
                      [](const auto& a, const auto& b) { return a.frame < b.frame; });
            for (std::size_t i = 1; i < rows.size(); ++i)
                if (rows[i].coverage < rows[i - 1].coverage) ++s.coverage_violations;
            s.finals[index] = rows.back();
            keys.insert({index, rows.back().seed});
            s.mean_psnr += rows.back().psnr_db;
            s.mean_coverage += rows.back().coverage;
            s.mean_memory += double(rows.back().memory_bytes);
        }
        const double n = double(placements.size());
        s.mean_psnr /= n;
        s.mean_coverage /= n;
        s.mean_memory /= n;
        if (report.scenarios.empty()) {
            reference_set = keys;
            reference_scenario = scenario;
        } else if (keys != reference_set) {
            throw InvalidArgument(fmt::format("placements of '{}' do not match those of '{}'",
                                              to_string(scenario), to_string(reference_scenario)));
        }
        report.scenarios.push_back(std::move(s));
    }

    for (const auto& a : report.scenarios)
        for (const auto& b : report.scenarios) {
            if (a.scenario == b.scenario) continue;
            report.pairs.push_back({a.scenario, b.scenario, a.mean_psnr - b.mean_psnr,
                                    (a.mean_psnr - b.mean_psnr) / b.mean_psnr,
                                    b.mean_memory > 0 ? a.mean_memory / b.mean_memory : 0.0});
        }

    const auto* single = report.find(Scenario::Single);
    const auto* multi = report.find(Scenario::Multi);
    const auto* guided = report.find(Scenario::Guided);
    const auto* full = report.find(Scenario::Full);
    const auto* baseline = report.find(Scenario::Baseline);
    auto& flags = report.flags;

    if (multi && single) {
        const double rel = multi->mean_psnr / single->mean_psnr - 1.0;
        flags.push_back({"multi_vs_single", rel,
                         fmt::format("multi {:+.1f}% over single (need >= +15%)", 100 * rel),
                         rel >= 0.15});
    }
    if (guided && multi) {
        const double d = guided->mean_psnr - multi->mean_psnr;
        flags.push_back({"guided_vs_multi", d,
                         fmt::format("guided {:+.2f} dB vs multi (need >= -0.5 dB)", d), d >= -0.5});
    }
    if (guided && single) {
        const double rel = guided->mean_psnr / single->mean_psnr - 1.0;
        flags.push_back({"guided_vs_single", rel,
                         fmt::format("guided {:+.1f}% over single (need >= +10%)", 100 * rel),
                         rel >= 0.10});
    }
    if (guided && multi) {
        double worst = 0.0;
        for (const auto& [i, g] : guided->finals)
            worst = std::max(worst, double(g.memory_bytes) / double(multi->finals.at(i).memory_bytes));
        flags.push_back({"memory_guided_vs_multi", worst,
                         fmt::format("worst guided/multi memory {:.1f}% (need <= 40% everywhere)",
                                     100 * worst),
                         worst <= 0.40});
    }
    if (single && baseline) {
        int positive = 0;
        for (const auto& [i, s] : single->finals)
            if (s.psnr_db - baseline->finals.at(i).psnr_db > 0) ++positive;
        const int n = int(single->finals.size());
        const int need = (10 * n + 11) / 12;
        const double d = single->mean_psnr - baseline->mean_psnr;
        flags.push_back({"single_vs_baseline", d,
                         fmt::format("single {:+.2f} dB vs baseline, positive on {}/{} (need >= {})",
                                     d, positive, n, need),
                         d >= 0 && positive >= need});
    }
    if (full && guided) {
        int below = 0;
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& [i, f] : full->finals) {
            const double d = f.psnr_db - guided->finals.at(i).psnr_db;
            worst = std::min(worst, d);
            if (d < 0) ++below;
        }
        flags.push_back({"full_vs_guided", worst,
                         fmt::format("full minus guided, worst placement {:+.2f} dB ({} below)",
                                     worst, below),
                         below == 0});
    }
    std::size_t violations = 0;
    for (const auto& s : report.scenarios)
        if (s.scenario != Scenario::Baseline) violations += s.coverage_violations;
    flags.push_back({"coverage_monotone", double(violations),
                     fmt::format("{} coverage decreases outside the baseline", violations),
                     violations == 0});
    return report;
}

void Report::write_text(std::ostream& out) const {
    fmt::print(out, "{:<10} {:>10} {:>10} {:>14} {:>10}\n", "scenario", "psnr_db", "coverage",
               "memory_bytes", "placements");
    for (const auto& s : scenarios)
        fmt::print(out, "{:<10} {:>10.3f} {:>10.4f} {:>14.0f} {:>10}\n", to_string(s.scenario),
                   s.mean_psnr, s.mean_coverage, s.mean_memory, s.finals.size());
    fmt::print(out, "\n{:<10} {:<10} {:>10} {:>10} {:>12}\n", "scenario", "reference", "delta_db",
               "relative", "memory_ratio");
    for (const auto& p : pairs)
        fmt::print(out, "{:<10} {:<10} {:>+10.3f} {:>+9.1f}% {:>12.3f}\n", to_string(p.scenario),
                   to_string(p.reference), p.psnr_delta_db, 100 * p.psnr_relative, p.memory_ratio);
    fmt::print(out, "\n");
    for (const auto& f : flags)
        fmt::print(out, "{} {}: {}\n", f.pass ? "PASS" : "FAIL", f.name, f.detail);
}

void Report::write_csv(std::ostream& out) const {
    out << "metric,scenario,reference,value,pass\n";
    for (const auto& s : scenarios) {
        const char* n = to_string(s.scenario);
        fmt::print(out, "mean_psnr_db,{},,{:.6f},\n", n, s.mean_psnr);
        fmt::print(out, "mean_coverage,{},,{:.6f},\n", n, s.mean_coverage);
        fmt::print(out, "mean_memory_bytes,{},,{:.1f},\n", n, s.mean_memory);
    }
    for (const auto& p : pairs) {
        const char* a = to_string(p.scenario);
        const char* b = to_string(p.reference);
        fmt::print(out, "psnr_delta_db,{},{},{:.6f},\n", a, b, p.psnr_delta_db);
        fmt::print(out, "psnr_relative,{},{},{:.6f},\n", a, b, p.psnr_relative);
        fmt::print(out, "memory_ratio,{},{},{:.6f},\n", a, b, p.memory_ratio);
    }
    for (const auto& f : flags)
        fmt::print(out, "{},,,{:.6f},{}\n", f.name, f.value, f.pass ? "true" : "false");
}

}  // namespace sctx

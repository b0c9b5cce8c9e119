#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "sctx/experiment.hpp"

using namespace sctx;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

ExperimentConfig tiny(const fs::path& out) {
    ExperimentConfig c;
    c.scenarios = {Scenario::Single, Scenario::Multi, Scenario::Guided, Scenario::Baseline};
    c.placement_count = 2;
    c.frame_count = 12;
    c.full_rig_poses = 16;
    c.map_width = 64;
    c.camera_width = 48;
    c.camera_height = 36;
    c.out_dir = out.string();
    return c;
}

std::vector<MetricsRecord> finals(Scenario s, std::vector<double> psnr, std::vector<std::size_t> mem) {
    std::vector<MetricsRecord> out;
    for (std::size_t i = 0; i < psnr.size(); ++i)
        out.push_back({int(i), 0, 0.0, psnr[i], 0.5, mem[i], s, 10 + i});
    return out;
}

}  // namespace

TEST_CASE("config parses every key") {
    std::istringstream in(R"([experiment]
scene =
scenarios = single, guided
users = 4
formation_radius = 1.2
placements = 0 0 1; -1 0.5 1.2
placement_count = 3
probe_height = 0.9
placement_clearance = 0.7
frames = 90
frame_rate = 15
full_rig_poses = 64
map_width = 128
camera_width = 80
camera_height = 60
camera_hfov_deg = 60
voxel_size = 0.04
seed = 42
noise = true
noise_sigma = 0.02
hole_color = 0.25 0.5 0.75
out = results
images = false
)");
    const ExperimentConfig c = ExperimentConfig::parse(in);
    CHECK(c.scenarios == std::vector{Scenario::Single, Scenario::Guided});
    CHECK(c.n_users == 4);
    CHECK(c.formation_radius == 1.2);
    REQUIRE(c.placements.size() == 2);
    CHECK(c.placements[1] == Vec3d(-1, 0.5, 1.2));
    CHECK(c.placement_count == 3);
    CHECK(c.probe_height == 0.9);
    CHECK(c.placement_clearance == 0.7);
    CHECK(c.frame_count == 90);
    CHECK(c.frame_rate == 15);
    CHECK(c.full_rig_poses == 64);
    CHECK(c.map_width == 128);
    CHECK(c.camera_width == 80);
    CHECK(c.camera_height == 60);
    CHECK(c.camera_hfov_deg == 60);
    CHECK(c.voxel_size == 0.04f);
    CHECK(c.seed == 42);
    CHECK(c.noise);
    CHECK(c.noise_sigma == 0.02);
    CHECK(c.hole_color == Vec3f(0.25f, 0.5f, 0.75f));
    CHECK(c.out_dir == "results");
    CHECK_FALSE(c.write_images);

    std::ostringstream again;
    c.write(again);
    std::istringstream back(again.str());
    const ExperimentConfig d = ExperimentConfig::parse(back);
    std::ostringstream twice;
    d.write(twice);
    CHECK(twice.str() == again.str());
}

TEST_CASE("config errors name the offending fields") {
    auto problems = [](const std::string& text) {
        std::istringstream in(text);
        try {
            ExperimentConfig::parse(in);
        } catch (const ConfigError& e) {
            return e.problems();
        }
        return std::vector<std::string>{};
    };
    const auto bad = problems("[experiment]\nusers = 1\nmap_width = 33\nvoxel_size = -1\n");
    REQUIRE(bad.size() == 3);
    CHECK(bad[0].rfind("users:", 0) == 0);
    CHECK(bad[1].rfind("map_width:", 0) == 0);
    CHECK(bad[2].rfind("voxel_size:", 0) == 0);
    CHECK(problems("[experiment]\nbogus = 1\n").at(0).rfind("bogus:", 0) == 0);
    CHECK(problems("[other]\nx = 1\n").at(0).rfind("other:", 0) == 0);
    CHECK(problems("[experiment]\nscenarios = single, sideways\n").at(0).rfind("scenarios:", 0) == 0);
    CHECK(problems("[experiment]\nframes = many\n").at(0).rfind("frames:", 0) == 0);
    CHECK(problems("[experiment]\nplacements = 1 2\n").at(0).rfind("placements:", 0) == 0);
    CHECK(problems("[experiment]\nseed = 9\n").empty());
    CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/cfg.ini"), InvalidArgument);
}

TEST_CASE("scenario names") {
    for (Scenario s : kAllScenarios) CHECK(parse_scenario(to_string(s)) == s);
    CHECK_THROWS_AS(parse_scenario("everything"), InvalidArgument);
}

TEST_CASE("placements respect clearance and are seeded") {
    const SceneSpec scene = SceneSpec::default_scene();
    ExperimentConfig cfg;
    const auto a = sample_placements(scene, cfg);
    REQUIRE(a.size() == 12);
    for (const auto& p : a) {
        CHECK(p.anchor.z() == doctest::Approx(scene.room.min.z() + cfg.probe_height));
        for (int axis = 0; axis < 2; ++axis) {
            CHECK(p.anchor[axis] - scene.room.min[axis] >= cfg.placement_clearance);
            CHECK(scene.room.max[axis] - p.anchor[axis] >= cfg.placement_clearance);
        }
        for (const auto& o : scene.obstacles) {
            const double dx = std::max({o.box.min.x() - p.anchor.x(), 0.0, p.anchor.x() - o.box.max.x()});
            const double dy = std::max({o.box.min.y() - p.anchor.y(), 0.0, p.anchor.y() - o.box.max.y()});
            CHECK(std::hypot(dx, dy) >= cfg.placement_clearance);
        }
        CHECK_NOTHROW(scenario_trajectories(scene, cfg, p, Scenario::Multi));
    }
    const auto b = sample_placements(scene, cfg);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].anchor == b[i].anchor);
        CHECK(a[i].seed == b[i].seed);
    }
    cfg.seed = 2;
    CHECK(sample_placements(scene, cfg)[0].anchor != a[0].anchor);
}

TEST_CASE("scenario trajectories") {
    const SceneSpec scene = SceneSpec::default_scene();
    ExperimentConfig cfg;
    const auto pl = sample_placements(scene, cfg).front();
    const auto multi = scenario_trajectories(scene, cfg, pl, Scenario::Multi);
    const auto single = scenario_trajectories(scene, cfg, pl, Scenario::Single);
    const auto baseline = scenario_trajectories(scene, cfg, pl, Scenario::Baseline);
    REQUIRE(multi.size() == 3);
    REQUIRE(single.size() == 1);
    std::ostringstream a, b, c;
    write_trajectory_csv(a, std::span(multi).first(1));
    write_trajectory_csv(b, single);
    write_trajectory_csv(c, baseline);
    CHECK(a.str() == b.str());
    CHECK(b.str() == c.str());
    CHECK(scenario_trajectories(scene, cfg, pl, Scenario::Guided).at(0).size() == 150);
    CHECK(scenario_trajectories(scene, cfg, pl, Scenario::Full).at(0).size() == 128);
}

TEST_CASE("metrics csv round trip") {
    const std::vector<MetricsRecord> rows{{0, 0, 0.0, 12.345678, 0.25, 1000, Scenario::Single, 7},
                                          {3, 149, 4.966667, 99.0, 1.0, 123456789, Scenario::Full, 7}};
    std::ostringstream out;
    write_metrics_header(out);
    for (const auto& r : rows) write_metrics_row(out, r);
    CHECK(out.str().rfind(std::string(kMetricsHeader) + "\n", 0) == 0);
    std::istringstream in(out.str());
    const auto back = read_metrics_csv(in);
    REQUIRE(back.size() == 2);
    CHECK(back[1].placement == 3);
    CHECK(back[1].frame == 149);
    CHECK(back[1].psnr_db == 99.0);
    CHECK(back[1].memory_bytes == 123456789);
    CHECK(back[1].scenario == Scenario::Full);
    CHECK(back[0].psnr_db == doctest::Approx(12.345678));

    std::istringstream bad_header("a,b\n");
    CHECK_THROWS_AS(read_metrics_csv(bad_header), InvalidArgument);
    std::istringstream bad_row(std::string(kMetricsHeader) + "\n1,2,3\n");
    CHECK_THROWS_AS(read_metrics_csv(bad_row), InvalidArgument);
}

TEST_CASE("report flags") {
    std::vector<MetricsRecord> rows;
    for (auto&& v : {finals(Scenario::Single, {10, 10}, {100, 100}),
                     finals(Scenario::Multi, {12, 12}, {300, 300}),
                     finals(Scenario::Guided, {12.2, 11.8}, {100, 100}),
                     finals(Scenario::Baseline, {9, 9.5}, {50, 50})})
        rows.insert(rows.end(), v.begin(), v.end());
    const Report r = compare_report(rows);
    auto flag = [&](const std::string& name) {
        for (const auto& f : r.flags)
            if (f.name == name) return f;
        FAIL("missing flag " << name);
        return AcceptanceFlag{};
    };
    CHECK(flag("multi_vs_single").value == doctest::Approx(0.2));
    CHECK(flag("multi_vs_single").pass);
    CHECK(flag("guided_vs_multi").pass);
    CHECK(flag("guided_vs_single").pass);
    CHECK(flag("memory_guided_vs_multi").value == doctest::Approx(1.0 / 3.0));
    CHECK(flag("memory_guided_vs_multi").pass);
    CHECK(flag("single_vs_baseline").pass);
    CHECK(r.find(Scenario::Full) == nullptr);
    REQUIRE(r.find(Scenario::Multi));
    CHECK(r.find(Scenario::Multi)->mean_psnr == doctest::Approx(12.0));

    std::ostringstream text, csv;
    r.write_text(text);
    r.write_csv(csv);
    CHECK(text.str().find("multi_vs_single") != std::string::npos);
    CHECK(csv.str().rfind("metric,scenario,reference,value,pass\n", 0) == 0);

    auto mismatched = rows;
    mismatched.back().seed = 99;
    CHECK_THROWS_AS(compare_report(mismatched), InvalidArgument);
    CHECK_THROWS_AS(compare_report(finals(Scenario::Single, {1}, {1})), InvalidArgument);
}

TEST_CASE("small experiment is deterministic and well formed") {
    const fs::path root = fs::temp_directory_path() / "sctx_test_experiment";
    fs::remove_all(root);
    const ExperimentResult a = run_experiment(tiny(root / "a"));
    run_experiment(tiny(root / "b"));
    REQUIRE(a.runs.size() == 4);
    for (const auto& run : a.runs) {
        const std::string name = to_string(run.scenario);
        for (const std::string file : {name + ".csv", name + "_final.csv"})
            CHECK(slurp(root / "a" / file) == slurp(root / "b" / file));
        std::ifstream in(root / "a" / (name + ".csv"));
        const auto rows = read_metrics_csv(in);
        CHECK(rows.size() == 2 * 12);
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].placement == rows[i - 1].placement && run.scenario != Scenario::Baseline)
                CHECK(rows[i].coverage >= rows[i - 1].coverage);
        for (int p = 0; p < 2; ++p) {
            const std::string img = fmt::format("images/{}_p{:02d}.ppm", name, p);
            CHECK(fs::exists(root / "a" / img));
            CHECK(slurp(root / "a" / img) == slurp(root / "b" / img));
        }
    }
    CHECK(fs::exists(root / "a" / "placements.csv"));
    CHECK(fs::exists(root / "a" / "images" / "truth_p00.ppm"));
    CHECK(fs::exists(root / "a" / "trajectories" / "multi_p01.csv"));
    const Report r = compare_report(std::vector<std::string>{(root / "a" / "single.csv").string(),
                                                             (root / "a" / "multi.csv").string()});
    CHECK(r.scenarios.size() == 2);
    fs::remove_all(root);
}

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "sctx/experiment.hpp"
#include "sctx/rng.hpp"
#include "sctx/tasks.hpp"
#include "sctx/trajectory.hpp"

using namespace sctx;

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

double forward_azimuth_deg(const Posed& pose) {
    const Vec3d f = pose.forward();
    return std::atan2(f.y(), f.x()) * kDeg;
}

// Brute force: mark 0.01 degree bins, report 360 minus the largest circular
// run of empty bins.
double span_oracle(const std::vector<std::pair<double, double>>& intervals) {
    constexpr int n = 36000;
    std::vector<bool> hit(n, false);
    for (const auto& [c, h] : intervals) {
        for (int i = 0; i < n; ++i) {
            const double a = (i + 0.5) / 100.0;
            double d = std::fmod(std::abs(a - c), 360.0);
            d = std::min(d, 360.0 - d);
            if (d <= h) hit[std::size_t(i)] = true;
        }
    }
    int longest = 0, run = 0;
    for (int i = 0; i < 2 * n; ++i) {
        run = hit[std::size_t(i % n)] ? 0 : run + 1;
        longest = std::max(longest, std::min(run, n));
    }
    return 360.0 - longest / 100.0;
}

std::string csv_of(const std::vector<Trajectory>& t) {
    std::ostringstream out;
    write_trajectory_csv(out, t);
    return out.str();
}

}  // namespace

TEST_CASE("look-around keeps a rigid arm and looks at the anchor") {
    const SceneSpec scene = SceneSpec::default_scene();
    ScenarioParams p;
    p.seed = 3;
    const Trajectory t = gen_look_around(scene, p);
    REQUIRE(t.size() == 150);
    for (const auto& f : t.frames) {
        CHECK(std::abs((f.pose.translation - p.pivot()).norm() - p.arm_length) < 1e-6);
        CHECK((p.anchor - f.pose.translation).normalized().dot(f.pose.forward()) > 0.999);
        CHECK(std::abs(f.pose.rotation.norm() - 1.0) < 1e-6);
        // Camera +y (down) has no upward component: up is as close to +z as possible.
        CHECK((f.pose.rotation * Vec3d::UnitY()).z() <= 1e-9);
    }
    for (std::size_t i = 1; i < t.size(); ++i)
        CHECK(t.frames[i].timestamp > t.frames[i - 1].timestamp);
}

TEST_CASE("look-around sweeps stay within their ranges and are seeded") {
    const SceneSpec scene = SceneSpec::default_scene();
    ScenarioParams p;
    p.seed = 7;
    const Trajectory a = gen_look_around(scene, p);
    const Trajectory b = gen_look_around(scene, p);
    CHECK(csv_of({a}) == csv_of({b}));
    p.seed = 8;
    CHECK(csv_of({a}) != csv_of({gen_look_around(scene, p)}));

    const double facing = p.facing_rad();
    double max_az = 0, max_el = 0;
    for (const auto& f : a.frames) {
        const Vec3d arm = (f.pose.translation - p.pivot()) / p.arm_length;
        double daz = std::atan2(arm.y(), arm.x()) - facing;
        daz = std::remainder(daz, 2 * std::numbers::pi);
        max_az = std::max(max_az, std::abs(daz) * kDeg);
        max_el = std::max(max_el, std::abs(std::asin(arm.z())) * kDeg);
    }
    CHECK(max_az <= 35.0 + 1e-9);
    CHECK(max_el <= 15.0 + 1e-9);
    CHECK(max_az > 30.0);
    CHECK(max_el > 10.0);
}

TEST_CASE("look-around errors") {
    const SceneSpec scene = SceneSpec::default_scene();
    ScenarioParams p;
    p.user_position = {0.5, 0.0};
    CHECK_THROWS_AS(gen_look_around(scene, p), InvalidArgument);
    p.user_position = {2.1, 0.0};
    CHECK_THROWS_AS(gen_look_around(scene, p), InvalidArgument);
    p.user_position = {1.9, 0.0};
    CHECK_NOTHROW(gen_look_around(scene, p));
    // Facing the +y wall from 0.5 m away with a 0.9 m arm.
    p.user_position = {0.0, 2.5};
    p.anchor = Vec3d(0, 0.5, 0.5);
    p.facing_deg = 90.0;
    p.arm_length = 0.9;
    CHECK_THROWS_AS(gen_look_around(scene, p), InvalidArgument);
    p = ScenarioParams{};
    p.arm_length = 0;
    CHECK_THROWS_AS(gen_look_around(scene, p), InvalidArgument);
}

TEST_CASE("multi-user formation") {
    const SceneSpec scene = SceneSpec::default_scene();
    ScenarioParams base;
    base.anchor = Vec3d(-0.5, 0.5, 1.0);
    base.seed = 11;
    const auto users = gen_multi_user(scene, base, 3);
    REQUIRE(users.size() == 3);
    const double expected[] = {0.0, 120.0, 240.0};
    for (int k = 0; k < 3; ++k) {
        const auto& u = users[std::size_t(k)];
        CHECK(u.user_id == std::uint32_t(k));
        // Every arm position lies within arm_length of the standing point.
        Eigen::Vector2d mean = Eigen::Vector2d::Zero();
        for (const auto& f : u.frames) mean += f.pose.translation.head<2>();
        mean /= double(u.size());
        const Eigen::Vector2d rel = mean - base.anchor.head<2>();
        double az = std::atan2(rel.y(), rel.x()) * kDeg;
        if (az < -1) az += 360.0;
        CHECK(std::abs(az - expected[k]) < 10.0);
        for (std::size_t i = 0; i < u.size(); ++i)
            CHECK(u.frames[i].timestamp == users[0].frames[i].timestamp);
    }
    CHECK(csv_of({users[0]}) != csv_of({users[1]}));

    std::vector<std::pair<double, double>> views;
    const double half = 69.0 / 2.0;
    for (const auto& u : users)
        for (const auto& f : u.frames) views.emplace_back(forward_azimuth_deg(f.pose), half);
    CHECK(azimuth_span_deg(views) >= 300.0);
    CHECK(azimuth_span_deg(views) == doctest::Approx(span_oracle(views)).epsilon(0.001));

    base.anchor = Vec3d(-2.5, 0.0, 1.0);
    CHECK_THROWS_AS(gen_multi_user(scene, base, 3), InvalidArgument);
    CHECK_THROWS_AS(gen_multi_user(scene, base, 1), InvalidArgument);
}

TEST_CASE("azimuth span matches a brute-force oracle") {
    CHECK(azimuth_span_deg({}) == 0.0);
    const std::vector<std::pair<double, double>> wrap{{350, 10}, {10, 5}};
    CHECK(azimuth_span_deg(wrap) == doctest::Approx(35.0));
    // An interval crossing 0 that swallows the first one.
    const std::vector<std::pair<double, double>> covered{{15, 5}, {350, 50}};
    CHECK(azimuth_span_deg(covered) == doctest::Approx(100.0));
    Rng rng(21);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<std::pair<double, double>> iv;
        const int n = 1 + int(rng.uniform() * 6);
        for (int i = 0; i < n; ++i) iv.emplace_back(rng.uniform(-360, 720), rng.uniform(0.5, 60));
        CHECK(azimuth_span_deg(iv) == doctest::Approx(span_oracle(iv)).epsilon(0.0005));
    }
}

TEST_CASE("guided sweep") {
    const SceneSpec scene = SceneSpec::default_scene();
    ScenarioParams p;
    const Trajectory t = gen_guided(scene, p);
    REQUIRE(t.size() == 150);
    std::vector<std::pair<double, double>> fwd;
    for (const auto& f : t.frames) {
        CHECK((f.pose.translation - p.pivot()).norm() < 1e-12);
        CHECK(std::abs(f.pose.rotation.norm() - 1.0) < 1e-6);
        fwd.emplace_back(forward_azimuth_deg(f.pose), 0.0);
    }
    CHECK(azimuth_span_deg(fwd) >= 355.0);
    double d = forward_azimuth_deg(t.frames[74].pose) - forward_azimuth_deg(t.frames[0].pose);
    if (d < 0) d += 360.0;
    CHECK(d >= 350.0);
    CHECK(std::asin(t.frames[10].pose.forward().z()) * kDeg == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(std::asin(t.frames[100].pose.forward().z()) * kDeg == doctest::Approx(-30.0));
    std::ostringstream a, b;
    write_trajectory_csv(a, std::vector{t});
    write_trajectory_csv(b, std::vector{gen_guided(scene, p)});
    CHECK(a.str() == b.str());
}

TEST_CASE("full rig covers the sphere from the anchor") {
    const SceneSpec scene = SceneSpec::default_scene();
    const Vec3d anchor(0, 0, 1);
    const Trajectory t = gen_full_rig(scene, anchor, 128);
    REQUIRE(t.size() == 128);
    double lo = 1, hi = -1;
    for (const auto& f : t.frames) {
        CHECK(f.pose.translation == anchor);
        lo = std::min(lo, f.pose.forward().z());
        hi = std::max(hi, f.pose.forward().z());
    }
    CHECK(lo < -0.98);
    CHECK(hi > 0.98);
}

TEST_CASE("trajectory csv header") {
    std::ostringstream out;
    write_trajectory_csv(out, std::vector<Trajectory>{});
    CHECK(out.str() == "frame,timestamp,tx,ty,tz,qw,qx,qy,qz,user_id\n");
}

TEST_CASE("look-around keeps the anchor in frame at every sampled placement") {
    const SceneSpec scene = SceneSpec::default_scene();
    ExperimentConfig cfg;
    const auto k = cfg.camera();
    for (const auto& pl : sample_placements(scene, cfg)) {
        for (const auto& traj : scenario_trajectories(scene, cfg, pl, Scenario::Multi)) {
            int inside = 0;
            for (const auto& f : traj.frames) {
                const Vec3d c = transform_point(f.pose.inverse(), pl.anchor);
                const auto px = project<double>(k, c);
                inside += c.z() > 0 && px.x() >= 0 && px.x() < k.width && px.y() >= 0 &&
                          px.y() < k.height;
            }
            CHECK(inside >= 0.95 * double(traj.size()));
        }
    }
}

TEST_CASE("guided sweep sees more of the panorama than a single look-around") {
    const SceneSpec scene = SceneSpec::default_scene();
    ExperimentConfig cfg;
    const auto k = cfg.camera();
    const auto placements = sample_placements(scene, cfg);
    for (std::size_t i = 0; i < placements.size(); i += 3) {
        const auto& pl = placements[i];
        auto cover = [&](Scenario s) {
            PointCloud cloud;
            for (const auto& traj : scenario_trajectories(scene, cfg, pl, s))
                for (const auto& f : traj.frames) {
                    const PointCloud c = backproject(render_frame(scene, f.pose, k), cfg.voxel_size);
                    cloud = voxel_merge(cloud, c);
                }
            return coverage(estimate_envmap(cloud, pl.anchor, cfg.grid()));
        };
        const double guided = cover(Scenario::Guided);
        CAPTURE(i);
        ScenarioParams base;
        base.anchor = pl.anchor;
        base.seed = pl.seed;
        for (const auto& traj : gen_multi_user(scene, base, cfg.n_users, cfg.formation_radius,
                                               pl.formation_azimuth_deg)) {
            PointCloud cloud;
            for (const auto& f : traj.frames)
                cloud = voxel_merge(cloud, backproject(render_frame(scene, f.pose, k), cfg.voxel_size));
            CHECK(guided > coverage(estimate_envmap(cloud, pl.anchor, cfg.grid())));
        }
    }
}

#include "sctx/trajectory.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "sctx/rng.hpp"

namespace sctx {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Wrist sweep frequencies in Hz; the ratio is the golden ratio.
constexpr double kAzimuthFreq = 0.2;
constexpr double kElevationFreq = 0.2 * std::numbers::phi;

void require_free(const SceneSpec& scene, const Vec3d& p, const char* what) {
    if (!scene.free_space(p))
        throw InvalidArgument(fmt::format("{} ({:.3f}, {:.3f}, {:.3f}) is outside free space",
                                          what, p.x(), p.y(), p.z()));
}

}  // namespace

double ScenarioParams::facing_rad() const {
    if (facing_deg) return deg_to_rad(*facing_deg);
    return std::atan2(anchor.y() - user_position.y(), anchor.x() - user_position.x());
}

Trajectory gen_look_around(const SceneSpec& scene, const ScenarioParams& params) {
    if (params.arm_length <= 0) throw InvalidArgument("arm_length must be positive");
    if (params.frame_count <= 0) throw InvalidArgument("frame_count must be positive");
    const double reach = (params.anchor.head<2>() - params.user_position).norm();
    if (reach < 0.8 || reach > 2.0)
        throw InvalidArgument(fmt::format("user stands {:.3f} m from the anchor; expected 0.8-2.0 m",
                                          reach));
    require_free(scene, params.anchor, "anchor");

    Rng rng(params.seed);
    const double phase_az = rng.uniform(0.0, kTwoPi);
    const double phase_el = rng.uniform(0.0, kTwoPi);
    const double base_az = params.facing_rad();
    const double amp_az = deg_to_rad(params.sweep_azimuth_deg);
    const double amp_el = deg_to_rad(params.sweep_elevation_deg);
    const Vec3d pivot = params.pivot();

    Trajectory traj;
    traj.user_id = params.user_id;
    traj.frames.reserve(std::size_t(params.frame_count));
    for (int k = 0; k < params.frame_count; ++k) {
        const double t = k / params.frame_rate;
        const double az = base_az + amp_az * std::sin(kTwoPi * kAzimuthFreq * t + phase_az);
        const double el = amp_el * std::sin(kTwoPi * kElevationFreq * t + phase_el);
        const Vec3d arm(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
        const Vec3d position = pivot + params.arm_length * arm;
        require_free(scene, position, "camera position");
        traj.frames.push_back({t, look_at<double>(position, params.anchor)});
    }
    return traj;
}

std::vector<Trajectory> gen_multi_user(const SceneSpec& scene, const ScenarioParams& base,
                                       int n_users, double radius, double formation_azimuth_deg) {
    if (n_users < 2) throw InvalidArgument("multi-user scenario needs at least 2 users");
    std::vector<Trajectory> out;
    out.reserve(std::size_t(n_users));
    for (int k = 0; k < n_users; ++k) {
        const double az = deg_to_rad(formation_azimuth_deg + 360.0 * k / n_users);
        ScenarioParams p = base;
        p.user_position =
            base.anchor.head<2>() + radius * Eigen::Vector2d(std::cos(az), std::sin(az));
        p.facing_deg.reset();
        p.user_id = base.user_id + std::uint32_t(k);
        p.seed = k == 0 ? base.seed : derive_seed(base.seed, std::uint64_t(k));
        const Vec3d standing(p.user_position.x(), p.user_position.y(), p.arm_pivot_height);
        require_free(scene, standing, "user position");
        out.push_back(gen_look_around(scene, p));
    }
    return out;
}

Trajectory gen_guided(const SceneSpec& scene, const ScenarioParams& params) {
    if (params.frame_count < 2) throw InvalidArgument("guided sweep needs at least 2 frames");
    const Vec3d pivot = params.pivot();
    require_free(scene, pivot, "camera position");

    const double start = params.facing_rad();
    const int first_pass = (params.frame_count + 1) / 2;
    const int second_pass = params.frame_count - first_pass;
    Trajectory traj;
    traj.user_id = params.user_id;
    traj.frames.reserve(std::size_t(params.frame_count));
    for (int k = 0; k < params.frame_count; ++k) {
        const bool low = k >= first_pass;
        const int step = low ? k - first_pass : k;
        const int steps = low ? second_pass : first_pass;
        const double az = start + kTwoPi * step / steps;
        const double el = low ? deg_to_rad(-30.0) : 0.0;
        traj.frames.push_back({k / params.frame_rate, look_along<double>(pivot, az, el)});
    }
    return traj;
}

Trajectory gen_full_rig(const SceneSpec& scene, const Vec3d& anchor, int pose_count,
                        double frame_rate, std::uint32_t user_id) {
    if (pose_count <= 0) throw InvalidArgument("pose_count must be positive");
    require_free(scene, anchor, "anchor");
    const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
    Trajectory traj;
    traj.user_id = user_id;
    for (int i = 0; i < pose_count; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / pose_count;
        const double el = std::asin(z);
        const double az = golden_angle * i;
        traj.frames.push_back({i / frame_rate, look_along<double>(anchor, az, el)});
    }
    return traj;
}

double azimuth_span_deg(std::span<const std::pair<double, double>> intervals) {
    if (intervals.empty()) return 0.0;
    // Unroll onto [0, 360), splitting intervals that wrap.
    std::vector<std::pair<double, double>> pieces;
    for (const auto& [center, half] : intervals) {
        if (half >= 180.0) return 360.0;
        double s = std::fmod(center - half, 360.0);
        if (s < 0) s += 360.0;
        const double e = s + 2.0 * half;
        if (e > 360.0) {
            pieces.emplace_back(s, 360.0);
            pieces.emplace_back(0.0, e - 360.0);
        } else {
            pieces.emplace_back(s, e);
        }
    }
    std::sort(pieces.begin(), pieces.end());
    double largest_gap = 0.0;
    double reach = pieces.front().second;
    for (std::size_t i = 1; i < pieces.size(); ++i) {
        largest_gap = std::max(largest_gap, pieces[i].first - reach);
        reach = std::max(reach, pieces[i].second);
    }
    largest_gap = std::max(largest_gap, pieces.front().first + 360.0 - reach);
    return 360.0 - largest_gap;
}

void write_trajectory_csv(std::ostream& out, std::span<const Trajectory> trajectories) {
    out << "frame,timestamp,tx,ty,tz,qw,qx,qy,qz,user_id\n";
    for (const auto& traj : trajectories) {
        for (std::size_t k = 0; k < traj.frames.size(); ++k) {
            const auto& f = traj.frames[k];
            const auto& q = f.pose.rotation;
            const auto& t = f.pose.translation;
            out << fmt::format("{},{:.9f},{:.9f},{:.9f},{:.9f},{:.12f},{:.12f},{:.12f},{:.12f},{}\n",
                               k, f.timestamp, t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z(),
                               traj.user_id);
        }
    }
}

}  // namespace sctx

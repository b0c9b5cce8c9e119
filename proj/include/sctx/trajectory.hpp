#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "sctx/geometry.hpp"
#include "sctx/scene.hpp"

namespace sctx {

struct TimedPose {
    double timestamp = 0.0;
    Posed pose;
};

struct Trajectory {
    std::vector<TimedPose> frames;
    std::uint32_t user_id = 0;

    std::size_t size() const { return frames.size(); }
};

/// Kinematic arm model for one handheld session.
struct ScenarioParams {
    Vec3d anchor = Vec3d(0, 0, 0.5);             ///< point the device keeps looking at
    Eigen::Vector2d user_position{1.5, 0.0};     ///< standing position on the floor
    std::optional<double> facing_deg;            ///< default: toward the anchor
    double arm_pivot_height = 1.4;
    double arm_length = 0.5;
    double sweep_azimuth_deg = 35.0;
    double sweep_elevation_deg = 15.0;
    int frame_count = 150;
    double frame_rate = 30.0;
    std::uint64_t seed = 0;
    std::uint32_t user_id = 0;

    Vec3d pivot() const { return {user_position.x(), user_position.y(), arm_pivot_height}; }
    double facing_rad() const;
};

/// Handheld look-around: the device swings on a rigid arm around the pivot
/// (sinusoids in azimuth and elevation at incommensurate frequencies with
/// seeded phases) while always looking at the anchor.
/// Throws InvalidArgument if the user is not 0.8-2.0 m from the anchor or a
/// camera position leaves free space.
Trajectory gen_look_around(const SceneSpec& scene, const ScenarioParams& params);

/// `n_users` look-around sessions from users standing on a circle of
/// `radius` around the anchor at azimuths formation_azimuth + 360 k / n.
/// User k gets user_id base + k and a derived seed.
std::vector<Trajectory> gen_multi_user(const SceneSpec& scene, const ScenarioParams& base,
                                       int n_users = 3, double radius = 1.5,
                                       double formation_azimuth_deg = 0.0);

/// Guided bootstrap sweep: device held at the pivot, a full 360 degree pan at
/// elevation 0 over the first half of the frames, then a second pan at -30.
Trajectory gen_guided(const SceneSpec& scene, const ScenarioParams& params);

/// Outward-looking rig at the anchor covering the sphere (Fibonacci lattice).
Trajectory gen_full_rig(const SceneSpec& scene, const Vec3d& anchor, int pose_count = 128,
                        double frame_rate = 30.0, std::uint32_t user_id = 0);

/// Circular span (360 minus the largest gap) of a set of azimuth intervals,
/// each given as (center, half_width) in degrees.
double azimuth_span_deg(std::span<const std::pair<double, double>> intervals);

/// CSV: frame,timestamp,tx,ty,tz,qw,qx,qy,qz,user_id
void write_trajectory_csv(std::ostream& out, std::span<const Trajectory> trajectories);

}  // namespace sctx

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "sctx/envmap.hpp"
#include "sctx/frame.hpp"
#include "sctx/geometry.hpp"

namespace sctx {

struct Solid {
    Vec3f rgb = Vec3f::Zero();
};

/// Two-color checkerboard; `period` is the repeat length, each cell spans
/// half of it along both in-plane axes.
struct Checker {
    Vec3f a = Vec3f::Zero();
    Vec3f b = Vec3f::Ones();
    double period = 0.5;
};

/// Linear blend from `low` to `high` along a world axis across the extent of
/// the host box.
struct AxisGradient {
    Vec3f low = Vec3f::Zero();
    Vec3f high = Vec3f::Ones();
    int axis = 2;
};

using Radiance = std::variant<Solid, Checker, AxisGradient>;

struct Box {
    Vec3d min = Vec3d::Zero();
    Vec3d max = Vec3d::Ones();

    bool contains_strict(const Vec3d& p) const {
        return (p.array() > min.array()).all() && (p.array() < max.array()).all();
    }
};

/// Room faces, ordered as 2 * axis + (max side ? 1 : 0).
enum class RoomFace : int { XMin = 0, XMax, YMin, YMax, Floor, Ceiling };

inline constexpr int kRoomFaceCount = 6;

struct Obstacle {
    std::string name;
    Box box;
    Radiance radiance = Solid{};
};

/// Rectangle on a surface with override radiance. Bounds are in the face's
/// in-plane world coordinates: (y, z) for x-faces, (x, z) for y-faces and
/// (x, y) for z-faces.
struct EmissivePatch {
    int surface_id = static_cast<int>(RoomFace::Ceiling);
    Eigen::Vector2d min = Eigen::Vector2d::Zero();
    Eigen::Vector2d max = Eigen::Vector2d::Zero();
    Vec3f rgb = Vec3f::Ones();
};

/// Closed axis-aligned room of self-luminous surfaces. Surface ids: room faces
/// 0..5 in RoomFace order, then obstacle i face f at 6 + 6 * i + f.
struct SceneSpec {
    Box room{Vec3d(-3, -3, 0), Vec3d(3, 3, 3)};
    std::array<Radiance, kRoomFaceCount> faces;
    std::vector<Obstacle> obstacles;
    std::vector<EmissivePatch> patches;

    /// Throws InvalidArgument describing the first violated invariant.
    void validate() const;

    /// True when `p` is strictly inside the room and outside every obstacle.
    bool free_space(const Vec3d& p) const;

    int surface_count() const { return kRoomFaceCount * (1 + int(obstacles.size())); }

    /// Dim 6 x 6 x 3 m room: low-contrast checker walls, solid floor and ceiling,
    /// an emissive ceiling light and one 1 m obstacle box.
    static SceneSpec default_scene();
};

struct Hit {
    double t = 0.0;
    Vec3f radiance = Vec3f::Zero();
    int surface_id = -1;
    Vec3d point = Vec3d::Zero();
};

/// Nearest surface along a unit ray. Interior origins of a closed room always
/// hit. Throws InvalidArgument if the origin is not in free space.
Hit raycast(const SceneSpec& scene, const Vec3d& origin, const Vec3d& dir);

/// Radiance of `surface_id` at a point lying on it.
Vec3f surface_radiance(const SceneSpec& scene, int surface_id, const Vec3d& point);

struct RenderOptions {
    double timestamp = 0.0;
    std::uint32_t user_id = 0;
    /// Relative depth noise; sigma = depth_noise * depth. Zero disables.
    double depth_noise = 0.0;
    std::uint64_t noise_seed = 0;
};

RGBDFrame render_frame(const SceneSpec& scene, const Posed& pose, const CameraIntrinsics& k,
                       const RenderOptions& options = {});

/// Ground-truth panorama at `position`; every pixel valid.
EnvMap render_panorama(const SceneSpec& scene, const Vec3d& position, const EquirectGrid& grid);

/// Plain-text scene config: INI sections of key = value pairs.
SceneSpec parse_scene(std::istream& in);
SceneSpec load_scene(const std::string& path);
void write_scene(std::ostream& out, const SceneSpec& scene);

}  // namespace sctx

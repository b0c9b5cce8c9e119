#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "sctx/error.hpp"

namespace sctx {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

using Vec3d = Vec3<double>;
using Vec3f = Vec3<float>;

/// Rigid transform mapping camera-frame coordinates to world coordinates.
/// World frame is right-handed with z up; camera frame is +x right, +y down,
/// +z forward.
template <typename Scalar>
struct Pose {
    Eigen::Quaternion<Scalar> rotation = Eigen::Quaternion<Scalar>::Identity();
    Vec3<Scalar> translation = Vec3<Scalar>::Zero();

    static Pose identity() { return {}; }

    /// Builds a pose from camera axes expressed in world coordinates.
    static Pose from_axes(const Vec3<Scalar>& right, const Vec3<Scalar>& down,
                          const Vec3<Scalar>& forward, const Vec3<Scalar>& position) {
        Eigen::Matrix<Scalar, 3, 3> r;
        r.col(0) = right;
        r.col(1) = down;
        r.col(2) = forward;
        Pose p;
        p.rotation = Eigen::Quaternion<Scalar>(r).normalized();
        p.translation = position;
        return p;
    }

    Eigen::Matrix<Scalar, 3, 3> rotation_matrix() const { return rotation.toRotationMatrix(); }

    Vec3<Scalar> forward() const { return rotation * Vec3<Scalar>::UnitZ(); }

    Pose inverse() const {
        Pose p;
        p.rotation = rotation.conjugate();
        p.translation = -(p.rotation * translation);
        return p;
    }

    template <typename Other>
    Pose<Other> cast() const {
        Pose<Other> p;
        p.rotation = rotation.template cast<Other>();
        p.translation = translation.template cast<Other>();
        return p;
    }
};

using Posed = Pose<double>;

/// a * b: applies `b` first.
template <typename Scalar>
Pose<Scalar> compose(const Pose<Scalar>& a, const Pose<Scalar>& b) {
    Pose<Scalar> p;
    p.rotation = (a.rotation * b.rotation).normalized();
    p.translation = a.rotation * b.translation + a.translation;
    return p;
}

template <typename Scalar>
Vec3<Scalar> transform_point(const Pose<Scalar>& pose, const Vec3<Scalar>& p_cam) {
    return pose.rotation * p_cam + pose.translation;
}

/// Camera pose at `position` looking toward `target`, camera up as close to
/// world +z as possible. Falls back to world +x as the up hint when looking
/// straight up or down.
template <typename Scalar>
Pose<Scalar> look_at(const Vec3<Scalar>& position, const Vec3<Scalar>& target) {
    const Vec3<Scalar> forward = (target - position).normalized();
    Vec3<Scalar> up = Vec3<Scalar>::UnitZ();
    if (std::abs(forward.dot(up)) > Scalar(1) - Scalar(1e-9)) up = Vec3<Scalar>::UnitX();
    const Vec3<Scalar> right = forward.cross(up).normalized();
    const Vec3<Scalar> down = forward.cross(right);
    return Pose<Scalar>::from_axes(right, down, forward, position);
}

/// Pose looking along a world direction given as azimuth (about +z, from +x)
/// and elevation, both in radians.
template <typename Scalar>
Pose<Scalar> look_along(const Vec3<Scalar>& position, Scalar azimuth, Scalar elevation) {
    const Vec3<Scalar> dir(std::cos(elevation) * std::cos(azimuth),
                           std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
    return look_at<Scalar>(position, position + dir);
}

struct CameraIntrinsics {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;

    bool valid() const {
        return fx > 0 && fy > 0 && width > 0 && height > 0 && cx >= 0 && cx < width && cy >= 0 &&
               cy < height;
    }

    /// Square-pixel camera with the given horizontal field of view, principal
    /// point at the image center.
    static CameraIntrinsics from_hfov(int width, int height, double hfov_deg) {
        const double half = hfov_deg * std::numbers::pi / 360.0;
        const double f = (width / 2.0) / std::tan(half);
        return {f, f, width / 2.0, height / 2.0, width, height};
    }

    /// Default device camera: 160x120, 69 degree horizontal field of view.
    static CameraIntrinsics default_camera() { return from_hfov(160, 120, 69.0); }
};

/// Unnormalized camera-frame ray through the center of pixel (u, v), z = 1.
template <typename Scalar>
Vec3<Scalar> pixel_ray(const CameraIntrinsics& k, int u, int v) {
    return {Scalar((u + 0.5 - k.cx) / k.fx), Scalar((v + 0.5 - k.cy) / k.fy), Scalar(1)};
}

/// Pixel coordinates (continuous) of a camera-frame point.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> project(const CameraIntrinsics& k, const Vec3<Scalar>& p_cam) {
    return {Scalar(k.fx) * p_cam.x() / p_cam.z() + Scalar(k.cx),
            Scalar(k.fy) * p_cam.y() / p_cam.z() + Scalar(k.cy)};
}

/// Equirectangular pixel grid, height = width / 2.
///   azimuth   = 2*pi*(u+0.5)/W - pi
///   elevation = pi/2 - pi*(v+0.5)/H
///   dir       = (cos(el)cos(az), cos(el)sin(az), sin(el))
struct EquirectGrid {
    int width = 256;
    int height = 128;

    EquirectGrid() = default;
    explicit EquirectGrid(int w) : width(w), height(w / 2) {
        if (w < 2 || w % 2 != 0) throw InvalidArgument("equirect width must be even and >= 2");
    }

    int pixel_count() const { return width * height; }
    int index(int u, int v) const { return v * width + u; }

    friend bool operator==(const EquirectGrid&, const EquirectGrid&) = default;
};

template <typename Scalar = double>
Vec3<Scalar> pixel_to_dir(const EquirectGrid& grid, int u, int v) {
    if (u < 0 || u >= grid.width || v < 0 || v >= grid.height)
        throw InvalidArgument("equirect pixel index out of range");
    constexpr Scalar pi = std::numbers::pi_v<Scalar>;
    const Scalar az = Scalar(2) * pi * (Scalar(u) + Scalar(0.5)) / Scalar(grid.width) - pi;
    const Scalar el = pi / Scalar(2) - pi * (Scalar(v) + Scalar(0.5)) / Scalar(grid.height);
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

/// Maps a unit direction to its pixel. Indices are clamped to the grid.
template <typename Scalar>
std::pair<int, int> dir_to_pixel(const EquirectGrid& grid, const Vec3<Scalar>& d) {
    constexpr double pi = std::numbers::pi;
    const double az = std::atan2(double(d.y()), double(d.x()));
    const double el = std::asin(std::clamp(double(d.z()), -1.0, 1.0));
    int u = static_cast<int>(std::floor((az + pi) / (2 * pi) * grid.width));
    int v = static_cast<int>(std::floor((pi / 2 - el) / pi * grid.height));
    u = std::clamp(u, 0, grid.width - 1);
    v = std::clamp(v, 0, grid.height - 1);
    return {u, v};
}

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

}  // namespace sctx

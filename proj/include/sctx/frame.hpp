#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>

#include "sctx/geometry.hpp"

namespace sctx {

/// Row-major per-pixel color buffer; row index is v * width + u.
using ColorBuffer = Eigen::Matrix<float, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// One RGB-D observation. Depth is camera-frame z in meters; pixels without a
/// surface hit hold kInvalidDepth (NaN).
struct RGBDFrame {
    static constexpr float kInvalidDepth = std::numeric_limits<float>::quiet_NaN();

    ColorBuffer rgb;
    Eigen::VectorXf depth;
    Posed pose;
    CameraIntrinsics intrinsics;
    double timestamp = 0.0;
    std::uint32_t user_id = 0;

    RGBDFrame() = default;

    /// Allocates buffers for `k`, all pixels invalid and black.
    explicit RGBDFrame(const CameraIntrinsics& k)
        : rgb(ColorBuffer::Zero(std::size_t(k.width) * k.height, 3)),
          depth(Eigen::VectorXf::Constant(std::size_t(k.width) * k.height, kInvalidDepth)),
          intrinsics(k) {}

    int width() const { return intrinsics.width; }
    int height() const { return intrinsics.height; }
    Eigen::Index index(int u, int v) const { return Eigen::Index(v) * intrinsics.width + u; }

    static bool depth_valid(float d) { return std::isfinite(d) && d > 0.0f; }

    /// Buffer sizes agree with the intrinsics.
    bool consistent() const {
        const auto n = Eigen::Index(intrinsics.width) * intrinsics.height;
        return intrinsics.valid() && rgb.rows() == n && depth.size() == n;
    }
};

}  // namespace sctx

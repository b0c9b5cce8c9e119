#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "sctx/frame.hpp"
#include "sctx/geometry.hpp"

namespace sctx {

/// Equirectangular radiance panorama centered at `anchor`. Invalid pixels
/// carry the hole color.
struct EnvMap {
    EquirectGrid grid;
    ColorBuffer rgb;                  // grid.pixel_count() rows
    std::vector<std::uint8_t> valid;  // 1 = supported by an observation
    Vec3d anchor = Vec3d::Zero();

    EnvMap() = default;
    EnvMap(const EquirectGrid& g, const Vec3d& anchor_pos, const Vec3f& fill)
        : grid(g),
          rgb(ColorBuffer(g.pixel_count(), 3)),
          valid(std::size_t(g.pixel_count()), 0),
          anchor(anchor_pos) {
        rgb.rowwise() = fill.transpose();
    }

    Eigen::Index index(int u, int v) const { return grid.index(u, v); }
};

}  // namespace sctx

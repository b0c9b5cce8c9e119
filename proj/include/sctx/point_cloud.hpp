#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <vector>

#include "sctx/frame.hpp"
#include "sctx/geometry.hpp"

namespace sctx {

inline constexpr float kDefaultVoxelSize = 0.05f;

/// Integer voxel index, floor(coordinate / voxel_size) per axis.
struct VoxelKey {
    std::int32_t x = 0, y = 0, z = 0;
    friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

/// A fused observation occupying one voxel.
///
/// `position` is the surface point of the voxel's first observation and stays
/// fixed for the life of the voxel. Color, timestamp and source user follow
/// the most recent observation. `first_timestamp`/`first_user` identify the
/// observation that supplied the position.
struct CloudPoint {
    Vec3f position = Vec3f::Zero();
    Vec3f rgb = Vec3f::Zero();
    double timestamp = 0.0;
    std::uint32_t source_user = 0;
    double first_timestamp = 0.0;
    std::uint32_t first_user = 0;

    /// A single raw observation (first == latest).
    static CloudPoint observed(const Vec3f& position, const Vec3f& rgb, double timestamp,
                               std::uint32_t user) {
        return {position, rgb, timestamp, user, timestamp, user};
    }

    friend bool operator==(const CloudPoint&, const CloudPoint&) = default;
};

/// Combines two observations of the same voxel. Commutative, associative and
/// idempotent, so any fold order gives the same result.
///   position: smallest (first_timestamp, first_user, position) wins
///   attributes: latest timestamp wins, then smaller source_user, then
///               lexicographically smaller rgb
CloudPoint merge_voxel_points(const CloudPoint& a, const CloudPoint& b);

/// Voxel-deduplicated colored point set, kept sorted by voxel key.
class PointCloud {
public:
    explicit PointCloud(float voxel_size = kDefaultVoxelSize);

    /// Builds a cloud from arbitrary points, reducing each voxel with
    /// merge_voxel_points.
    static PointCloud from_points(std::vector<CloudPoint> points,
                                  float voxel_size = kDefaultVoxelSize);

    float voxel_size() const { return voxel_size_; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    std::span<const CloudPoint> points() const { return points_; }
    std::span<const VoxelKey> keys() const { return keys_; }

    VoxelKey key_of(const Vec3f& p) const;

    /// Removes the `count` points with the oldest timestamps (ties broken by
    /// voxel key order).
    void evict_oldest(std::size_t count);

    friend bool operator==(const PointCloud&, const PointCloud&) = default;

private:
    friend PointCloud voxel_merge(const PointCloud& a, const PointCloud& b);

    float voxel_size_;
    std::vector<VoxelKey> keys_;
    std::vector<CloudPoint> points_;
};

/// Union of two clouds with per-voxel merge_voxel_points.
/// Throws InvalidArgument when voxel sizes differ.
PointCloud voxel_merge(const PointCloud& a, const PointCloud& b);

/// Back-projects every valid depth pixel into world space and voxel
/// deduplicates. Within one frame the lexicographically smallest position of
/// each voxel is kept. Throws InvalidArgument if buffer sizes disagree with
/// the intrinsics.
PointCloud backproject(const RGBDFrame& frame, float voxel_size = kDefaultVoxelSize);

}  // namespace sctx

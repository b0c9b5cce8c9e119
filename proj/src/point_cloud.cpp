#include "sctx/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace sctx {
namespace {

bool lex_less(const Vec3f& a, const Vec3f& b) {
    return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
}

// Strict order on first observations: earlier first.
bool first_before(const CloudPoint& a, const CloudPoint& b) {
    if (a.first_timestamp != b.first_timestamp) return a.first_timestamp < b.first_timestamp;
    if (a.first_user != b.first_user) return a.first_user < b.first_user;
    return lex_less(a.position, b.position);
}

// Strict order on latest observations: true if `a` should win over `b`.
bool latest_wins(const CloudPoint& a, const CloudPoint& b) {
    if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;
    if (a.source_user != b.source_user) return a.source_user < b.source_user;
    return lex_less(a.rgb, b.rgb);
}

}  // namespace

CloudPoint merge_voxel_points(const CloudPoint& a, const CloudPoint& b) {
    const CloudPoint& first = first_before(b, a) ? b : a;
    const CloudPoint& latest = latest_wins(b, a) ? b : a;
    CloudPoint out = latest;
    out.position = first.position;
    out.first_timestamp = first.first_timestamp;
    out.first_user = first.first_user;
    return out;
}

PointCloud::PointCloud(float voxel_size) : voxel_size_(voxel_size) {
    if (!(voxel_size > 0.0f)) throw InvalidArgument("voxel_size must be positive");
}

VoxelKey PointCloud::key_of(const Vec3f& p) const {
    const double s = voxel_size_;
    return {static_cast<std::int32_t>(std::floor(double(p.x()) / s)),
            static_cast<std::int32_t>(std::floor(double(p.y()) / s)),
            static_cast<std::int32_t>(std::floor(double(p.z()) / s))};
}

PointCloud PointCloud::from_points(std::vector<CloudPoint> points, float voxel_size) {
    PointCloud cloud(voxel_size);
    std::vector<VoxelKey> keys(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) keys[i] = cloud.key_of(points[i].position);

    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });

    cloud.keys_.reserve(points.size());
    cloud.points_.reserve(points.size());
    for (std::size_t idx : order) {
        if (!cloud.keys_.empty() && cloud.keys_.back() == keys[idx]) {
            cloud.points_.back() = merge_voxel_points(cloud.points_.back(), points[idx]);
        } else {
            cloud.keys_.push_back(keys[idx]);
            cloud.points_.push_back(points[idx]);
        }
    }
    return cloud;
}

void PointCloud::evict_oldest(std::size_t count) {
    if (count == 0) return;
    if (count >= points_.size()) {
        points_.clear();
        keys_.clear();
        return;
    }
    std::vector<std::size_t> order(points_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Indices are already in key order, so a stable sort breaks ties by key.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return points_[a].timestamp < points_[b].timestamp;
    });
    std::vector<bool> drop(points_.size(), false);
    for (std::size_t i = 0; i < count; ++i) drop[order[i]] = true;

    std::size_t w = 0;
    for (std::size_t r = 0; r < points_.size(); ++r) {
        if (drop[r]) continue;
        points_[w] = points_[r];
        keys_[w] = keys_[r];
        ++w;
    }
    points_.resize(w);
    keys_.resize(w);
}

PointCloud voxel_merge(const PointCloud& a, const PointCloud& b) {
    if (a.voxel_size_ != b.voxel_size_) throw InvalidArgument("voxel_merge: voxel sizes differ");
    PointCloud out(a.voxel_size_);
    out.keys_.reserve(a.size() + b.size());
    out.points_.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a.keys_[i] < b.keys_[j])) {
            out.keys_.push_back(a.keys_[i]);
            out.points_.push_back(a.points_[i++]);
        } else if (i == a.size() || b.keys_[j] < a.keys_[i]) {
            out.keys_.push_back(b.keys_[j]);
            out.points_.push_back(b.points_[j++]);
        } else {
            out.keys_.push_back(a.keys_[i]);
            out.points_.push_back(merge_voxel_points(a.points_[i++], b.points_[j++]));
        }
    }
    return out;
}

PointCloud backproject(const RGBDFrame& frame, float voxel_size) {
    if (!frame.consistent())
        throw InvalidArgument("backproject: intrinsics do not match frame buffers");

    const auto& k = frame.intrinsics;
    const Eigen::Matrix3d rot = frame.pose.rotation_matrix();
    const Vec3d& t = frame.pose.translation;

    std::vector<CloudPoint> raw;
    raw.reserve(std::size_t(frame.depth.size()));
    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            const auto i = frame.index(u, v);
            const float d = frame.depth[i];
            if (!RGBDFrame::depth_valid(d)) continue;
            const Vec3d p_cam = pixel_ray<double>(k, u, v) * double(d);
            const Vec3f p_world = (rot * p_cam + t).cast<float>();
            raw.push_back(CloudPoint::observed(p_world, frame.rgb.row(i).transpose(),
                                               frame.timestamp, frame.user_id));
        }
    }

    // One frame shares timestamp and user, so the lexicographically smallest
    // position represents each voxel.
    PointCloud probe(voxel_size);
    std::vector<std::pair<VoxelKey, std::size_t>> keyed(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) keyed[i] = {probe.key_of(raw[i].position), i};
    std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return lex_less(raw[a.second].position, raw[b.second].position);
    });

    std::vector<CloudPoint> reps;
    reps.reserve(keyed.size());
    for (std::size_t i = 0; i < keyed.size(); ++i) {
        if (i > 0 && keyed[i].first == keyed[i - 1].first) continue;
        reps.push_back(raw[keyed[i].second]);
    }
    return PointCloud::from_points(std::move(reps), voxel_size);
}

}  // namespace sctx

#include "sctx/tasks.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "sctx/codec.hpp"
#include "sctx/context_store.hpp"

namespace sctx {

EnvMap estimate_envmap(const PointCloud& cloud, const Vec3d& anchor, const EquirectGrid& grid,
                       const Vec3f& hole_color, EstimateDiagnostics* diagnostics) {
    EnvMap map(grid, anchor, hole_color);
    const auto n = std::size_t(grid.pixel_count());
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::vector<double> stamp(n, -std::numeric_limits<double>::infinity());

    EstimateDiagnostics diag;
    for (const auto& p : cloud.points()) {
        const Vec3d d = p.position.cast<double>() - anchor;
        const double r = d.norm();
        if (r < 1e-6) {
            ++diag.skipped_coincident;
            continue;
        }
        ++diag.projected;
        const auto [u, v] = dir_to_pixel<double>(grid, d / r);
        const auto i = std::size_t(grid.index(u, v));
        if (r < nearest[i] || (r == nearest[i] && p.timestamp > stamp[i])) {
            nearest[i] = r;
            stamp[i] = p.timestamp;
            map.rgb.row(Eigen::Index(i)) = p.rgb.transpose();
            map.valid[i] = 1;
        }
    }
    if (diagnostics) *diagnostics = diag;
    return map;
}

double psnr(const EnvMap& estimate, const EnvMap& truth) {
    if (!(estimate.grid == truth.grid) || estimate.rgb.rows() != truth.rgb.rows())
        throw InvalidArgument("psnr: environment map dimensions differ");
    const double mse =
        (estimate.rgb.cast<double>() - truth.rgb.cast<double>()).squaredNorm() /
        double(estimate.rgb.size());
    if (mse < 1e-10) return 99.0;
    return 10.0 * std::log10(1.0 / mse);
}

double coverage(const EnvMap& map) {
    if (map.valid.empty()) return 0.0;
    std::size_t count = 0;
    for (auto v : map.valid) count += v ? 1 : 0;
    return double(count) / double(map.valid.size());
}

ReprojectionStats reprojection_error(const EnvMap& estimate, const EnvMap& truth,
                                     double outlier_threshold) {
    if (!(estimate.grid == truth.grid)) throw InvalidArgument("reprojection_error: grid mismatch");
    ReprojectionStats s;
    double sum = 0.0;
    std::size_t outliers = 0;
    for (std::size_t i = 0; i < estimate.valid.size(); ++i) {
        if (!estimate.valid[i]) continue;
        ++s.covered;
        const Eigen::Vector3d e =
            (estimate.rgb.row(Eigen::Index(i)) - truth.rgb.row(Eigen::Index(i))).cast<double>();
        sum += e.squaredNorm();
        if (e.cwiseAbs().maxCoeff() > outlier_threshold) ++outliers;
    }
    if (s.covered > 0) {
        s.mse = sum / (3.0 * double(s.covered));
        s.outlier_fraction = double(outliers) / double(s.covered);
    }
    return s;
}

double estimate_floor_height(const PointCloud& cloud) {
    constexpr double kBin = 0.02;
    constexpr std::size_t kMinPoints = 100;
    if (cloud.size() < kMinPoints)
        throw InvalidArgument("floor height estimation needs at least 100 points, got " +
                              std::to_string(cloud.size()));
    std::map<long long, std::size_t> histogram;
    for (const auto& p : cloud.points())
        ++histogram[static_cast<long long>(std::floor(double(p.position.z()) / kBin))];
    const double threshold = 0.05 * double(cloud.size());
    for (const auto& [bin, count] : histogram)
        if (double(count) >= threshold) return (double(bin) + 0.5) * kBin;
    throw InvalidArgument("no height bin holds 5% of the points");
}

void write_ppm(std::ostream& out, const EnvMap& map) {
    out << "P6\n" << map.grid.width << " " << map.grid.height << "\n255\n";
    std::vector<char> row;
    row.reserve(std::size_t(map.rgb.rows()) * 3);
    for (Eigen::Index i = 0; i < map.rgb.rows(); ++i)
        for (int c = 0; c < 3; ++c) row.push_back(char(quantize_channel(map.rgb(i, c))));
    out.write(row.data(), std::streamsize(row.size()));
}

void write_pgm_mask(std::ostream& out, const EnvMap& map) {
    out << "P5\n" << map.grid.width << " " << map.grid.height << "\n255\n";
    std::vector<char> data(map.valid.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = map.valid[i] ? char(255) : char(0);
    out.write(data.data(), std::streamsize(data.size()));
}

FloorHeightTask::FloorHeightTask(ContextStore& store, std::uint32_t requester)
    : store_(store),
      requester_(requester),
      subscription_(store.subscribe(ContextKind::SparsePointCloud)) {}

FloorHeightTask::~FloorHeightTask() = default;

std::size_t FloorHeightTask::update() {
    std::size_t recomputed = 0;
    for (const auto& n : subscription_->poll()) {
        if (n.key != ContextKey::shared_cloud() || n.version <= version_) continue;
        const ContextEntry entry = store_.get(n.key, requester_);
        // Later notifications may already be folded into this snapshot.
        if (entry.version <= version_) continue;
        version_ = entry.version;
        const auto& cloud = *std::get<std::shared_ptr<const PointCloud>>(entry.payload);
        if (cloud.size() >= 100) height_ = estimate_floor_height(cloud);
        ++recomputed;
    }
    return recomputed;
}

}  // namespace sctx

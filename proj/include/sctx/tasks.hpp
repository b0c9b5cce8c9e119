#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>

#include "sctx/envmap.hpp"
#include "sctx/point_cloud.hpp"

namespace sctx {

class ContextStore;
class Subscription;

inline const Vec3f kDefaultHoleColor{0.5f, 0.5f, 0.5f};

struct EstimateDiagnostics {
    std::size_t projected = 0;
    std::size_t skipped_coincident = 0;  ///< points within 1e-6 m of the anchor
};

/// Lighting estimation by z-buffer splatting: each point lands on the pixel
/// of its direction from the anchor; per pixel the nearest point wins, ties
/// go to the latest timestamp. Pixels without a point are invalid and filled
/// with `hole_color`.
EnvMap estimate_envmap(const PointCloud& cloud, const Vec3d& anchor, const EquirectGrid& grid,
                       const Vec3f& hole_color = kDefaultHoleColor,
                       EstimateDiagnostics* diagnostics = nullptr);

/// PSNR in dB over all pixels and channels for radiance in [0, 1]; 99 dB
/// when MSE < 1e-10. Throws InvalidArgument on grid mismatch.
double psnr(const EnvMap& estimate, const EnvMap& truth);

/// Fraction of valid pixels.
double coverage(const EnvMap& map);

/// Error restricted to the estimate's valid pixels.
struct ReprojectionStats {
    std::size_t covered = 0;
    double mse = 0.0;               ///< over covered pixels and channels
    double outlier_fraction = 0.0;  ///< covered pixels with any channel error > threshold
};

ReprojectionStats reprojection_error(const EnvMap& estimate, const EnvMap& truth,
                                     double outlier_threshold = 0.1);

/// Floor height from a z histogram (0.02 m bins): center of the lowest bin
/// holding at least 5% of the points. Needs at least 100 points.
double estimate_floor_height(const PointCloud& cloud);

/// Binary PPM (P6), 8-bit, value = floor(255 x + 0.5) clamped.
void write_ppm(std::ostream& out, const EnvMap& map);
/// Binary PGM (P5) of the validity mask, 255 = valid.
void write_pgm_mask(std::ostream& out, const EnvMap& map);

/// Floor-height consumer: re-estimates whenever the shared point cloud
/// changes. Runs on the caller's thread via update().
class FloorHeightTask {
public:
    explicit FloorHeightTask(ContextStore& store, std::uint32_t requester = 0);
    ~FloorHeightTask();

    FloorHeightTask(const FloorHeightTask&) = delete;
    FloorHeightTask& operator=(const FloorHeightTask&) = delete;

    /// Drains notifications; recomputes once per new version. Returns the
    /// number of recomputations.
    std::size_t update();

    std::optional<double> floor_height() const { return height_; }
    std::uint64_t version() const { return version_; }

private:
    ContextStore& store_;
    std::uint32_t requester_;
    std::unique_ptr<Subscription> subscription_;
    std::optional<double> height_;
    std::uint64_t version_ = 0;
};

}  // namespace sctx

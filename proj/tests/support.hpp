#pragma once

#include <cmath>
#include <vector>

#include "sctx/frame.hpp"
#include "sctx/point_cloud.hpp"
#include "sctx/rng.hpp"

namespace sctx::test {

/// Random raw observations inside a small cube, so voxels collide often.
inline std::vector<CloudPoint> random_observations(Rng& rng, int count, double extent,
                                                   double t0 = 0.0) {
    std::vector<CloudPoint> pts;
    for (int i = 0; i < count; ++i) {
        const Vec3f p(float(rng.uniform(-extent, extent)), float(rng.uniform(-extent, extent)),
                      float(rng.uniform(-extent, extent)));
        const Vec3f c(float(rng.uniform()), float(rng.uniform()), float(rng.uniform()));
        pts.push_back(CloudPoint::observed(p, c, t0 + rng.uniform(0.0, 100.0),
                                           std::uint32_t(rng.next_u64() % 4)));
    }
    return pts;
}

/// Small frame with random depth (some invalid) and colors under a random pose.
inline RGBDFrame random_frame(Rng& rng, int w, int h, double timestamp, std::uint32_t user) {
    RGBDFrame f(CameraIntrinsics::from_hfov(w, h, 60.0));
    f.timestamp = timestamp;
    f.user_id = user;
    const Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    f.pose.rotation = q.normalized();
    f.pose.translation = Vec3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    for (Eigen::Index i = 0; i < f.depth.size(); ++i) {
        f.depth[i] = rng.uniform() < 0.1 ? RGBDFrame::kInvalidDepth : float(rng.uniform(0.3, 2.0));
        for (int c = 0; c < 3; ++c) f.rgb(i, c) = float(rng.uniform());
    }
    return f;
}

}  // namespace sctx::test

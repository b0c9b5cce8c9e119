#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sctx/error.hpp"
#include "sctx/frame.hpp"
#include "sctx/point_cloud.hpp"

namespace sctx {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Distinguishable decode and protocol failures. Values double as the ERROR
/// message code on the wire.
enum class ProtocolErrorCode : std::uint8_t {
    Truncated = 1,
    BadMagic = 2,
    UnknownType = 3,
    LengthMismatch = 4,
    SequenceViolation = 5,
    AccessDenied = 6,
    InvalidPayload = 7,
    UnsupportedKind = 8,
};

const char* to_string(ProtocolErrorCode code);

class ProtocolError : public Error {
public:
    ProtocolError(ProtocolErrorCode code, const std::string& what)
        : Error(std::string(to_string(code)) + ": " + what), code_(code) {}
    ProtocolErrorCode code() const { return code_; }

private:
    ProtocolErrorCode code_;
};

/// Little-endian byte writer.
class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void f64(double v);
    void bytes(ByteView v) { out_.insert(out_.end(), v.begin(), v.end()); }
    void reserve(std::size_t n) { out_.reserve(n); }

    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

/// Little-endian byte reader; throws ProtocolError(Truncated) past the end.
class ByteReader {
public:
    explicit ByteReader(ByteView in) : in_(in) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    ByteView bytes(std::size_t n);

    std::size_t remaining() const { return in_.size() - pos_; }

private:
    void need(std::size_t n) const;

    ByteView in_;
    std::size_t pos_ = 0;
};

/// Color channel to byte, round half up: floor(255 x + 0.5), clamped.
std::uint8_t quantize_channel(float x);

// Blob magics, 5 bytes each.
inline constexpr char kCloudMagic[] = "SCTX1";
inline constexpr char kFrameMagic[] = "SFRM1";
inline constexpr char kAnchorMagic[] = "SANC1";
inline constexpr char kDeviceMagic[] = "SDEV1";
inline constexpr std::size_t kMagicSize = 5;

/// Reads the 5-byte magic at the start of a blob, empty if too short.
std::string blob_magic(ByteView blob);

// --- Sparse point cloud -----------------------------------------------------
// "SCTX1" | voxel_size f32 | color_bits u8 (= 8) | count u32
// | count x (x y z f32, r g b u8)

inline constexpr std::uint8_t kCloudColorBits = 8;
inline constexpr std::size_t kCloudHeaderBytes = 14;
inline constexpr std::size_t kCloudPointBytes = 15;

inline std::size_t cloud_blob_size(std::size_t points) {
    return kCloudHeaderBytes + kCloudPointBytes * points;
}

Bytes encode_cloud(const PointCloud& cloud);
/// Decoded points carry timestamp 0 and source user 0.
PointCloud decode_cloud(ByteView blob);

// --- RGB-D frame --------------------------------------------------------------
// "SFRM1" | user u32 | timestamp f64 | qw qx qy qz tx ty tz f64 | fx fy cx cy f64
// | width u32 | height u32 | rgb u8 x 3wh | depth f32 x wh (NaN = no hit)

inline constexpr std::size_t kFrameHeaderBytes = 5 + 4 + 8 + 7 * 8 + 4 * 8 + 4 + 4;

inline std::size_t frame_blob_size(int width, int height) {
    return kFrameHeaderBytes + 7 * std::size_t(width) * std::size_t(height);
}

Bytes encode_frame(const RGBDFrame& frame);
RGBDFrame decode_frame(ByteView blob);

// --- Anchors -------------------------------------------------------------------
// "SANC1" | count u32 | count x (id u32, x y z f32)

struct Anchor {
    std::uint32_t id = 0;
    Vec3f position = Vec3f::Zero();
    friend bool operator==(const Anchor&, const Anchor&) = default;
};

inline std::size_t anchors_blob_size(std::size_t n) { return kMagicSize + 4 + 16 * n; }

Bytes encode_anchors(std::span<const Anchor> anchors);
/// Throws ProtocolError(InvalidPayload) on duplicate ids.
std::vector<Anchor> decode_anchors(ByteView blob);

// --- Device metadata ---------------------------------------------------------------
// "SDEV1" | fx fy cx cy f64 | width u32 | height u32 | model length u32 | model bytes

struct DeviceMeta {
    std::string model;
    CameraIntrinsics intrinsics;
};

inline std::size_t device_blob_size(const DeviceMeta& m) {
    return kMagicSize + 4 * 8 + 4 + 4 + 4 + m.model.size();
}

Bytes encode_device_meta(const DeviceMeta& meta);
DeviceMeta decode_device_meta(ByteView blob);

}  // namespace sctx

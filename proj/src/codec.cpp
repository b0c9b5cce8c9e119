#include "sctx/codec.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <set>

namespace sctx {

const char* to_string(ProtocolErrorCode code) {
    switch (code) {
        case ProtocolErrorCode::Truncated: return "truncated";
        case ProtocolErrorCode::BadMagic: return "bad magic";
        case ProtocolErrorCode::UnknownType: return "unknown message type";
        case ProtocolErrorCode::LengthMismatch: return "length mismatch";
        case ProtocolErrorCode::SequenceViolation: return "sequence violation";
        case ProtocolErrorCode::AccessDenied: return "access denied";
        case ProtocolErrorCode::InvalidPayload: return "invalid payload";
        case ProtocolErrorCode::UnsupportedKind: return "unsupported kind";
    }
    return "unknown error";
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteReader::need(std::size_t n) const {
    if (remaining() < n)
        throw ProtocolError(ProtocolErrorCode::Truncated,
                            "needed " + std::to_string(n) + " bytes, have " +
                                std::to_string(remaining()));
}

std::uint8_t ByteReader::u8() {
    need(1);
    return in_[pos_++];
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

ByteView ByteReader::bytes(std::size_t n) {
    need(n);
    ByteView v = in_.subspan(pos_, n);
    pos_ += n;
    return v;
}

std::uint8_t quantize_channel(float x) {
    const double q = std::floor(double(x) * 255.0 + 0.5);
    if (!(q > 0.0)) return 0;
    if (q > 255.0) return 255;
    return std::uint8_t(q);
}

std::string blob_magic(ByteView blob) {
    if (blob.size() < kMagicSize) return {};
    return std::string(reinterpret_cast<const char*>(blob.data()), kMagicSize);
}

namespace {

void write_magic(ByteWriter& w, const char* magic) {
    w.bytes(ByteView(reinterpret_cast<const std::uint8_t*>(magic), kMagicSize));
}

void expect_magic(ByteReader& r, const char* magic) {
    const ByteView m = r.bytes(kMagicSize);
    if (std::memcmp(m.data(), magic, kMagicSize) != 0)
        throw ProtocolError(ProtocolErrorCode::BadMagic, std::string("expected ") + magic);
}

void expect_end(const ByteReader& r, const char* what) {
    if (r.remaining() != 0)
        throw ProtocolError(ProtocolErrorCode::LengthMismatch,
                            std::to_string(r.remaining()) + " trailing bytes after " + what);
}

void write_intrinsics(ByteWriter& w, const CameraIntrinsics& k) {
    w.f64(k.fx);
    w.f64(k.fy);
    w.f64(k.cx);
    w.f64(k.cy);
    w.u32(std::uint32_t(k.width));
    w.u32(std::uint32_t(k.height));
}

CameraIntrinsics read_intrinsics(ByteReader& r) {
    CameraIntrinsics k;
    k.fx = r.f64();
    k.fy = r.f64();
    k.cx = r.f64();
    k.cy = r.f64();
    const std::uint32_t w = r.u32();
    const std::uint32_t h = r.u32();
    if (w == 0 || h == 0 || w > 1u << 15 || h > 1u << 15)
        throw ProtocolError(ProtocolErrorCode::InvalidPayload, "image dimensions out of range");
    k.width = int(w);
    k.height = int(h);
    return k;
}

}  // namespace

Bytes encode_cloud(const PointCloud& cloud) {
    ByteWriter w;
    w.reserve(cloud_blob_size(cloud.size()));
    write_magic(w, kCloudMagic);
    w.f32(cloud.voxel_size());
    w.u8(kCloudColorBits);
    w.u32(std::uint32_t(cloud.size()));
    for (const auto& p : cloud.points()) {
        w.f32(p.position.x());
        w.f32(p.position.y());
        w.f32(p.position.z());
        for (int c = 0; c < 3; ++c) w.u8(quantize_channel(p.rgb[c]));
    }
    return w.take();
}

PointCloud decode_cloud(ByteView blob) {
    ByteReader r(blob);
    expect_magic(r, kCloudMagic);
    const float voxel = r.f32();
    const std::uint8_t bits = r.u8();
    const std::uint32_t count = r.u32();
    if (!(voxel > 0.0f) || !std::isfinite(voxel))
        throw ProtocolError(ProtocolErrorCode::InvalidPayload, "voxel size must be positive");
    if (bits != kCloudColorBits)
        throw ProtocolError(ProtocolErrorCode::InvalidPayload,
                            "unsupported color depth " + std::to_string(bits));
    if (r.remaining() != std::size_t(count) * kCloudPointBytes)
        throw ProtocolError(r.remaining() < std::size_t(count) * kCloudPointBytes
                                ? ProtocolErrorCode::Truncated
                                : ProtocolErrorCode::LengthMismatch,
                            "cloud point count disagrees with blob size");
    std::vector<CloudPoint> points;
    points.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Vec3f pos;
        pos.x() = r.f32();
        pos.y() = r.f32();
        pos.z() = r.f32();
        if (!pos.allFinite())
            throw ProtocolError(ProtocolErrorCode::InvalidPayload, "non-finite point position");
        Vec3f rgb;
        for (int c = 0; c < 3; ++c) rgb[c] = float(r.u8() / 255.0);
        points.push_back(CloudPoint::observed(pos, rgb, 0.0, 0));
    }
    return PointCloud::from_points(std::move(points), voxel);
}

Bytes encode_frame(const RGBDFrame& frame) {
    if (!frame.consistent()) throw InvalidArgument("encode_frame: inconsistent frame buffers");
    ByteWriter w;
    w.reserve(frame_blob_size(frame.width(), frame.height()));
    write_magic(w, kFrameMagic);
    w.u32(frame.user_id);
    w.f64(frame.timestamp);
    const auto& q = frame.pose.rotation;
    const auto& t = frame.pose.translation;
    for (double v : {q.w(), q.x(), q.y(), q.z(), t.x(), t.y(), t.z()}) w.f64(v);
    write_intrinsics(w, frame.intrinsics);
    for (Eigen::Index i = 0; i < frame.rgb.rows(); ++i)
        for (int c = 0; c < 3; ++c) w.u8(quantize_channel(frame.rgb(i, c)));
    for (Eigen::Index i = 0; i < frame.depth.size(); ++i) w.f32(frame.depth[i]);
    return w.take();
}

RGBDFrame decode_frame(ByteView blob) {
    ByteReader r(blob);
    expect_magic(r, kFrameMagic);
    const std::uint32_t user = r.u32();
    const double timestamp = r.f64();
    double pose[7];
    for (double& v : pose) v = r.f64();
    const CameraIntrinsics k = read_intrinsics(r);
    if (!k.valid()) throw ProtocolError(ProtocolErrorCode::InvalidPayload, "invalid intrinsics");
    const std::size_t n = std::size_t(k.width) * std::size_t(k.height);
    if (r.remaining() != 7 * n)
        throw ProtocolError(r.remaining() < 7 * n ? ProtocolErrorCode::Truncated
                                                  : ProtocolErrorCode::LengthMismatch,
                            "frame pixel data disagrees with dimensions");

    RGBDFrame frame(k);
    frame.user_id = user;
    frame.timestamp = timestamp;
    frame.pose.rotation = Eigen::Quaterniond(pose[0], pose[1], pose[2], pose[3]);
    frame.pose.translation = Vec3d(pose[4], pose[5], pose[6]);
    if (!(std::abs(frame.pose.rotation.norm() - 1.0) < 1e-6))
        throw ProtocolError(ProtocolErrorCode::InvalidPayload, "pose quaternion is not unit");
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) frame.rgb(Eigen::Index(i), c) = float(r.u8() / 255.0);
    for (std::size_t i = 0; i < n; ++i) {
        const float d = r.f32();
        frame.depth[Eigen::Index(i)] = RGBDFrame::depth_valid(d) ? d : RGBDFrame::kInvalidDepth;
    }
    return frame;
}

Bytes encode_anchors(std::span<const Anchor> anchors) {
    ByteWriter w;
    write_magic(w, kAnchorMagic);
    w.u32(std::uint32_t(anchors.size()));
    for (const auto& a : anchors) {
        w.u32(a.id);
        w.f32(a.position.x());
        w.f32(a.position.y());
        w.f32(a.position.z());
    }
    return w.take();
}

std::vector<Anchor> decode_anchors(ByteView blob) {
    ByteReader r(blob);
    expect_magic(r, kAnchorMagic);
    const std::uint32_t count = r.u32();
    if (r.remaining() != std::size_t(count) * 16)
        throw ProtocolError(r.remaining() < std::size_t(count) * 16
                                ? ProtocolErrorCode::Truncated
                                : ProtocolErrorCode::LengthMismatch,
                            "anchor count disagrees with blob size");
    std::vector<Anchor> out(count);
    std::set<std::uint32_t> ids;
    for (auto& a : out) {
        a.id = r.u32();
        a.position.x() = r.f32();
        a.position.y() = r.f32();
        a.position.z() = r.f32();
        if (!ids.insert(a.id).second)
            throw ProtocolError(ProtocolErrorCode::InvalidPayload, "duplicate anchor id");
    }
    return out;
}

Bytes encode_device_meta(const DeviceMeta& meta) {
    ByteWriter w;
    write_magic(w, kDeviceMagic);
    write_intrinsics(w, meta.intrinsics);
    w.u32(std::uint32_t(meta.model.size()));
    w.bytes(ByteView(reinterpret_cast<const std::uint8_t*>(meta.model.data()), meta.model.size()));
    return w.take();
}

DeviceMeta decode_device_meta(ByteView blob) {
    ByteReader r(blob);
    expect_magic(r, kDeviceMagic);
    DeviceMeta meta;
    meta.intrinsics = read_intrinsics(r);
    const std::uint32_t len = r.u32();
    const ByteView model = r.bytes(len);
    meta.model.assign(reinterpret_cast<const char*>(model.data()), model.size());
    expect_end(r, "device metadata");
    return meta;
}

}  // namespace sctx

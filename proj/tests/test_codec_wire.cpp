#include <doctest.h>

#include <cmath>
#include <cstring>

#include "sctx/codec.hpp"
#include "sctx/wire.hpp"
#include "support.hpp"

using namespace sctx;

namespace {

Bytes bytes_of(std::initializer_list<int> v) {
    Bytes out;
    for (int b : v) out.push_back(std::uint8_t(b));
    return out;
}

ProtocolErrorCode decode_error(ByteView frame) {
    try {
        decode(frame);
    } catch (const ProtocolError& e) {
        return e.code();
    }
    FAIL("decode accepted a malformed frame");
    return ProtocolErrorCode::Truncated;
}

Message random_message(Rng& rng) {
    Message m;
    m.type = MessageType(1 + rng.next_u64() % 5);
    m.payload.resize(std::size_t(rng.next_u64() % 300));
    for (auto& b : m.payload) b = std::uint8_t(rng.next_u64());
    return m;
}

// Byte value an 8-bit channel must carry, computed independently of the codec.
int expected_byte(float x) {
    const double v = std::floor(255.0 * double(x) + 0.5);
    return int(std::clamp(v, 0.0, 255.0));
}

}  // namespace

TEST_CASE("hand-computed wire bytes") {
    CHECK(encode(make_hello(7)) == bytes_of({0x05, 0, 0, 0, 0x01, 0x07, 0, 0, 0}));

    const Bytes empty = encode_cloud(PointCloud(0.05f));
    CHECK(empty.size() == 14);
    CHECK(empty == bytes_of({'S', 'C', 'T', 'X', '1', 0xCD, 0xCC, 0x4C, 0x3D, 8, 0, 0, 0, 0}));
    CHECK(encode(make_publish(empty)) == bytes_of({0x0F, 0, 0, 0, 0x02, 'S', 'C', 'T', 'X', '1', 0xCD,
                                                   0xCC, 0x4C, 0x3D, 8, 0, 0, 0, 0}));

    const PointCloud one = PointCloud::from_points(
        {CloudPoint::observed({1, 2, 3}, {1.0f, 0.0f, 0.5f}, 0.0, 0)}, 0.05f);
    CHECK(encode_cloud(one) == bytes_of({'S', 'C', 'T', 'X', '1', 0xCD, 0xCC, 0x4C, 0x3D, 8, 1, 0, 0,
                                         0, 0, 0, 0x80, 0x3F, 0, 0, 0, 0x40, 0, 0, 0x40, 0x40, 0xFF,
                                         0x00, 0x80}));
    CHECK(cloud_blob_size(1) == 29);
}

TEST_CASE("channel quantization rounds half up") {
    CHECK(quantize_channel(0.0f) == 0);
    CHECK(quantize_channel(1.0f) == 255);
    CHECK(quantize_channel(0.5f) == 128);
    CHECK(quantize_channel(-0.2f) == 0);
    CHECK(quantize_channel(1.7f) == 255);
    Rng rng(2);
    for (int i = 0; i < 10000; ++i) {
        const float x = float(rng.uniform(-0.1, 1.1));
        CHECK(int(quantize_channel(x)) == expected_byte(x));
    }
}

TEST_CASE("cloud round trip within quantization") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const float voxel = float(rng.uniform(0.01, 0.2));
        const PointCloud c = PointCloud::from_points(test::random_observations(rng, 300, 2.0), voxel);
        const Bytes blob = encode_cloud(c);
        CHECK(blob.size() == cloud_blob_size(c.size()));
        const PointCloud d = decode_cloud(blob);
        CHECK(d.voxel_size() == voxel);
        REQUIRE(d.size() == c.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
            const auto& a = c.points()[i];
            const auto& b = d.points()[i];
            CHECK(a.position == b.position);
            CHECK(c.keys()[i] == d.keys()[i]);
            for (int ch = 0; ch < 3; ++ch) {
                CHECK(std::abs(a.rgb[ch] - b.rgb[ch]) <= 1.0f / 510.0f + 1e-6f);
                CHECK(b.rgb[ch] == float(expected_byte(a.rgb[ch])) / 255.0f);
            }
            CHECK(b.timestamp == 0.0);
            CHECK(b.source_user == 0);
        }
        CHECK(encode_cloud(d) == blob);
    }
}

TEST_CASE("blob decoders reject malformed input") {
    Bytes blob = encode_cloud(PointCloud::from_points(
        {CloudPoint::observed({1, 2, 3}, {1, 0, 0}, 0, 0)}, 0.05f));
    auto code_of = [](auto&& fn) {
        try {
            fn();
        } catch (const ProtocolError& e) {
            return e.code();
        }
        return ProtocolErrorCode(0);
    };
    Bytes bad = blob;
    bad[4] = '2';
    CHECK(code_of([&] { decode_cloud(bad); }) == ProtocolErrorCode::BadMagic);
    CHECK(code_of([&] { decode_cloud(ByteView(blob).first(20)); }) == ProtocolErrorCode::Truncated);
    bad = blob;
    bad.push_back(0);
    CHECK(code_of([&] { decode_cloud(bad); }) == ProtocolErrorCode::LengthMismatch);
    bad = blob;
    bad[9] = 16;
    CHECK(code_of([&] { decode_cloud(bad); }) == ProtocolErrorCode::InvalidPayload);
    CHECK(code_of([&] { decode_frame(blob); }) == ProtocolErrorCode::BadMagic);
    CHECK(blob_magic(blob) == "SCTX1");
    CHECK(blob_magic(ByteView(blob).first(3)).empty());

    const std::vector<Anchor> dup{{1, {0, 0, 0}}, {1, {1, 1, 1}}};
    CHECK(code_of([&] { decode_anchors(encode_anchors(dup)); }) == ProtocolErrorCode::InvalidPayload);
}

TEST_CASE("frame, anchor and device blobs round trip") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const RGBDFrame f = test::random_frame(rng, 12, 9, rng.uniform(0, 10), std::uint32_t(trial));
        const Bytes blob = encode_frame(f);
        CHECK(blob.size() == frame_blob_size(12, 9));
        const RGBDFrame g = decode_frame(blob);
        CHECK(g.user_id == f.user_id);
        CHECK(g.timestamp == f.timestamp);
        CHECK(g.pose.rotation.coeffs() == f.pose.rotation.coeffs());
        CHECK(g.pose.translation == f.pose.translation);
        CHECK(g.intrinsics.fx == f.intrinsics.fx);
        CHECK(g.intrinsics.cy == f.intrinsics.cy);
        CHECK(g.width() == 12);
        CHECK(g.height() == 9);
        for (Eigen::Index i = 0; i < f.depth.size(); ++i) {
            if (std::isnan(f.depth[i]))
                CHECK(std::isnan(g.depth[i]));
            else
                CHECK(g.depth[i] == f.depth[i]);
            for (int c = 0; c < 3; ++c)
                CHECK(g.rgb(i, c) == float(expected_byte(f.rgb(i, c))) / 255.0f);
        }
        CHECK(encode_frame(g) == blob);
    }

    const std::vector<Anchor> anchors{{3, {0.5f, -1, 2}}, {9, {0, 0, 0.25f}}};
    const Bytes ab = encode_anchors(anchors);
    CHECK(ab.size() == anchors_blob_size(2));
    CHECK(decode_anchors(ab) == anchors);

    const DeviceMeta meta{"pixel-sim", CameraIntrinsics::default_camera()};
    const Bytes db = encode_device_meta(meta);
    CHECK(db.size() == device_blob_size(meta));
    const DeviceMeta back = decode_device_meta(db);
    CHECK(back.model == meta.model);
    CHECK(back.intrinsics.fx == meta.intrinsics.fx);
    CHECK(back.intrinsics.width == 160);
    CHECK(back.intrinsics.height == 120);
}

TEST_CASE("message round trip over 1000 random messages") {
    Rng rng(6);
    std::vector<Message> sent;
    Bytes stream;
    for (int i = 0; i < 1000; ++i) {
        const Message m = random_message(rng);
        const Bytes wire = encode(m);
        REQUIRE(wire.size() == kWireHeaderBytes + m.payload.size());
        std::uint32_t len;
        std::memcpy(&len, wire.data(), 4);
        CHECK(len == 1 + m.payload.size());
        CHECK(decode(wire) == m);
        sent.push_back(m);
        stream.insert(stream.end(), wire.begin(), wire.end());
    }
    // Same messages through the incremental decoder in random-sized chunks.
    FrameDecoder dec;
    std::vector<Message> got;
    std::size_t pos = 0;
    while (pos < stream.size()) {
        const std::size_t n = std::min<std::size_t>(stream.size() - pos, 1 + rng.next_u64() % 97);
        dec.feed(ByteView(stream).subspan(pos, n));
        pos += n;
        while (auto m = dec.next()) got.push_back(std::move(*m));
    }
    CHECK(dec.buffered() == 0);
    CHECK(got == sent);
}

TEST_CASE("decode errors are distinguishable") {
    const Bytes hello = encode(make_hello(7));
    for (std::size_t n = 0; n < hello.size(); ++n)
        CHECK(decode_error(ByteView(hello).first(n)) == ProtocolErrorCode::Truncated);

    Bytes zero = bytes_of({0, 0, 0, 0, 1});
    CHECK(decode_error(zero) == ProtocolErrorCode::LengthMismatch);
    Bytes trailing = hello;
    trailing.push_back(0);
    CHECK(decode_error(trailing) == ProtocolErrorCode::LengthMismatch);
    Bytes huge = bytes_of({0xFF, 0xFF, 0xFF, 0x7F, 1});
    CHECK(decode_error(huge) == ProtocolErrorCode::LengthMismatch);
    for (int t : {0, 6, 0xFF}) {
        Bytes b = hello;
        b[4] = std::uint8_t(t);
        CHECK(decode_error(b) == ProtocolErrorCode::UnknownType);
    }

    FrameDecoder dec;
    dec.feed(bytes_of({0x02, 0, 0, 0, 0x09}));
    CHECK_THROWS_AS(dec.next(), ProtocolError);
}

TEST_CASE("typed payloads") {
    CHECK(parse_hello(make_hello(0xDEADBEEF)) == 0xDEADBEEF);
    CHECK_THROWS_AS(parse_hello(Message{MessageType::Hello, {1, 2}}), ProtocolError);
    CHECK_THROWS_AS(parse_hello(make_publish({})), ProtocolError);

    const FetchRequest shared{};
    CHECK(make_fetch(shared).payload.size() == 1);
    CHECK(parse_fetch(make_fetch(shared)) == shared);
    const FetchRequest scoped{ContextKind::DeviceMeta, 4};
    CHECK(make_fetch(scoped).payload == bytes_of({3, 4, 0, 0, 0}));
    CHECK(parse_fetch(make_fetch(scoped)) == scoped);
    try {
        parse_fetch(Message{MessageType::Fetch, {9}});
        FAIL("accepted kind 9");
    } catch (const ProtocolError& e) {
        CHECK(e.code() == ProtocolErrorCode::UnsupportedKind);
    }

    const SnapshotReply reply{ContextKind::SparsePointCloud, 42, encode_cloud(PointCloud())};
    const Message sm = make_snapshot(reply);
    CHECK(sm.payload.size() == 1 + 8 + 14);
    CHECK(parse_snapshot(sm) == reply);
    const SnapshotReply ack{ContextKind::Anchors, 3, {}};
    CHECK(parse_snapshot(make_snapshot(ack)) == ack);

    for (int c = 1; c <= 8; ++c) {
        const auto code = ProtocolErrorCode(c);
        CHECK(parse_error(make_error(code)) == code);
        CHECK(std::string(to_string(code)).size() > 0);
    }
    CHECK_THROWS_AS(parse_error(Message{MessageType::Error, {0}}), ProtocolError);
}

TEST_CASE("decoder survives fuzzed streams") {
    Rng rng(8);
    for (int trial = 0; trial < 2000; ++trial) {
        Bytes wire = encode(random_message(rng));
        switch (rng.next_u64() % 3) {
            case 0: wire.resize(std::size_t(rng.next_u64() % wire.size())); break;
            case 1: wire[std::size_t(rng.next_u64() % wire.size())] ^= std::uint8_t(1 + rng.next_u64() % 255); break;
            default: {
                const std::uint32_t len = std::uint32_t(rng.next_u64());
                std::memcpy(wire.data(), &len, 4);
            }
        }
        FrameDecoder dec;
        dec.feed(wire);
        try {
            while (dec.next()) {
            }
        } catch (const ProtocolError&) {
        }
        try {
            decode(wire);
        } catch (const ProtocolError&) {
        }
        try {
            decode_cloud(wire);
        } catch (const ProtocolError&) {
        }
        try {
            decode_frame(wire);
        } catch (const ProtocolError&) {
        }
    }
}

#include "sctx/wire.hpp"

namespace sctx {

const char* to_string(MessageType type) {
    switch (type) {
        case MessageType::Hello: return "HELLO";
        case MessageType::Publish: return "PUBLISH";
        case MessageType::Fetch: return "FETCH";
        case MessageType::Snapshot: return "SNAPSHOT";
        case MessageType::Error: return "ERROR";
    }
    return "UNKNOWN";
}

namespace {

bool known_type(std::uint8_t t) { return t >= 0x01 && t <= 0x05; }

void check_length(std::uint32_t length) {
    if (length == 0)
        throw ProtocolError(ProtocolErrorCode::LengthMismatch, "length field must cover the type byte");
    if (length > kMaxMessageLength)
        throw ProtocolError(ProtocolErrorCode::LengthMismatch,
                            "length field " + std::to_string(length) + " exceeds the maximum");
}

void expect_type(const Message& msg, MessageType type) {
    if (msg.type != type)
        throw ProtocolError(ProtocolErrorCode::InvalidPayload,
                            std::string("expected ") + to_string(type) + ", got " +
                                to_string(msg.type));
}

ContextKind read_kind(std::uint8_t k) {
    if (k >= kContextKindCount)
        throw ProtocolError(ProtocolErrorCode::UnsupportedKind,
                            "context kind " + std::to_string(k));
    return ContextKind(k);
}

}  // namespace

Bytes encode(const Message& msg) {
    if (msg.payload.size() + 1 > kMaxMessageLength)
        throw InvalidArgument("message payload too large");
    ByteWriter w;
    w.reserve(kWireHeaderBytes + msg.payload.size());
    w.u32(std::uint32_t(msg.payload.size() + 1));
    w.u8(std::uint8_t(msg.type));
    w.bytes(msg.payload);
    return w.take();
}

Message decode(ByteView frame) {
    ByteReader r(frame);
    const std::uint32_t length = r.u32();
    check_length(length);
    if (r.remaining() < length)
        throw ProtocolError(ProtocolErrorCode::Truncated,
                            "frame declares " + std::to_string(length) + " bytes, " +
                                std::to_string(r.remaining()) + " present");
    if (r.remaining() > length)
        throw ProtocolError(ProtocolErrorCode::LengthMismatch, "trailing bytes after frame");
    const std::uint8_t type = r.u8();
    if (!known_type(type))
        throw ProtocolError(ProtocolErrorCode::UnknownType, "type byte " + std::to_string(type));
    const ByteView payload = r.bytes(length - 1);
    return {MessageType(type), Bytes(payload.begin(), payload.end())};
}

void FrameDecoder::feed(ByteView bytes) { buffer_.insert(buffer_.end(), bytes.begin(), bytes.end()); }

std::optional<Message> FrameDecoder::next() {
    if (buffer_.size() < 4) return std::nullopt;
    std::uint32_t length = 0;
    for (int i = 0; i < 4; ++i) length |= std::uint32_t(buffer_[std::size_t(i)]) << (8 * i);
    check_length(length);
    // The type byte can be judged before the payload arrives.
    if (buffer_.size() >= kWireHeaderBytes && !known_type(buffer_[4]))
        throw ProtocolError(ProtocolErrorCode::UnknownType,
                            "type byte " + std::to_string(buffer_[4]));
    if (buffer_.size() < 4 + std::size_t(length)) return std::nullopt;
    Message msg;
    msg.type = MessageType(buffer_[4]);
    msg.payload.assign(buffer_.begin() + kWireHeaderBytes, buffer_.begin() + 4 + length);
    buffer_.erase(buffer_.begin(), buffer_.begin() + 4 + length);
    return msg;
}

Message make_hello(std::uint32_t user_id) {
    ByteWriter w;
    w.u32(user_id);
    return {MessageType::Hello, w.take()};
}

std::uint32_t parse_hello(const Message& msg) {
    expect_type(msg, MessageType::Hello);
    if (msg.payload.size() != 4)
        throw ProtocolError(ProtocolErrorCode::LengthMismatch, "HELLO payload must be 4 bytes");
    return ByteReader(msg.payload).u32();
}

Message make_publish(Bytes blob) { return {MessageType::Publish, std::move(blob)}; }

Message make_fetch(const FetchRequest& request) {
    ByteWriter w;
    w.u8(std::uint8_t(request.kind));
    if (request.scope != kSharedScope) w.u32(request.scope);
    return {MessageType::Fetch, w.take()};
}

FetchRequest parse_fetch(const Message& msg) {
    expect_type(msg, MessageType::Fetch);
    if (msg.payload.size() != 1 && msg.payload.size() != 5)
        throw ProtocolError(ProtocolErrorCode::LengthMismatch, "FETCH payload must be 1 or 5 bytes");
    ByteReader r(msg.payload);
    FetchRequest req;
    req.kind = read_kind(r.u8());
    if (r.remaining() == 4) req.scope = r.u32();
    return req;
}

Message make_snapshot(const SnapshotReply& reply) {
    ByteWriter w;
    w.reserve(9 + reply.blob.size());
    w.u8(std::uint8_t(reply.kind));
    w.u64(reply.version);
    w.bytes(reply.blob);
    return {MessageType::Snapshot, w.take()};
}

SnapshotReply parse_snapshot(const Message& msg) {
    expect_type(msg, MessageType::Snapshot);
    ByteReader r(msg.payload);
    SnapshotReply reply;
    reply.kind = read_kind(r.u8());
    reply.version = r.u64();
    const ByteView blob = r.bytes(r.remaining());
    reply.blob.assign(blob.begin(), blob.end());
    return reply;
}

Message make_error(ProtocolErrorCode code) { return {MessageType::Error, {std::uint8_t(code)}}; }

ProtocolErrorCode parse_error(const Message& msg) {
    expect_type(msg, MessageType::Error);
    if (msg.payload.size() != 1)
        throw ProtocolError(ProtocolErrorCode::LengthMismatch, "ERROR payload must be 1 byte");
    const std::uint8_t code = msg.payload[0];
    if (code < 1 || code > 8)
        throw ProtocolError(ProtocolErrorCode::InvalidPayload, "error code " + std::to_string(code));
    return ProtocolErrorCode(code);
}

}  // namespace sctx

#pragma once

#include <cstdint>
#include <deque>
#include <optional>

#include "sctx/codec.hpp"
#include "sctx/context_store.hpp"

namespace sctx {

enum class MessageType : std::uint8_t {
    Hello = 0x01,
    Publish = 0x02,
    Fetch = 0x03,
    Snapshot = 0x04,
    Error = 0x05,
};

const char* to_string(MessageType type);

struct Message {
    MessageType type = MessageType::Hello;
    Bytes payload;

    friend bool operator==(const Message&, const Message&) = default;
};

/// u32 length prefix plus the type byte.
inline constexpr std::size_t kWireHeaderBytes = 5;
/// Largest accepted value of the length field.
inline constexpr std::uint32_t kMaxMessageLength = 64u << 20;

/// length (LE u32, = 1 + payload size) | type | payload.
Bytes encode(const Message& msg);

/// Decodes exactly one frame. Throws ProtocolError: Truncated when the buffer
/// ends early, LengthMismatch for a zero/oversized length field or trailing
/// bytes, UnknownType for a type byte outside 1..5.
Message decode(ByteView frame);

/// Incremental decoder for a byte stream. Throws ProtocolError on the first
/// malformed frame; there is no resynchronization afterwards.
class FrameDecoder {
public:
    void feed(ByteView bytes);
    std::optional<Message> next();
    std::size_t buffered() const { return buffer_.size(); }

private:
    std::deque<std::uint8_t> buffer_;
};

// Typed payloads. The parse_* functions throw ProtocolError(InvalidPayload or
// LengthMismatch) on malformed payloads and on a wrong message type.

Message make_hello(std::uint32_t user_id);
std::uint32_t parse_hello(const Message& msg);

/// PUBLISH carries one blob (cloud, frame, anchors or device metadata),
/// recognized by its magic.
Message make_publish(Bytes blob);

struct FetchRequest {
    ContextKind kind = ContextKind::SparsePointCloud;
    std::uint32_t scope = kSharedScope;
    friend bool operator==(const FetchRequest&, const FetchRequest&) = default;
};

/// kind byte, followed by a u32 scope only when it is not the shared scope.
Message make_fetch(const FetchRequest& request);
FetchRequest parse_fetch(const Message& msg);

/// kind byte | u64 version | optional blob. A publish acknowledgement is a
/// snapshot of the touched kind without a blob.
struct SnapshotReply {
    ContextKind kind = ContextKind::SparsePointCloud;
    std::uint64_t version = 0;
    Bytes blob;
    friend bool operator==(const SnapshotReply&, const SnapshotReply&) = default;
};

Message make_snapshot(const SnapshotReply& reply);
SnapshotReply parse_snapshot(const Message& msg);

Message make_error(ProtocolErrorCode code);
ProtocolErrorCode parse_error(const Message& msg);

}  // namespace sctx

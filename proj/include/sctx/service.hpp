#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "sctx/context_store.hpp"
#include "sctx/wire.hpp"

namespace sctx {

/// Bidirectional byte stream. read_some blocks until at least one byte is
/// available and returns 0 at end of stream.
class ByteStream {
public:
    virtual ~ByteStream() = default;
    virtual std::size_t read_some(std::uint8_t* buffer, std::size_t size) = 0;
    virtual void write_all(ByteView bytes) = 0;
    /// Ends the stream in both directions; pending reads on either side
    /// return 0. Idempotent.
    virtual void close() = 0;
};

/// Connected pair of in-memory streams.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_pipe();

/// Server-side protocol state of one connection.
class Session {
public:
    explicit Session(ContextStore& store) : store_(store) {}

    /// Exactly one reply per request. Payload and sequencing problems become
    /// ERROR replies; the connection stays usable.
    Message handle(const Message& request);

    bool greeted() const { return user_.has_value(); }
    std::optional<std::uint32_t> user() const { return user_; }

private:
    Message publish(const Message& request);
    Message fetch(const Message& request);

    ContextStore& store_;
    std::optional<std::uint32_t> user_;
};

/// Runs one connection until the peer closes it. A malformed frame is
/// answered with ERROR and ends the connection.
void serve_connection(ContextStore& store, ByteStream& stream);

/// Thread per connection over in-memory pipes.
class InMemoryServer {
public:
    explicit InMemoryServer(ContextStore& store) : store_(store) {}
    ~InMemoryServer();

    InMemoryServer(const InMemoryServer&) = delete;
    InMemoryServer& operator=(const InMemoryServer&) = delete;

    /// Client end of a fresh connection.
    std::unique_ptr<ByteStream> connect();

private:
    ContextStore& store_;
    std::mutex mutex_;
    std::vector<std::unique_ptr<ByteStream>> server_ends_;
    std::vector<std::thread> workers_;
};

/// host:port, e.g. "127.0.0.1:7878".
struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 7878;

    static Endpoint parse(const std::string& text);
    std::string str() const;
};

/// Name of the environment variable holding the default endpoint.
inline constexpr const char* kEndpointEnv = "SCTX_ENDPOINT";

/// Thread per connection over TCP. Port 0 binds an ephemeral port.
class TcpServer {
public:
    TcpServer(ContextStore& store, const Endpoint& endpoint);
    ~TcpServer();

    TcpServer(const TcpServer&) = delete;
    TcpServer& operator=(const TcpServer&) = delete;

    std::uint16_t port() const { return port_; }
    /// Stops accepting, closes live connections and joins all threads.
    void stop();
    /// Blocks until stop() is called from another thread.
    void wait();

private:
    void accept_loop();

    ContextStore& store_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;
    std::mutex mutex_;
    std::vector<std::shared_ptr<ByteStream>> connections_;
    std::vector<std::thread> workers_;
};

std::unique_ptr<ByteStream> tcp_connect(const Endpoint& endpoint);

/// ERROR reply received by a client.
class RemoteError : public Error {
public:
    explicit RemoteError(ProtocolErrorCode code)
        : Error(std::string("server replied ") + to_string(code)), code_(code) {}
    ProtocolErrorCode code() const { return code_; }

private:
    ProtocolErrorCode code_;
};

/// Blocking request/response client.
class Client {
public:
    explicit Client(std::unique_ptr<ByteStream> stream) : stream_(std::move(stream)) {}
    ~Client();

    void hello(std::uint32_t user_id);
    /// Each publish returns the version of the entry it touched.
    std::uint64_t publish(const RGBDFrame& frame);
    std::uint64_t publish(const PointCloud& cloud);
    std::uint64_t publish(std::span<const Anchor> anchors);
    std::uint64_t publish(const DeviceMeta& meta);
    SnapshotReply fetch(const FetchRequest& request = {});
    /// Shared point cloud snapshot and its version.
    std::pair<PointCloud, std::uint64_t> fetch_cloud();

    /// Sends one message and waits for the reply; throws RemoteError on ERROR.
    Message request(const Message& msg);
    void close();

private:
    Message read_reply();

    std::unique_ptr<ByteStream> stream_;
    FrameDecoder decoder_;
};

}  // namespace sctx

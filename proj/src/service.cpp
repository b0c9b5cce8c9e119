#include "sctx/service.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>

namespace sctx {

// ---------------------------------------------------------------------------
// In-memory pipe

namespace {

struct Channel {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::uint8_t> data;
    bool closed = false;
};

class PipeEnd : public ByteStream {
public:
    PipeEnd(std::shared_ptr<Channel> in, std::shared_ptr<Channel> out)
        : in_(std::move(in)), out_(std::move(out)) {}
    ~PipeEnd() override { close(); }

    std::size_t read_some(std::uint8_t* buffer, std::size_t size) override {
        std::unique_lock lock(in_->mutex);
        in_->cv.wait(lock, [&] { return !in_->data.empty() || in_->closed; });
        const std::size_t n = std::min(size, in_->data.size());
        std::copy_n(in_->data.begin(), n, buffer);
        in_->data.erase(in_->data.begin(), in_->data.begin() + std::ptrdiff_t(n));
        return n;
    }

    void write_all(ByteView bytes) override {
        {
            std::lock_guard lock(out_->mutex);
            if (out_->closed) throw Error("write on a closed stream");
            out_->data.insert(out_->data.end(), bytes.begin(), bytes.end());
        }
        out_->cv.notify_all();
    }

    void close() override {
        for (auto* ch : {in_.get(), out_.get()}) {
            {
                std::lock_guard lock(ch->mutex);
                ch->closed = true;
            }
            ch->cv.notify_all();
        }
    }

private:
    std::shared_ptr<Channel> in_, out_;
};

}  // namespace

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_pipe() {
    auto a = std::make_shared<Channel>();
    auto b = std::make_shared<Channel>();
    return {std::make_unique<PipeEnd>(a, b), std::make_unique<PipeEnd>(b, a)};
}

// ---------------------------------------------------------------------------
// Session

Message Session::handle(const Message& request) {
    try {
        switch (request.type) {
            case MessageType::Hello: {
                if (user_) throw ProtocolError(ProtocolErrorCode::SequenceViolation, "repeated HELLO");
                user_ = parse_hello(request);
                return make_hello(*user_);
            }
            case MessageType::Publish:
                if (!user_) throw ProtocolError(ProtocolErrorCode::SequenceViolation, "PUBLISH before HELLO");
                return publish(request);
            case MessageType::Fetch:
                if (!user_) throw ProtocolError(ProtocolErrorCode::SequenceViolation, "FETCH before HELLO");
                return fetch(request);
            case MessageType::Snapshot:
            case MessageType::Error:
                throw ProtocolError(ProtocolErrorCode::SequenceViolation,
                                    std::string(to_string(request.type)) + " is a server message");
        }
        throw ProtocolError(ProtocolErrorCode::UnknownType, "unreachable");
    } catch (const ProtocolError& e) {
        return make_error(e.code());
    } catch (const AccessDenied&) {
        return make_error(ProtocolErrorCode::AccessDenied);
    } catch (const Error&) {
        // Well-formed but unusable payload, e.g. inconsistent voxel sizes.
        return make_error(ProtocolErrorCode::InvalidPayload);
    }
}

Message Session::publish(const Message& request) {
    const ByteView blob = request.payload;
    const std::string magic = blob_magic(blob);
    const std::uint32_t user = *user_;

    if (magic == kFrameMagic) {
        const RGBDFrame frame = decode_frame(blob);
        if (frame.user_id != user)
            throw ProtocolError(ProtocolErrorCode::AccessDenied, "frame belongs to another user");
        return make_snapshot({ContextKind::SparsePointCloud, store_.ingest_observation(frame), {}});
    }
    if (magic == kCloudMagic) {
        const PointCloud decoded = decode_cloud(blob);
        if (decoded.voxel_size() != store_.options().voxel_size)
            throw ProtocolError(ProtocolErrorCode::InvalidPayload, "voxel size differs from the store's");
        std::vector<CloudPoint> points;
        points.reserve(decoded.size());
        for (const auto& p : decoded.points())
            points.push_back(CloudPoint::observed(p.position, p.rgb, 0.0, user));
        const auto cloud = PointCloud::from_points(std::move(points), decoded.voxel_size());
        return make_snapshot({ContextKind::SparsePointCloud, store_.ingest_cloud(cloud, 0.0), {}});
    }
    if (magic == kAnchorMagic) {
        auto anchors = std::make_shared<const std::vector<Anchor>>(decode_anchors(blob));
        const std::uint64_t v =
            store_.put({ContextKind::Anchors, kSharedScope}, user, true, anchors, 0.0);
        return make_snapshot({ContextKind::Anchors, v, {}});
    }
    if (magic == kDeviceMagic) {
        auto meta = std::make_shared<const DeviceMeta>(decode_device_meta(blob));
        const std::uint64_t v = store_.put({ContextKind::DeviceMeta, user}, user, true, meta, 0.0);
        return make_snapshot({ContextKind::DeviceMeta, v, {}});
    }
    throw ProtocolError(ProtocolErrorCode::BadMagic, "unrecognized blob magic");
}

Message Session::fetch(const Message& request) {
    const FetchRequest req = parse_fetch(request);
    if (req.kind == ContextKind::Observations)
        throw ProtocolError(ProtocolErrorCode::UnsupportedKind, "observations are not fetchable");
    if (req.kind == ContextKind::SparsePointCloud && req.scope == kSharedScope) {
        const auto [cloud, version] = store_.shared_cloud();
        return make_snapshot({req.kind, version, encode_cloud(*cloud)});
    }
    ContextEntry entry;
    try {
        entry = store_.get({req.kind, req.scope}, *user_);
    } catch (const UnknownKey&) {
        return make_snapshot({req.kind, 0, {}});
    }
    Bytes blob = std::visit(
        [](const auto& p) -> Bytes {
            using T = std::remove_const_t<typename std::decay_t<decltype(p)>::element_type>;
            if constexpr (std::is_same_v<T, PointCloud>) return encode_cloud(*p);
            else if constexpr (std::is_same_v<T, std::vector<Anchor>>) return encode_anchors(*p);
            else if constexpr (std::is_same_v<T, DeviceMeta>) return encode_device_meta(*p);
            else throw ProtocolError(ProtocolErrorCode::UnsupportedKind, "observations are not fetchable");
        },
        entry.payload);
    return make_snapshot({req.kind, entry.version, std::move(blob)});
}

void serve_connection(ContextStore& store, ByteStream& stream) {
    Session session(store);
    FrameDecoder decoder;
    std::vector<std::uint8_t> buffer(1 << 16);
    try {
        for (;;) {
            const std::size_t n = stream.read_some(buffer.data(), buffer.size());
            if (n == 0) break;
            decoder.feed(ByteView(buffer.data(), n));
            try {
                while (auto msg = decoder.next()) stream.write_all(encode(session.handle(*msg)));
            } catch (const ProtocolError& e) {
                stream.write_all(encode(make_error(e.code())));
                break;
            }
        }
    } catch (const Error&) {
        // Peer went away mid-write.
    }
    stream.close();
}

InMemoryServer::~InMemoryServer() {
    {
        std::lock_guard lock(mutex_);
        for (auto& s : server_ends_) s->close();
    }
    for (auto& t : workers_) t.join();
}

std::unique_ptr<ByteStream> InMemoryServer::connect() {
    auto [client, server] = make_pipe();
    std::lock_guard lock(mutex_);
    ByteStream* raw = server.get();
    server_ends_.push_back(std::move(server));
    workers_.emplace_back([this, raw] { serve_connection(store_, *raw); });
    return std::move(client);
}

// ---------------------------------------------------------------------------
// TCP

Endpoint Endpoint::parse(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
        throw InvalidArgument("endpoint must be host:port, got '" + text + "'");
    Endpoint e;
    e.host = text.substr(0, colon);
    const std::string port = text.substr(colon + 1);
    std::size_t used = 0;
    unsigned long value = 0;
    try {
        value = std::stoul(port, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != port.size() || value > 65535)
        throw InvalidArgument("endpoint port must be 0-65535, got '" + port + "'");
    e.port = std::uint16_t(value);
    return e;
}

std::string Endpoint::str() const { return host + ":" + std::to_string(port); }

namespace {

class TcpStream : public ByteStream {
public:
    explicit TcpStream(int fd) : fd_(fd) {
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }
    ~TcpStream() override {
        close();
        ::close(fd_);
    }

    std::size_t read_some(std::uint8_t* buffer, std::size_t size) override {
        for (;;) {
            const ssize_t n = ::recv(fd_, buffer, size, 0);
            if (n >= 0) return std::size_t(n);
            if (errno == EINTR) continue;
            return 0;
        }
    }

    void write_all(ByteView bytes) override {
        std::size_t sent = 0;
        while (sent < bytes.size()) {
            const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(std::string("send failed: ") + std::strerror(errno));
            }
            sent += std::size_t(n);
        }
    }

    void close() override {
        if (!shut_.exchange(true)) ::shutdown(fd_, SHUT_RDWR);
    }

private:
    int fd_;
    std::atomic<bool> shut_{false};
};

sockaddr_in resolve(const Endpoint& endpoint) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    if (::getaddrinfo(endpoint.host.c_str(), nullptr, &hints, &result) != 0 || !result)
        throw Error("cannot resolve host '" + endpoint.host + "'");
    sockaddr_in addr;
    std::memcpy(&addr, result->ai_addr, sizeof addr);
    ::freeaddrinfo(result);
    addr.sin_port = htons(endpoint.port);
    return addr;
}

}  // namespace

TcpServer::TcpServer(ContextStore& store, const Endpoint& endpoint) : store_(store) {
    const sockaddr_in addr = resolve(endpoint);
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(listen_fd_, 16) != 0) {
        const std::string why = std::strerror(errno);
        ::close(listen_fd_);
        throw Error("cannot listen on " + endpoint.str() + ": " + why);
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
    acceptor_ = std::thread([this] { accept_loop(); });
}

TcpServer::~TcpServer() {
    stop();
    ::close(listen_fd_);
}

void TcpServer::accept_loop() {
    while (!stopping_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) continue;
            break;
        }
        auto stream = std::make_shared<TcpStream>(fd);
        std::lock_guard lock(mutex_);
        if (stopping_) break;
        connections_.push_back(stream);
        workers_.emplace_back([this, stream] { serve_connection(store_, *stream); });
    }
}

void TcpServer::stop() {
    if (stopping_.exchange(true)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (acceptor_.joinable()) acceptor_.join();
    std::lock_guard lock(mutex_);
    for (auto& c : connections_) c->close();
    for (auto& t : workers_) t.join();
    workers_.clear();
    stopping_.notify_all();
}

void TcpServer::wait() { stopping_.wait(false); }

std::unique_ptr<ByteStream> tcp_connect(const Endpoint& endpoint) {
    const sockaddr_in addr = resolve(endpoint);
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error(std::string("socket: ") + std::strerror(errno));
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
        const std::string why = std::strerror(errno);
        ::close(fd);
        throw Error("cannot connect to " + endpoint.str() + ": " + why);
    }
    return std::make_unique<TcpStream>(fd);
}

// ---------------------------------------------------------------------------
// Client

Client::~Client() { close(); }

void Client::close() {
    if (stream_) stream_->close();
}

Message Client::read_reply() {
    std::vector<std::uint8_t> buffer(1 << 16);
    for (;;) {
        if (auto msg = decoder_.next()) return *msg;
        const std::size_t n = stream_->read_some(buffer.data(), buffer.size());
        if (n == 0) throw Error("connection closed by server");
        decoder_.feed(ByteView(buffer.data(), n));
    }
}

Message Client::request(const Message& msg) {
    stream_->write_all(encode(msg));
    Message reply = read_reply();
    if (reply.type == MessageType::Error) throw RemoteError(parse_error(reply));
    return reply;
}

void Client::hello(std::uint32_t user_id) {
    if (parse_hello(request(make_hello(user_id))) != user_id)
        throw Error("server acknowledged a different user id");
}

std::uint64_t Client::publish(const RGBDFrame& frame) {
    return parse_snapshot(request(make_publish(encode_frame(frame)))).version;
}

std::uint64_t Client::publish(const PointCloud& cloud) {
    return parse_snapshot(request(make_publish(encode_cloud(cloud)))).version;
}

std::uint64_t Client::publish(std::span<const Anchor> anchors) {
    return parse_snapshot(request(make_publish(encode_anchors(anchors)))).version;
}

std::uint64_t Client::publish(const DeviceMeta& meta) {
    return parse_snapshot(request(make_publish(encode_device_meta(meta)))).version;
}

SnapshotReply Client::fetch(const FetchRequest& req) { return parse_snapshot(request(make_fetch(req))); }

std::pair<PointCloud, std::uint64_t> Client::fetch_cloud() {
    SnapshotReply reply = fetch({});
    return {decode_cloud(reply.blob), reply.version};
}

}  // namespace sctx

#pragma once

#include <chrono>
#include <compare>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <variant>
#include <vector>

#include "sctx/codec.hpp"
#include "sctx/frame.hpp"
#include "sctx/point_cloud.hpp"

namespace sctx {

enum class ContextKind : std::uint8_t {
    Observations = 0,
    SparsePointCloud = 1,
    Anchors = 2,
    DeviceMeta = 3,
};

inline constexpr int kContextKindCount = 4;
const char* to_string(ContextKind kind);

/// Scope value for store-wide entries; any other value is a session (user) id.
inline constexpr std::uint32_t kSharedScope = 0xffffffffu;

struct ContextKey {
    ContextKind kind = ContextKind::SparsePointCloud;
    std::uint32_t scope = kSharedScope;

    static ContextKey shared_cloud() { return {ContextKind::SparsePointCloud, kSharedScope}; }
    friend auto operator<=>(const ContextKey&, const ContextKey&) = default;
};

/// Retained raw observations of one session, each as its encoded frame blob.
struct ObservationLog {
    struct Record {
        double timestamp = 0.0;
        std::shared_ptr<const Bytes> blob;
    };
    std::vector<Record> records;
};

using ContextPayload =
    std::variant<std::shared_ptr<const PointCloud>, std::shared_ptr<const std::vector<Anchor>>,
                 std::shared_ptr<const ObservationLog>, std::shared_ptr<const DeviceMeta>>;

/// Serialized payload size under the share-service blob formats.
std::size_t payload_size(const ContextPayload& payload);

/// Immutable snapshot of a store entry.
struct ContextEntry {
    ContextKey key;
    std::uint64_t version = 0;
    std::uint32_t owner = 0;
    bool shared = true;
    ContextPayload payload;
    std::size_t byte_size = 0;  ///< serialized payload bytes
    double last_update = 0.0;
};

/// Fixed accounting overhead per entry on top of its payload.
inline constexpr std::size_t kEntryHeaderBytes = 32;

class UnknownKey : public Error {
public:
    using Error::Error;
};

class AccessDenied : public Error {
public:
    using Error::Error;
};

class BudgetError : public Error {
public:
    using Error::Error;
};

struct Notification {
    ContextKey key;
    std::uint64_t version = 0;
    friend bool operator==(const Notification&, const Notification&) = default;
};

/// Per-subscriber notification queue; safe to poll from any thread.
class Subscription {
public:
    ~Subscription();
    Subscription(const Subscription&) = delete;
    Subscription& operator=(const Subscription&) = delete;

    ContextKind kind() const;

    /// Returns and clears pending notifications, in version order per key.
    /// Throws Error once cancelled.
    std::vector<Notification> poll();

    /// Like poll(), but blocks up to `timeout` while the queue is empty.
    std::vector<Notification> wait(std::chrono::milliseconds timeout);

    void cancel();
    bool cancelled() const;

    struct State;

private:
    friend class ContextStore;
    explicit Subscription(std::shared_ptr<State> state);
    std::shared_ptr<State> state_;
};

struct StoreOptions {
    float voxel_size = kDefaultVoxelSize;
    /// Keep encoded raw frames per session as Observations entries.
    bool retain_observations = true;
};

/// Versioned, owner-tagged spatial-context store with change subscriptions.
///
/// Thread-safe: mutations are serialized and notifications are enqueued while
/// the write lock is held, so every subscriber sees versions of a key in
/// order. Sequential use is fully deterministic.
class ContextStore {
public:
    explicit ContextStore(StoreOptions options = {});
    ~ContextStore();

    ContextStore(const ContextStore&) = delete;
    ContextStore& operator=(const ContextStore&) = delete;

    const StoreOptions& options() const { return options_; }

    /// Creates or overwrites an entry; returns the new version (1 on create).
    std::uint64_t put(const ContextKey& key, std::uint32_t owner, bool shared,
                      ContextPayload payload, double timestamp);

    /// Latest version. Throws UnknownKey, or AccessDenied when the entry is
    /// not shared and `requester` is not its owner.
    ContextEntry get(const ContextKey& key, std::uint32_t requester) const;

    /// Current version of `key`, 0 if absent.
    std::uint64_t version(const ContextKey& key) const;

    /// Shared cloud snapshot (empty cloud at version 0 when absent).
    std::pair<std::shared_ptr<const PointCloud>, std::uint64_t> shared_cloud() const;

    /// Back-projects the frame and merges it into the shared cloud. Also
    /// appends the frame to the session's Observations entry when retention
    /// is on. Returns the new shared cloud version.
    std::uint64_t ingest_observation(const RGBDFrame& frame);

    /// Merges an already back-projected cloud into the shared cloud.
    std::uint64_t ingest_cloud(const PointCloud& cloud, double timestamp);

    std::unique_ptr<Subscription> subscribe(ContextKind kind);

    /// Sum over entries of header plus serialized payload size.
    std::size_t memory_usage() const;
    std::size_t entry_count() const;

    /// Usage that eviction cannot remove: headers, empty evictable payloads
    /// and non-evictable entries.
    std::size_t minimum_overhead() const;

    /// Throws InvalidArgument for 0 and BudgetError below minimum_overhead().
    void set_budget(std::size_t bytes);
    std::optional<std::size_t> budget() const;

    /// Evicts until memory_usage() <= budget: oldest retained observation
    /// frames first, then oldest-timestamp shared cloud points. Each touched
    /// entry gets one version bump and notification. Returns true if anything
    /// was evicted; no-op without a budget.
    bool enforce_budget();

private:
    struct Slot {
        ContextEntry entry;
    };

    std::uint64_t commit_locked(const ContextKey& key, std::uint32_t owner, bool shared,
                                ContextPayload payload, double timestamp);
    std::uint64_t merge_cloud_locked(const PointCloud& cloud, double timestamp);
    std::size_t usage_locked() const;
    std::size_t overhead_locked() const;
    void notify_locked(const Notification& n);

    StoreOptions options_;
    mutable std::shared_mutex mutex_;
    std::map<ContextKey, Slot> entries_;
    std::optional<std::size_t> budget_;

    std::mutex subs_mutex_;
    std::vector<std::weak_ptr<Subscription::State>> subscribers_;
};

}  // namespace sctx

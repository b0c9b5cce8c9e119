#include "sctx/context_store.hpp"

#include <algorithm>
#include <tuple>

namespace sctx {

const char* to_string(ContextKind kind) {
    switch (kind) {
        case ContextKind::Observations: return "observations";
        case ContextKind::SparsePointCloud: return "sparse_point_cloud";
        case ContextKind::Anchors: return "anchors";
        case ContextKind::DeviceMeta: return "device_meta";
    }
    return "unknown";
}

namespace {

ContextKind kind_of(const ContextPayload& payload) {
    switch (payload.index()) {
        case 0: return ContextKind::SparsePointCloud;
        case 1: return ContextKind::Anchors;
        case 2: return ContextKind::Observations;
        default: return ContextKind::DeviceMeta;
    }
}

// Payload size with every evictable element removed.
std::size_t floor_size(const ContextPayload& payload) {
    switch (payload.index()) {
        case 0: return cloud_blob_size(0);
        case 2: return 4;
        default: return payload_size(payload);
    }
}

}  // namespace

std::size_t payload_size(const ContextPayload& payload) {
    return std::visit(
        [](const auto& p) -> std::size_t {
            using T = std::remove_const_t<typename std::decay_t<decltype(p)>::element_type>;
            if (!p) return 0;
            if constexpr (std::is_same_v<T, PointCloud>) return cloud_blob_size(p->size());
            else if constexpr (std::is_same_v<T, std::vector<Anchor>>)
                return anchors_blob_size(p->size());
            else if constexpr (std::is_same_v<T, DeviceMeta>)
                return device_blob_size(*p);
            else {
                std::size_t total = 4;
                for (const auto& r : p->records) total += r.blob ? r.blob->size() : 0;
                return total;
            }
        },
        payload);
}

// ---------------------------------------------------------------------------
// Subscription

struct Subscription::State {
    ContextKind kind;
    mutable std::mutex mutex;
    std::condition_variable cv;
    std::deque<Notification> queue;
    bool cancelled = false;

    explicit State(ContextKind k) : kind(k) {}
};

Subscription::Subscription(std::shared_ptr<State> state) : state_(std::move(state)) {}

Subscription::~Subscription() { cancel(); }

ContextKind Subscription::kind() const { return state_->kind; }

std::vector<Notification> Subscription::poll() {
    std::lock_guard lock(state_->mutex);
    if (state_->cancelled) throw Error("poll on a cancelled subscription");
    std::vector<Notification> out(state_->queue.begin(), state_->queue.end());
    state_->queue.clear();
    return out;
}

std::vector<Notification> Subscription::wait(std::chrono::milliseconds timeout) {
    std::unique_lock lock(state_->mutex);
    state_->cv.wait_for(lock, timeout,
                        [&] { return state_->cancelled || !state_->queue.empty(); });
    if (state_->cancelled) throw Error("wait on a cancelled subscription");
    std::vector<Notification> out(state_->queue.begin(), state_->queue.end());
    state_->queue.clear();
    return out;
}

void Subscription::cancel() {
    {
        std::lock_guard lock(state_->mutex);
        state_->cancelled = true;
        state_->queue.clear();
    }
    state_->cv.notify_all();
}

bool Subscription::cancelled() const {
    std::lock_guard lock(state_->mutex);
    return state_->cancelled;
}

// ---------------------------------------------------------------------------
// ContextStore

ContextStore::ContextStore(StoreOptions options) : options_(options) {
    if (!(options_.voxel_size > 0.0f)) throw InvalidArgument("voxel_size must be positive");
}

ContextStore::~ContextStore() = default;

std::uint64_t ContextStore::put(const ContextKey& key, std::uint32_t owner, bool shared,
                                ContextPayload payload, double timestamp) {
    if (kind_of(payload) != key.kind)
        throw InvalidArgument(std::string("payload type does not match key kind ") +
                              to_string(key.kind));
    const bool null_payload = std::visit([](const auto& p) { return p == nullptr; }, payload);
    if (null_payload) throw InvalidArgument("null payload");
    if (const auto* cloud = std::get_if<0>(&payload);
        cloud && (*cloud)->voxel_size() != options_.voxel_size)
        throw InvalidArgument("point cloud voxel size differs from the store's");
    if (const auto* anchors = std::get_if<1>(&payload)) {
        std::vector<std::uint32_t> ids;
        for (const auto& a : **anchors) ids.push_back(a.id);
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
            throw InvalidArgument("anchor ids must be unique within an entry");
    }
    std::unique_lock lock(mutex_);
    return commit_locked(key, owner, shared, std::move(payload), timestamp);
}

ContextEntry ContextStore::get(const ContextKey& key, std::uint32_t requester) const {
    std::shared_lock lock(mutex_);
    const auto it = entries_.find(key);
    if (it == entries_.end())
        throw UnknownKey(std::string("no entry for ") + to_string(key.kind) + " scope " +
                         std::to_string(key.scope));
    const ContextEntry& e = it->second.entry;
    if (!e.shared && e.owner != requester)
        throw AccessDenied("entry is private to user " + std::to_string(e.owner));
    return e;
}

std::uint64_t ContextStore::version(const ContextKey& key) const {
    std::shared_lock lock(mutex_);
    const auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.entry.version;
}

std::pair<std::shared_ptr<const PointCloud>, std::uint64_t> ContextStore::shared_cloud() const {
    std::shared_lock lock(mutex_);
    const auto it = entries_.find(ContextKey::shared_cloud());
    if (it == entries_.end())
        return {std::make_shared<const PointCloud>(options_.voxel_size), 0};
    return {std::get<0>(it->second.entry.payload), it->second.entry.version};
}

std::uint64_t ContextStore::ingest_observation(const RGBDFrame& frame) {
    const PointCloud cloud = backproject(frame, options_.voxel_size);
    std::shared_ptr<const Bytes> blob;
    if (options_.retain_observations) blob = std::make_shared<const Bytes>(encode_frame(frame));

    std::unique_lock lock(mutex_);
    const std::uint64_t version = merge_cloud_locked(cloud, frame.timestamp);
    if (blob) {
        const ContextKey key{ContextKind::Observations, frame.user_id};
        auto log = std::make_shared<ObservationLog>();
        if (const auto it = entries_.find(key); it != entries_.end())
            *log = *std::get<2>(it->second.entry.payload);
        log->records.push_back({frame.timestamp, std::move(blob)});
        commit_locked(key, frame.user_id, false, std::shared_ptr<const ObservationLog>(log),
                      frame.timestamp);
    }
    return version;
}

std::uint64_t ContextStore::ingest_cloud(const PointCloud& cloud, double timestamp) {
    if (cloud.voxel_size() != options_.voxel_size)
        throw InvalidArgument("point cloud voxel size differs from the store's");
    std::unique_lock lock(mutex_);
    return merge_cloud_locked(cloud, timestamp);
}

std::uint64_t ContextStore::merge_cloud_locked(const PointCloud& cloud, double timestamp) {
    const ContextKey key = ContextKey::shared_cloud();
    std::shared_ptr<const PointCloud> merged;
    double last = timestamp;
    if (const auto it = entries_.find(key); it != entries_.end()) {
        merged = std::make_shared<const PointCloud>(
            voxel_merge(*std::get<0>(it->second.entry.payload), cloud));
        last = std::max(last, it->second.entry.last_update);
    } else {
        merged = std::make_shared<const PointCloud>(voxel_merge(PointCloud(options_.voxel_size), cloud));
    }
    return commit_locked(key, kSharedScope, true, std::move(merged), last);
}

std::uint64_t ContextStore::commit_locked(const ContextKey& key, std::uint32_t owner, bool shared,
                                          ContextPayload payload, double timestamp) {
    Slot& slot = entries_[key];
    ContextEntry& e = slot.entry;
    e.key = key;
    e.version += 1;
    e.owner = owner;
    e.shared = shared;
    e.byte_size = payload_size(payload);
    e.payload = std::move(payload);
    e.last_update = timestamp;
    notify_locked({key, e.version});
    return e.version;
}

void ContextStore::notify_locked(const Notification& n) {
    std::lock_guard lock(subs_mutex_);
    auto out = subscribers_.begin();
    for (auto it = subscribers_.begin(); it != subscribers_.end(); ++it) {
        auto state = it->lock();
        if (!state) continue;
        {
            std::lock_guard sl(state->mutex);
            if (state->cancelled) continue;
            if (state->kind == n.key.kind) state->queue.push_back(n);
        }
        state->cv.notify_all();
        *out++ = *it;
    }
    subscribers_.erase(out, subscribers_.end());
}

std::unique_ptr<Subscription> ContextStore::subscribe(ContextKind kind) {
    auto state = std::make_shared<Subscription::State>(kind);
    // Holding the store lock orders the subscription against in-flight writes.
    std::shared_lock lock(mutex_);
    std::lock_guard sl(subs_mutex_);
    subscribers_.push_back(state);
    return std::unique_ptr<Subscription>(new Subscription(state));
}

std::size_t ContextStore::usage_locked() const {
    std::size_t total = 0;
    for (const auto& [key, slot] : entries_) total += kEntryHeaderBytes + slot.entry.byte_size;
    return total;
}

std::size_t ContextStore::overhead_locked() const {
    std::size_t total = 0;
    for (const auto& [key, slot] : entries_)
        total += kEntryHeaderBytes + floor_size(slot.entry.payload);
    return total;
}

std::size_t ContextStore::memory_usage() const {
    std::shared_lock lock(mutex_);
    return usage_locked();
}

std::size_t ContextStore::entry_count() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

std::size_t ContextStore::minimum_overhead() const {
    std::shared_lock lock(mutex_);
    return overhead_locked();
}

void ContextStore::set_budget(std::size_t bytes) {
    if (bytes == 0) throw InvalidArgument("budget must be positive");
    std::unique_lock lock(mutex_);
    if (bytes < overhead_locked())
        throw BudgetError("budget " + std::to_string(bytes) + " is below the minimum overhead " +
                          std::to_string(overhead_locked()));
    budget_ = bytes;
}

std::optional<std::size_t> ContextStore::budget() const {
    std::shared_lock lock(mutex_);
    return budget_;
}

bool ContextStore::enforce_budget() {
    std::unique_lock lock(mutex_);
    if (!budget_) return false;
    std::size_t usage = usage_locked();
    const std::size_t budget = *budget_;
    if (usage <= budget) return false;
    if (budget < overhead_locked())
        throw BudgetError("budget " + std::to_string(budget) + " is below the minimum overhead " +
                          std::to_string(overhead_locked()));

    // Oldest retained frames first, across sessions.
    struct Victim {
        double timestamp;
        ContextKey key;
        std::size_t index;
    };
    std::vector<Victim> victims;
    for (const auto& [key, slot] : entries_) {
        if (key.kind != ContextKind::Observations) continue;
        const auto& log = *std::get<2>(slot.entry.payload);
        for (std::size_t i = 0; i < log.records.size(); ++i)
            victims.push_back({log.records[i].timestamp, key, i});
    }
    std::sort(victims.begin(), victims.end(), [](const Victim& a, const Victim& b) {
        return std::tie(a.timestamp, a.key, a.index) < std::tie(b.timestamp, b.key, b.index);
    });
    std::map<ContextKey, std::vector<bool>> dropped;
    for (const auto& v : victims) {
        if (usage <= budget) break;
        const auto& log = *std::get<2>(entries_.at(v.key).entry.payload);
        auto& mask = dropped[v.key];
        mask.resize(log.records.size(), false);
        mask[v.index] = true;
        usage -= log.records[v.index].blob->size();
    }
    for (const auto& [key, mask] : dropped) {
        const ContextEntry& e = entries_.at(key).entry;
        const auto& old = *std::get<2>(e.payload);
        auto log = std::make_shared<ObservationLog>();
        for (std::size_t i = 0; i < old.records.size(); ++i)
            if (!mask[i]) log->records.push_back(old.records[i]);
        commit_locked(key, e.owner, e.shared, std::shared_ptr<const ObservationLog>(log),
                      e.last_update);
    }

    if (usage > budget) {
        const auto it = entries_.find(ContextKey::shared_cloud());
        if (it != entries_.end()) {
            const ContextEntry& e = it->second.entry;
            auto cloud = std::make_shared<PointCloud>(*std::get<0>(e.payload));
            const std::size_t excess = usage - budget;
            const std::size_t drop =
                std::min(cloud->size(), (excess + kCloudPointBytes - 1) / kCloudPointBytes);
            cloud->evict_oldest(drop);
            usage -= drop * kCloudPointBytes;
            commit_locked(e.key, e.owner, e.shared, std::shared_ptr<const PointCloud>(cloud),
                          e.last_update);
        }
    }
    return true;
}

}  // namespace sctx

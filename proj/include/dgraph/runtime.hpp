#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <typeindex>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dgraph/bytes.hpp"

namespace dgraph {

class Runtime;
class Locality;

using LocalityId = std::uint32_t;
using ActionId = std::uint32_t;

enum class Transport : std::uint8_t { inproc, socket };
enum class ReduceOp : std::uint8_t { sum, min, max };

/// Actions default to `service`: executed immediately when their parcel is
/// decoded, so they must not block. Long-running or blocking actions register
/// as `compute` and are scheduled like locally spawned tasks (never on
/// reserved workers).
enum class ActionKind : std::uint8_t { service, compute };

struct RuntimeConfig {
    std::uint32_t localities = 1;
    std::uint32_t workers_per_locality = 4;
    std::uint32_t reserved_remote_workers = 1;  // only dequeue incoming-parcel work
    std::uint32_t coalesce_max_messages = 16;   // parcels per wire message (K)
    std::chrono::microseconds coalesce_max_delay{200};
    std::chrono::microseconds injected_latency{0};  // inproc, cross-locality only
    Transport transport = Transport::inproc;
    std::uint32_t rank = 0;                // socket: which locality this process is
    std::vector<std::string> peers;        // socket: "host:port" per locality
    std::chrono::milliseconds collective_timeout{30000};
    std::chrono::milliseconds drain_timeout{5000};

    void validate() const;
};

/// Per-locality performance counters, snapshot at a point in time.
struct MetricsSnapshot {
    std::uint64_t tasks_executed = 0;
    std::uint64_t steals = 0;
    std::uint64_t parcels_sent = 0;
    std::uint64_t parcels_received = 0;
    std::uint64_t wire_messages_sent = 0;  // post-coalescing transmissions
    std::uint64_t bytes_sent = 0;
    std::uint64_t remote_actions_served = 0;
    std::uint64_t graph_storage_bytes = 0;
    std::uint64_t collective_rounds = 0;
    std::vector<std::uint64_t> actions_served;  // indexed by ActionId
};

template <>
struct Wire<MetricsSnapshot> {
    static void write(ByteWriter& w, const MetricsSnapshot& m) {
        write_values(w, m.tasks_executed, m.steals, m.parcels_sent, m.parcels_received,
                     m.wire_messages_sent, m.bytes_sent, m.remote_actions_served,
                     m.graph_storage_bytes, m.collective_rounds, m.actions_served);
    }
    static MetricsSnapshot read(ByteReader& r) {
        MetricsSnapshot m;
        m.tasks_executed = read_value<std::uint64_t>(r);
        m.steals = read_value<std::uint64_t>(r);
        m.parcels_sent = read_value<std::uint64_t>(r);
        m.parcels_received = read_value<std::uint64_t>(r);
        m.wire_messages_sent = read_value<std::uint64_t>(r);
        m.bytes_sent = read_value<std::uint64_t>(r);
        m.remote_actions_served = read_value<std::uint64_t>(r);
        m.graph_storage_bytes = read_value<std::uint64_t>(r);
        m.collective_rounds = read_value<std::uint64_t>(r);
        m.actions_served = read_value<std::vector<std::uint64_t>>(r);
        return m;
    }
};

namespace detail {

struct FutureStateBase {
    std::mutex m;
    std::condition_variable cv;
    enum class Status : std::uint8_t { pending, ready, failed };
    Status status = Status::pending;
    std::exception_ptr error;
    std::vector<std::function<void()>> continuations;

    bool settled_nolock() const { return status != Status::pending; }
    bool settled() {
        std::lock_guard lk(m);
        return settled_nolock();
    }

    // Caller stored the value/error and holds lk; publishes and runs
    // continuations outside the lock.
    void finish(std::unique_lock<std::mutex>& lk, Status s) {
        status = s;
        auto conts = std::move(continuations);
        continuations.clear();
        lk.unlock();
        cv.notify_all();
        for (auto& c : conts) c();
    }
};

template <typename T>
struct FutureState : FutureStateBase {
    std::optional<T> value;
};

/// Waits for st to settle. On a worker thread this runs other ready tasks in
/// the meantime (the task suspends, the worker does not); elsewhere it blocks.
void wait_on(FutureStateBase* st);

/// Same, with a deadline; returns false on timeout.
bool wait_on_until(FutureStateBase* st, std::chrono::steady_clock::time_point deadline);

}  // namespace detail

template <typename T>
class Promise;

/// Deferred result handle. Settles exactly once (ready or failed); supports
/// blocking retrieval, continuation attachment, and group waits. Copies share
/// the same state.
template <typename T>
class Future {
public:
    Future() = default;

    bool valid() const { return static_cast<bool>(st_); }
    bool is_ready() const { return st_ && st_->settled(); }

    void wait() const { detail::wait_on(st_.get()); }

    template <typename Rep, typename Period>
    bool wait_for(std::chrono::duration<Rep, Period> d) const {
        return detail::wait_on_until(st_.get(), std::chrono::steady_clock::now() + d);
    }

    /// Blocks until settled; rethrows the stored error on failure.
    T get() const {
        wait();
        std::unique_lock lk(st_->m);
        if (st_->status == detail::FutureStateBase::Status::failed)
            std::rethrow_exception(st_->error);
        return *st_->value;
    }

    /// Attaches fn to run exactly once with the value after readiness. A
    /// failure propagates to the returned future without running fn.
    template <typename F>
    auto then(F&& fn) const {
        using R = std::invoke_result_t<F, const T&>;
        using R2 = std::conditional_t<std::is_void_v<R>, Unit, R>;
        Promise<R2> p;
        auto out = p.future();
        auto st = st_;
        auto run = [st, p, fn = std::forward<F>(fn)]() mutable {
            std::unique_lock lk(st->m);
            if (st->status == detail::FutureStateBase::Status::failed) {
                auto err = st->error;
                lk.unlock();
                p.set_exception(err);
                return;
            }
            const T& v = *st->value;
            lk.unlock();
            try {
                if constexpr (std::is_void_v<R>) {
                    fn(v);
                    p.set_value(Unit{});
                } else {
                    p.set_value(fn(v));
                }
            } catch (...) {
                p.set_exception(std::current_exception());
            }
        };
        {
            std::unique_lock lk(st_->m);
            if (!st_->settled_nolock()) {
                st_->continuations.push_back(std::move(run));
                return out;
            }
        }
        run();
        return out;
    }

private:
    friend class Promise<T>;
    explicit Future(std::shared_ptr<detail::FutureState<T>> st) : st_(std::move(st)) {}
    std::shared_ptr<detail::FutureState<T>> st_;
};

template <typename T>
class Promise {
public:
    Promise() : st_(std::make_shared<detail::FutureState<T>>()) {}

    Future<T> future() const { return Future<T>(st_); }

    void set_value(T v) const {
        std::unique_lock lk(st_->m);
        if (st_->settled_nolock()) throw std::logic_error("future settled twice");
        st_->value.emplace(std::move(v));
        st_->finish(lk, detail::FutureStateBase::Status::ready);
    }

    void set_exception(std::exception_ptr e) const {
        std::unique_lock lk(st_->m);
        if (st_->settled_nolock()) throw std::logic_error("future settled twice");
        st_->error = std::move(e);
        st_->finish(lk, detail::FutureStateBase::Status::failed);
    }

private:
    std::shared_ptr<detail::FutureState<T>> st_;
};

template <typename T>
Future<T> make_ready_future(T v) {
    Promise<T> p;
    p.set_value(std::move(v));
    return p.future();
}

/// Waits until every future settled, then throws an aggregate error if any failed.
template <typename T>
void wait_all(const std::vector<Future<T>>& fs) {
    for (const auto& f : fs) f.wait();
    std::size_t failed = 0;
    std::string first;
    for (const auto& f : fs) {
        try {
            (void)f.get();
        } catch (const std::exception& e) {
            if (failed++ == 0) first = e.what();
        } catch (...) {
            if (failed++ == 0) first = "unknown error";
        }
    }
    if (failed)
        throw std::runtime_error("wait_all: " + std::to_string(failed) +
                                 " of " + std::to_string(fs.size()) + " tasks failed; first: " + first);
}

/// Named, type-checked per-locality object registry. Distributed structures
/// install their local slices here so actions can look them up; this is the
/// only sanctioned way for remote requests to reach locality-resident state.
class ObjectStore {
public:
    template <typename T>
    void put(const std::string& name, std::shared_ptr<T> obj) {
        std::lock_guard lk(m_);
        map_.insert_or_assign(
            name, std::make_pair(std::type_index(typeid(T)),
                                 std::static_pointer_cast<void>(std::move(obj))));
    }

    template <typename T>
    std::shared_ptr<T> get(const std::string& name) const {
        std::lock_guard lk(m_);
        auto it = map_.find(name);
        if (it == map_.end()) throw std::runtime_error("object store: no entry named '" + name + "'");
        if (it->second.first != std::type_index(typeid(T)))
            throw std::runtime_error("object store: type mismatch for '" + name + "'");
        return std::static_pointer_cast<T>(it->second.second);
    }

    template <typename T>
    std::shared_ptr<T> try_get(const std::string& name) const {
        std::lock_guard lk(m_);
        auto it = map_.find(name);
        if (it == map_.end() || it->second.first != std::type_index(typeid(T))) return nullptr;
        return std::static_pointer_cast<T>(it->second.second);
    }

    bool erase(const std::string& name) {
        std::lock_guard lk(m_);
        return map_.erase(name) > 0;
    }

private:
    mutable std::mutex m_;
    std::unordered_map<std::string, std::pair<std::type_index, std::shared_ptr<void>>> map_;
};

namespace detail {
struct LocalityState;
struct RuntimeImpl;
}  // namespace detail

/// One address space of the run. Owns the local object store and the local
/// share of the counters. Handed to every action handler.
class Locality {
public:
    LocalityId id() const { return id_; }
    Runtime& runtime() const { return *rt_; }
    ObjectStore& store() { return store_; }

    /// Adjusts the graph-storage byte counter (slice install / teardown).
    void add_graph_storage_bytes(std::int64_t delta);

private:
    friend struct detail::RuntimeImpl;
    LocalityId id_ = 0;
    Runtime* rt_ = nullptr;
    detail::LocalityState* state_ = nullptr;
    ObjectStore store_;
};

using RawAction = std::function<void(Locality&, ByteReader&, ByteWriter&)>;

/// The distributed substrate: a set of localities each running a pool of
/// cooperatively scheduled workers with work stealing, exchanging active
/// messages (parcels) that are coalesced per destination, with futures for
/// completion and tree-based collectives rooted at locality 0.
///
/// With the inproc transport all localities live in this process and parcels
/// are delivered through in-memory queues (optionally after an injected
/// latency). With the socket transport this process hosts exactly one
/// locality (cfg.rank) and peers are reached over TCP with length-prefixed
/// binary frames.
class Runtime {
public:
    explicit Runtime(RuntimeConfig cfg);
    ~Runtime();

    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    // ---- action registration: before start(), identical on all localities ----

    ActionId register_raw_action(std::string name, RawAction fn, ActionKind kind);

    template <typename R, typename... Args>
    ActionId register_action(std::string name, R (*fn)(Locality&, Args...),
                             ActionKind kind = ActionKind::service) {
        return register_raw_action(
            std::move(name),
            [fn](Locality& loc, ByteReader& in, ByteWriter& out) {
                auto args = std::tuple<std::decay_t<Args>...>{Wire<std::decay_t<Args>>::read(in)...};
                if constexpr (std::is_void_v<R>) {
                    std::apply([&](auto&&... a) { fn(loc, std::move(a)...); }, std::move(args));
                } else {
                    Wire<R>::write(out, std::apply([&](auto&&... a) { return fn(loc, std::move(a)...); },
                                                   std::move(args)));
                }
            },
            kind);
    }

    /// Id for a registered action name; throws if unknown.
    ActionId action_id(std::string_view name) const;
    const std::vector<std::string>& action_names() const;

    // ---- lifecycle ----

    void start();
    /// Drains in-flight parcels then joins all workers. Throws if parcels were
    /// still undelivered when the drain timed out.
    void stop();
    bool running() const;

    /// Socket transport, non-root ranks: serve remote requests until the root
    /// broadcasts shutdown, then tear down.
    void serve();

    std::uint32_t locality_count() const;
    bool is_root() const;
    /// Locality of the calling context: the worker's locality on worker
    /// threads, the root-hosted locality elsewhere.
    LocalityId here() const;
    Locality& local(LocalityId id);

    /// True when the calling thread is one of the workers reserved for
    /// incoming remote requests (diagnostics; compute tasks never see true).
    static bool on_reserved_worker();

    const RuntimeConfig& config() const;

    // ---- tasks ----

    /// Schedules fn on the calling locality's pool; stealable by its
    /// non-reserved workers. The future fails if fn throws.
    template <typename F>
    auto spawn(F&& fn) {
        using R = std::invoke_result_t<F>;
        using R2 = std::conditional_t<std::is_void_v<R>, Unit, R>;
        Promise<R2> p;
        enqueue_task([p, f = std::forward<F>(fn)]() mutable {
            try {
                if constexpr (std::is_void_v<R>) {
                    f();
                    p.set_value(Unit{});
                } else {
                    p.set_value(f());
                }
            } catch (...) {
                p.set_exception(std::current_exception());
            }
        });
        return p.future();
    }

    // ---- parcels ----

    /// Asynchronous remote procedure call: enqueues a parcel for dest and
    /// returns immediately; the future settles when the reply arrives. R must
    /// name the action's result type.
    template <typename R, typename... Args>
    auto remote_invoke(LocalityId dest, ActionId action, const Args&... args) {
        using R2 = std::conditional_t<std::is_void_v<R>, Unit, R>;
        ByteWriter w;
        write_values(w, args...);
        Promise<R2> p;
        send_parcel(dest, action, w.take(), [p](bool ok, ByteReader& r) {
            try {
                if (!ok) throw std::runtime_error(read_value<std::string>(r));
                if constexpr (std::is_void_v<R>)
                    p.set_value(Unit{});
                else
                    p.set_value(read_value<R>(r));
            } catch (...) {
                p.set_exception(std::current_exception());
            }
        });
        return p.future();
    }

    /// Fire-and-forget parcel: the action runs on dest, any result is discarded.
    template <typename... Args>
    void remote_post(LocalityId dest, ActionId action, const Args&... args) {
        ByteWriter w;
        write_values(w, args...);
        send_parcel(dest, action, w.take(), nullptr);
    }

    // ---- collectives ----

    /// Folds one contribution per locality over a tree rooted at locality 0;
    /// every participant receives the result. Each locality must call this
    /// exactly once per round with the same op, or the round times out.
    template <typename T>
    T all_reduce(T value, ReduceOp op) {
        ByteWriter w;
        Wire<T>::write(w, value);
        auto out = all_reduce_bytes(w.take(), collective_tag<T>(), op);
        ByteReader r(out);
        return Wire<T>::read(r);
    }

    // ---- counters ----

    /// Counter snapshot; remote localities are queried over the wire.
    MetricsSnapshot counters(LocalityId loc);
    std::vector<MetricsSnapshot> all_counters();

    template <typename T>
    static std::uint8_t collective_tag();

private:
    friend class Locality;
    friend struct detail::RuntimeImpl;

    using ReplyHandler = std::function<void(bool ok, ByteReader&)>;
    void enqueue_task(std::function<void()> fn);
    void send_parcel(LocalityId dest, ActionId action, std::vector<std::byte> payload,
                     ReplyHandler on_reply);
    std::vector<std::byte> all_reduce_bytes(std::vector<std::byte> value, std::uint8_t tag,
                                            ReduceOp op);

    std::unique_ptr<detail::RuntimeImpl> impl_;
};

template <> inline std::uint8_t Runtime::collective_tag<std::uint64_t>() { return 0; }
template <> inline std::uint8_t Runtime::collective_tag<double>() { return 1; }
template <> inline std::uint8_t Runtime::collective_tag<std::array<double, 2>>() { return 2; }
template <> inline std::uint8_t Runtime::collective_tag<std::array<double, 3>>() { return 3; }

}  // namespace dgraph

#include "dgraph/runtime.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/ioctl.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <deque>
#include <map>
#include <thread>

namespace dgraph {

void RuntimeConfig::validate() const {
    if (localities < 1) throw std::invalid_argument("need at least one locality");
    if (workers_per_locality < 1) throw std::invalid_argument("need at least one worker per locality");
    if (reserved_remote_workers >= workers_per_locality)
        throw std::invalid_argument("reserved workers must be fewer than workers (R < W)");
    if (coalesce_max_messages < 1) throw std::invalid_argument("coalesce_max_messages must be >= 1");
    if (injected_latency.count() < 0) throw std::invalid_argument("injected latency must be >= 0");
    if (transport == Transport::socket) {
        if (peers.size() != localities)
            throw std::invalid_argument("socket transport needs one peer address per locality");
        if (rank >= localities) throw std::invalid_argument("rank out of range");
    } else {
        if (rank != 0) throw std::invalid_argument("inproc transport hosts all localities; rank must be 0");
    }
}

namespace detail {

constexpr ActionId kReplyAction = 0;
constexpr ActionId kShutdownAction = 1;
constexpr ActionId kCollUpAction = 2;
constexpr ActionId kCollDownAction = 3;
constexpr ActionId kCountersAction = 4;

using Clock = std::chrono::steady_clock;
using Task = std::function<void()>;
using ReplyHandler = std::function<void(bool, ByteReader&)>;

struct Frame {
    ActionId action = 0;
    std::uint64_t token = 0;  // 0: no reply wanted; else origin << 48 | sequence
    std::vector<std::byte> payload;

    std::size_t wire_size() const { return 4 + 4 + 8 + payload.size(); }
};

inline LocalityId token_origin(std::uint64_t token) {
    return static_cast<LocalityId>(token >> 48);
}

struct Counters {
    std::atomic<std::uint64_t> tasks_executed{0};
    std::atomic<std::uint64_t> steals{0};
    std::atomic<std::uint64_t> parcels_sent{0};
    std::atomic<std::uint64_t> parcels_received{0};
    std::atomic<std::uint64_t> wire_messages_sent{0};
    std::atomic<std::uint64_t> bytes_sent{0};
    std::atomic<std::uint64_t> remote_actions_served{0};
    std::atomic<std::int64_t> graph_storage_bytes{0};
    std::atomic<std::uint64_t> collective_rounds{0};
    std::unique_ptr<std::atomic<std::uint64_t>[]> actions_served;
    std::size_t num_actions = 0;

    MetricsSnapshot snapshot() const {
        MetricsSnapshot m;
        m.tasks_executed = tasks_executed.load();
        m.steals = steals.load();
        m.parcels_sent = parcels_sent.load();
        m.parcels_received = parcels_received.load();
        m.wire_messages_sent = wire_messages_sent.load();
        m.bytes_sent = bytes_sent.load();
        m.remote_actions_served = remote_actions_served.load();
        m.graph_storage_bytes = static_cast<std::uint64_t>(std::max<std::int64_t>(0, graph_storage_bytes.load()));
        m.collective_rounds = collective_rounds.load();
        m.actions_served.resize(num_actions);
        for (std::size_t i = 0; i < num_actions; ++i) m.actions_served[i] = actions_served[i].load();
        return m;
    }
};

struct LocalityState;

struct WorkerState {
    LocalityState* loc = nullptr;
    std::uint32_t index = 0;
    bool reserved = false;
    std::mutex m;
    std::deque<Task> own;
    std::thread thread;
};

struct OutBuf {
    std::vector<Frame> frames;
    Clock::time_point deadline{};
};

struct CollectiveRound {
    std::uint32_t children_got = 0;
    bool own = false;
    bool has_acc = false;
    std::uint8_t tag = 0;
    std::uint8_t op = 0;
    std::vector<std::byte> acc;
    Promise<std::vector<std::byte>> done;
};

struct CollectiveEngine {
    std::mutex m;
    std::uint64_t next_seq = 0;
    std::map<std::uint64_t, CollectiveRound> rounds;
};

struct LocalityState {
    LocalityId id = 0;
    RuntimeImpl* rt = nullptr;
    Locality pub;

    std::vector<std::unique_ptr<WorkerState>> workers;
    std::mutex inject_m;
    std::deque<Task> inject;
    std::mutex service_m;
    std::deque<Task> service;
    std::mutex sleep_m;
    std::condition_variable sleep_cv;
    std::atomic<std::int64_t> active_tasks{0};

    std::mutex out_m;
    std::vector<OutBuf> out;

    std::atomic<std::uint64_t> token_seq{1};
    std::mutex pending_m;
    std::unordered_map<std::uint64_t, ReplyHandler> pending;

    CollectiveEngine coll;
    Counters counters;
};

thread_local WorkerState* tl_worker = nullptr;
thread_local LocalityState* tl_locality = nullptr;

// ---------------------------------------------------------------- delay line

/// Holds wire messages for the injected-latency window before local delivery.
struct DelayLine {
    struct Item {
        Clock::time_point at;
        LocalityId dest;
        std::vector<Frame> batch;
    };
    struct Later {
        bool operator()(const Item& a, const Item& b) const { return a.at > b.at; }
    };

    std::mutex m;
    std::condition_variable cv;
    std::vector<Item> heap;
    bool stop = false;
    std::thread th;
    RuntimeImpl* rt = nullptr;

    void schedule(Clock::time_point at, LocalityId dest, std::vector<Frame> batch) {
        {
            std::lock_guard lk(m);
            heap.push_back({at, dest, std::move(batch)});
            std::push_heap(heap.begin(), heap.end(), Later{});
        }
        cv.notify_one();
    }

    std::size_t size() {
        std::lock_guard lk(m);
        return heap.size();
    }

    void run();
    void shutdown() {
        {
            std::lock_guard lk(m);
            stop = true;
        }
        cv.notify_one();
        if (th.joinable()) th.join();
    }
};

// ------------------------------------------------------------------- sockets

struct SocketTransport {
    RuntimeImpl* rt = nullptr;
    int listen_fd = -1;
    std::vector<int> fds;
    std::vector<std::unique_ptr<std::mutex>> send_mx;
    std::vector<std::thread> recv_threads;
    std::atomic<bool> closing{false};

    void start(std::uint64_t table_hash);
    void send_batch(LocalityId dest, const std::vector<std::byte>& buf);
    void recv_loop(LocalityId peer);
    void close_all();
};

// -------------------------------------------------------------- runtime impl

struct RuntimeImpl {
    RuntimeConfig cfg;
    Runtime* self = nullptr;

    struct ActionEntry {
        std::string name;
        RawAction fn;
        ActionKind kind = ActionKind::service;
    };
    std::vector<ActionEntry> actions;
    std::unordered_map<std::string, ActionId> action_ids;
    std::vector<std::string> action_name_list;

    std::vector<std::unique_ptr<LocalityState>> locals;  // size L; socket: only [rank]

    std::atomic<bool> started{false};
    std::atomic<bool> stop_workers{false};
    std::atomic<bool> aborting{false};  // unclean stop: unblock helpers waiting on lost replies

    std::mutex flush_m;
    std::condition_variable flush_cv;
    bool flush_stop = false;
    bool flush_dirty = false;
    std::thread flusher;

    bool shutdown_flag = false;
    std::mutex shutdown_m;
    std::condition_variable shutdown_cv;

    DelayLine delay;
    SocketTransport sock;

    explicit RuntimeImpl(RuntimeConfig c) : cfg(std::move(c)) { cfg.validate(); }

    bool hosts(LocalityId id) const {
        return cfg.transport == Transport::inproc || id == cfg.rank;
    }

    LocalityState* root_local() {
        return locals[cfg.transport == Transport::inproc ? 0 : cfg.rank].get();
    }

    LocalityState* current_or_root() {
        if (tl_locality && tl_locality->rt == this) return tl_locality;
        return root_local();
    }

    // ---- registration ----

    ActionId register_raw(std::string name, RawAction fn, ActionKind kind) {
        if (started.load()) throw std::logic_error("actions must be registered before start()");
        if (action_ids.count(name)) throw std::invalid_argument("action '" + name + "' already registered");
        ActionId id = static_cast<ActionId>(actions.size());
        action_ids.emplace(name, id);
        action_name_list.push_back(name);
        actions.push_back({std::move(name), std::move(fn), kind});
        return id;
    }

    std::uint64_t table_hash() const {
        std::uint64_t h = 1469598103934665603ull;  // FNV-1a
        for (const auto& n : action_name_list) {
            for (char c : n) {
                h ^= static_cast<std::uint8_t>(c);
                h *= 1099511628211ull;
            }
            h ^= 0xFF;
            h *= 1099511628211ull;
        }
        return h;
    }

    void register_system_actions();

    // ---- lifecycle ----

    void start();
    void stop(bool broadcast_shutdown);
    void serve();

    // ---- scheduling ----

    void push_inject(LocalityState* loc, Task t) {
        {
            std::lock_guard lk(loc->inject_m);
            loc->inject.push_back(std::move(t));
        }
        loc->sleep_cv.notify_all();
    }

    void push_service(LocalityState* loc, Task t) {
        {
            std::lock_guard lk(loc->service_m);
            loc->service.push_back(std::move(t));
        }
        loc->sleep_cv.notify_all();
    }

    void enqueue_task(Task t) {
        if (!started.load()) throw std::logic_error("runtime not started");
        LocalityState* loc = current_or_root();
        if (tl_worker && tl_worker->loc == loc && !tl_worker->reserved) {
            {
                std::lock_guard lk(tl_worker->m);
                tl_worker->own.push_back(std::move(t));
            }
            loc->sleep_cv.notify_all();
            return;
        }
        push_inject(loc, std::move(t));
    }

    void worker_main(WorkerState* w);

    // ---- parcels ----

    void send_parcel(LocalityId dest, ActionId action, std::vector<std::byte> payload,
                     ReplyHandler on_reply);
    void enqueue_out(LocalityState* src, LocalityId dest, Frame f);
    void transmit(LocalityState* src, LocalityId dest, std::vector<Frame> batch);
    void deliver_local(LocalityId dest, std::vector<Frame> batch);
    void process_batch(LocalityState* loc, std::vector<Frame>& batch);
    void execute_action(LocalityState* loc, Frame& f);
    void flusher_main();
    void flush_all_now();

    template <typename... Args>
    void post_internal(LocalityId dest, ActionId action, const Args&... args) {
        ByteWriter w;
        write_values(w, args...);
        send_parcel(dest, action, w.take(), nullptr);
    }

    // ---- collectives ----

    static std::uint32_t collective_parent(LocalityId r) { return r & (r - 1); }

    static std::vector<LocalityId> collective_children(LocalityId r, std::uint32_t L) {
        std::vector<LocalityId> out;
        const std::uint64_t lsb = r == 0 ? (std::uint64_t{1} << 32) : (r & (~std::uint64_t{r} + 1));
        for (std::uint64_t bit = 1; bit < lsb; bit <<= 1) {
            const std::uint64_t c = r + bit;
            if (c >= L) break;
            out.push_back(static_cast<LocalityId>(c));
        }
        return out;
    }

    static void fold_bytes(std::vector<std::byte>& acc, std::span<const std::byte> in,
                           std::uint8_t tag, std::uint8_t op);
    void collective_contribute(LocalityState* loc, std::uint64_t seq, std::uint8_t tag,
                               std::uint8_t op, std::span<const std::byte> bytes, bool from_child);
    void collective_finish(LocalityState* loc, std::uint64_t seq, std::vector<std::byte> result);
    std::vector<std::byte> all_reduce_bytes(std::vector<std::byte> value, std::uint8_t tag,
                                            ReduceOp op);

    // ---- drain ----

    bool locally_idle();
    std::uint64_t undelivered_count();
};

// -------------------------------------------------------- task acquisition

static bool pop_front_locked(std::mutex& m, std::deque<Task>& q, LocalityState* loc, Task& out) {
    std::lock_guard lk(m);
    if (q.empty()) return false;
    out = std::move(q.front());
    q.pop_front();
    loc->active_tasks.fetch_add(1, std::memory_order_relaxed);
    return true;
}

static bool acquire_task(WorkerState* w, Task& out) {
    LocalityState* loc = w->loc;
    if (!w->reserved) {
        {
            std::lock_guard lk(w->m);
            if (!w->own.empty()) {
                out = std::move(w->own.back());
                w->own.pop_back();
                loc->active_tasks.fetch_add(1, std::memory_order_relaxed);
                return true;
            }
        }
        if (pop_front_locked(loc->inject_m, loc->inject, loc, out)) return true;
        if (pop_front_locked(loc->service_m, loc->service, loc, out)) return true;
        // steal from a sibling's queue front
        const std::size_t n = loc->workers.size();
        for (std::size_t k = 1; k < n; ++k) {
            WorkerState* v = loc->workers[(w->index + k) % n].get();
            if (v->reserved || v == w) continue;
            std::lock_guard lk(v->m);
            if (v->own.empty()) continue;
            out = std::move(v->own.front());
            v->own.pop_front();
            loc->active_tasks.fetch_add(1, std::memory_order_relaxed);
            loc->counters.steals.fetch_add(1, std::memory_order_relaxed);
            return true;
        }
        return false;
    }
    // reserved workers only ever serve incoming-parcel work
    return pop_front_locked(loc->service_m, loc->service, loc, out);
}

static void run_acquired(LocalityState* loc, Task& t) {
    loc->counters.tasks_executed.fetch_add(1, std::memory_order_relaxed);
    try {
        t();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "dgraph: task escaped with exception: %s\n", e.what());
    } catch (...) {
        std::fprintf(stderr, "dgraph: task escaped with unknown exception\n");
    }
    loc->active_tasks.fetch_sub(1, std::memory_order_relaxed);
}

void wait_on(FutureStateBase* st) {
    if (!st) throw std::logic_error("wait on an invalid future");
    WorkerState* w = tl_worker;
    if (!w) {
        std::unique_lock lk(st->m);
        st->cv.wait(lk, [&] { return st->settled_nolock(); });
        return;
    }
    Task t;
    for (;;) {
        if (st->settled()) return;
        if (acquire_task(w, t)) {
            run_acquired(w->loc, t);
            t = nullptr;
            continue;
        }
        if (w->loc->rt->aborting.load(std::memory_order_relaxed))
            throw std::runtime_error("runtime is stopping");
        std::unique_lock lk(st->m);
        if (st->cv.wait_for(lk, std::chrono::microseconds(200),
                            [&] { return st->settled_nolock(); }))
            return;
    }
}

bool wait_on_until(FutureStateBase* st, Clock::time_point deadline) {
    if (!st) throw std::logic_error("wait on an invalid future");
    WorkerState* w = tl_worker;
    if (!w) {
        std::unique_lock lk(st->m);
        return st->cv.wait_until(lk, deadline, [&] { return st->settled_nolock(); });
    }
    Task t;
    for (;;) {
        if (st->settled()) return true;
        if (Clock::now() >= deadline) return st->settled();
        if (acquire_task(w, t)) {
            run_acquired(w->loc, t);
            t = nullptr;
            continue;
        }
        if (w->loc->rt->aborting.load(std::memory_order_relaxed))
            throw std::runtime_error("runtime is stopping");
        std::unique_lock lk(st->m);
        auto slice = std::min(deadline, Clock::now() + std::chrono::microseconds(200));
        if (st->cv.wait_until(lk, slice, [&] { return st->settled_nolock(); })) return true;
    }
}

void RuntimeImpl::worker_main(WorkerState* w) {
    tl_worker = w;
    tl_locality = w->loc;
    Task t;
    while (!stop_workers.load(std::memory_order_acquire)) {
        if (acquire_task(w, t)) {
            run_acquired(w->loc, t);
            t = nullptr;
        } else {
            std::unique_lock lk(w->loc->sleep_m);
            w->loc->sleep_cv.wait_for(lk, std::chrono::microseconds(300));
        }
    }
    tl_worker = nullptr;
    tl_locality = nullptr;
}

// --------------------------------------------------------------- wire format

static std::vector<std::byte> encode_batch(const std::vector<Frame>& batch) {
    std::size_t total = 0;
    for (const Frame& f : batch) total += f.wire_size();
    ByteWriter w(total);
    for (const Frame& f : batch) {
        w.put_le(12 + f.payload.size(), 4);
        w.put_le(f.action, 4);
        w.put_le(f.token, 8);
        w.raw(f.payload);
    }
    return w.take();
}

// ------------------------------------------------------------------ parcels

void RuntimeImpl::send_parcel(LocalityId dest, ActionId action, std::vector<std::byte> payload,
                              ReplyHandler on_reply) {
    if (!started.load()) throw std::logic_error("runtime not started");
    LocalityState* src = current_or_root();

    auto fail_now = [&](const std::string& msg) {
        if (!on_reply) return;
        ByteWriter w;
        Wire<std::string>::write(w, msg);
        ByteReader r(w.bytes());
        on_reply(false, r);
    };
    if (dest >= cfg.localities) {
        fail_now("destination locality " + std::to_string(dest) + " out of range");
        return;
    }
    if (action == kReplyAction || action >= actions.size()) {
        fail_now("unregistered action id " + std::to_string(action));
        return;
    }

    Frame f;
    f.action = action;
    f.payload = std::move(payload);
    if (on_reply) {
        f.token = (static_cast<std::uint64_t>(src->id) << 48) |
                  src->token_seq.fetch_add(1, std::memory_order_relaxed);
        std::lock_guard lk(src->pending_m);
        src->pending.emplace(f.token, std::move(on_reply));
    }
    src->counters.parcels_sent.fetch_add(1, std::memory_order_relaxed);
    enqueue_out(src, dest, std::move(f));
}

void RuntimeImpl::enqueue_out(LocalityState* src, LocalityId dest, Frame f) {
    std::vector<Frame> batch;
    bool first = false;
    {
        std::lock_guard lk(src->out_m);
        OutBuf& b = src->out[dest];
        if (b.frames.empty()) {
            b.deadline = Clock::now() + cfg.coalesce_max_delay;
            first = true;
        }
        b.frames.push_back(std::move(f));
        if (b.frames.size() >= cfg.coalesce_max_messages) {
            batch = std::move(b.frames);
            b.frames.clear();
            first = false;
        }
    }
    if (!batch.empty()) {
        transmit(src, dest, std::move(batch));
    } else if (first) {
        std::lock_guard lk(flush_m);
        flush_dirty = true;
        flush_cv.notify_one();
    }
}

void RuntimeImpl::flusher_main() {
    std::unique_lock lk(flush_m);
    while (!flush_stop) {
        lk.unlock();
        auto now = Clock::now();
        auto next = Clock::time_point::max();
        for (auto& lsp : locals) {
            if (!lsp) continue;
            LocalityState* ls = lsp.get();
            for (LocalityId d = 0; d < cfg.localities; ++d) {
                std::vector<Frame> batch;
                {
                    std::lock_guard g(ls->out_m);
                    OutBuf& b = ls->out[d];
                    if (b.frames.empty()) continue;
                    if (b.deadline <= now) {
                        batch = std::move(b.frames);
                        b.frames.clear();
                    } else {
                        next = std::min(next, b.deadline);
                    }
                }
                if (!batch.empty()) transmit(ls, d, std::move(batch));
            }
        }
        lk.lock();
        if (flush_stop) break;
        if (flush_dirty) {
            flush_dirty = false;
            continue;  // recompute deadlines
        }
        if (next == Clock::time_point::max())
            flush_cv.wait(lk, [&] { return flush_stop || flush_dirty; });
        else
            flush_cv.wait_until(lk, next);
    }
}

void RuntimeImpl::flush_all_now() {
    for (auto& lsp : locals) {
        if (!lsp) continue;
        LocalityState* ls = lsp.get();
        for (LocalityId d = 0; d < cfg.localities; ++d) {
            std::vector<Frame> batch;
            {
                std::lock_guard g(ls->out_m);
                if (ls->out[d].frames.empty()) continue;
                batch = std::move(ls->out[d].frames);
                ls->out[d].frames.clear();
            }
            if (!batch.empty()) transmit(ls, d, std::move(batch));
        }
    }
}

void RuntimeImpl::transmit(LocalityState* src, LocalityId dest, std::vector<Frame> batch) {
    src->counters.wire_messages_sent.fetch_add(1, std::memory_order_relaxed);
    std::uint64_t bytes = 0;
    for (const Frame& f : batch) bytes += f.wire_size();
    src->counters.bytes_sent.fetch_add(bytes, std::memory_order_relaxed);

    if (cfg.transport == Transport::inproc) {
        if (cfg.injected_latency.count() > 0 && dest != src->id) {
            delay.schedule(Clock::now() + cfg.injected_latency, dest, std::move(batch));
        } else {
            deliver_local(dest, std::move(batch));
        }
        return;
    }
    if (dest == cfg.rank) {
        deliver_local(dest, std::move(batch));
        return;
    }
    try {
        sock.send_batch(dest, encode_batch(batch));
    } catch (const std::exception& e) {
        // fail the replies this batch was carrying
        std::string msg = std::string("transport failure: ") + e.what();
        for (const Frame& f : batch) {
            if (f.token == 0 || token_origin(f.token) != src->id) continue;
            ReplyHandler h;
            {
                std::lock_guard lk(src->pending_m);
                auto it = src->pending.find(f.token);
                if (it == src->pending.end()) continue;
                h = std::move(it->second);
                src->pending.erase(it);
            }
            ByteWriter w;
            Wire<std::string>::write(w, msg);
            ByteReader r(w.bytes());
            h(false, r);
        }
    }
}

void DelayLine::run() {
    std::unique_lock lk(m);
    while (!stop) {
        if (heap.empty()) {
            cv.wait(lk, [&] { return stop || !heap.empty(); });
            continue;
        }
        auto at = heap.front().at;
        if (Clock::now() < at) {
            cv.wait_until(lk, at);
            continue;
        }
        std::pop_heap(heap.begin(), heap.end(), Later{});
        Item item = std::move(heap.back());
        heap.pop_back();
        lk.unlock();
        rt->deliver_local(item.dest, std::move(item.batch));
        lk.lock();
    }
}

void RuntimeImpl::deliver_local(LocalityId dest, std::vector<Frame> batch) {
    LocalityState* ls = locals[dest].get();
    ls->counters.parcels_received.fetch_add(batch.size(), std::memory_order_relaxed);
    push_service(ls, [this, ls, b = std::move(batch)]() mutable { process_batch(ls, b); });
}

void RuntimeImpl::process_batch(LocalityState* loc, std::vector<Frame>& batch) {
    bool pushed_compute = false;
    for (Frame& f : batch) {
        if (f.action == kReplyAction) {
            ReplyHandler h;
            {
                std::lock_guard lk(loc->pending_m);
                auto it = loc->pending.find(f.token);
                if (it != loc->pending.end()) {
                    h = std::move(it->second);
                    loc->pending.erase(it);
                }
            }
            if (h) {
                ByteReader r(f.payload);
                auto ok = read_value<std::uint8_t>(r) == 0;
                h(ok, r);
            }
            continue;
        }
        if (f.action >= actions.size()) {
            std::fprintf(stderr, "dgraph: dropping parcel with unknown action %u\n", f.action);
            continue;
        }
        if (actions[f.action].kind == ActionKind::service) {
            execute_action(loc, f);
        } else {
            std::lock_guard lk(loc->inject_m);
            loc->inject.push_back([this, loc, fr = std::move(f)]() mutable { execute_action(loc, fr); });
            pushed_compute = true;
        }
    }
    if (pushed_compute) loc->sleep_cv.notify_all();
}

void RuntimeImpl::execute_action(LocalityState* loc, Frame& f) {
    loc->counters.remote_actions_served.fetch_add(1, std::memory_order_relaxed);
    if (f.action < loc->counters.num_actions)
        loc->counters.actions_served[f.action].fetch_add(1, std::memory_order_relaxed);

    ByteWriter result;
    bool ok = true;
    std::string err;
    try {
        ByteReader in(f.payload);
        actions[f.action].fn(loc->pub, in, result);
    } catch (const std::exception& e) {
        ok = false;
        err = e.what();
    } catch (...) {
        ok = false;
        err = "unknown error";
    }
    if (f.token == 0) return;

    ByteWriter reply;
    Wire<std::uint8_t>::write(reply, ok ? 0 : 1);
    if (ok) {
        reply.raw(result.bytes());
    } else {
        Wire<std::string>::write(reply, "action '" + actions[f.action].name + "' failed: " + err);
    }
    Frame rf;
    rf.action = kReplyAction;
    rf.token = f.token;
    rf.payload = reply.take();
    loc->counters.parcels_sent.fetch_add(1, std::memory_order_relaxed);
    enqueue_out(loc, token_origin(f.token), std::move(rf));
}

// -------------------------------------------------------------- collectives

void RuntimeImpl::fold_bytes(std::vector<std::byte>& acc, std::span<const std::byte> in,
                             std::uint8_t tag, std::uint8_t op) {
    auto fold1 = [op](double a, double b) {
        switch (static_cast<ReduceOp>(op)) {
            case ReduceOp::sum: return a + b;
            case ReduceOp::min: return std::min(a, b);
            case ReduceOp::max: return std::max(a, b);
        }
        return a;
    };
    ByteReader ra(acc), rb(in);
    ByteWriter w;
    switch (tag) {
        case 0: {
            auto a = read_value<std::uint64_t>(ra);
            auto b = read_value<std::uint64_t>(rb);
            std::uint64_t r = 0;
            switch (static_cast<ReduceOp>(op)) {
                case ReduceOp::sum: r = a + b; break;
                case ReduceOp::min: r = std::min(a, b); break;
                case ReduceOp::max: r = std::max(a, b); break;
            }
            Wire<std::uint64_t>::write(w, r);
            break;
        }
        case 1:
            Wire<double>::write(w, fold1(read_value<double>(ra), read_value<double>(rb)));
            break;
        case 2:
        case 3: {
            const std::size_t n = tag == 2 ? 2 : 3;
            for (std::size_t i = 0; i < n; ++i)
                Wire<double>::write(w, fold1(read_value<double>(ra), read_value<double>(rb)));
            break;
        }
        default:
            throw std::logic_error("unknown collective type tag");
    }
    acc = w.take();
}

void RuntimeImpl::collective_contribute(LocalityState* loc, std::uint64_t seq, std::uint8_t tag,
                                        std::uint8_t op, std::span<const std::byte> bytes,
                                        bool from_child) {
    bool complete = false;
    std::vector<std::byte> folded;
    const auto children = collective_children(loc->id, cfg.localities);
    {
        std::lock_guard lk(loc->coll.m);
        CollectiveRound& r = loc->coll.rounds[seq];
        if (!r.has_acc) {
            r.acc.assign(bytes.begin(), bytes.end());
            r.has_acc = true;
            r.tag = tag;
            r.op = op;
        } else {
            fold_bytes(r.acc, bytes, r.tag, r.op);
        }
        if (from_child)
            ++r.children_got;
        else
            r.own = true;
        if (r.own && r.children_got == children.size()) {
            complete = true;
            folded = r.acc;
        }
    }
    if (!complete) return;
    if (loc->id == 0) {
        collective_finish(loc, seq, std::move(folded));
    } else {
        post_internal(collective_parent(loc->id), kCollUpAction, seq, tag, op, folded);
    }
}

void RuntimeImpl::collective_finish(LocalityState* loc, std::uint64_t seq,
                                    std::vector<std::byte> result) {
    for (LocalityId c : collective_children(loc->id, cfg.localities))
        post_internal(c, kCollDownAction, seq, result);
    Promise<std::vector<std::byte>> done;
    {
        std::lock_guard lk(loc->coll.m);
        done = loc->coll.rounds[seq].done;
    }
    done.set_value(std::move(result));
}

std::vector<std::byte> RuntimeImpl::all_reduce_bytes(std::vector<std::byte> value, std::uint8_t tag,
                                                     ReduceOp op) {
    if (!started.load()) throw std::logic_error("runtime not started");
    LocalityState* me = current_or_root();
    std::uint64_t seq = 0;
    Future<std::vector<std::byte>> fut;
    {
        std::lock_guard lk(me->coll.m);
        seq = me->coll.next_seq++;
        fut = me->coll.rounds[seq].done.future();
    }
    me->counters.collective_rounds.fetch_add(1, std::memory_order_relaxed);
    collective_contribute(me, seq, tag, static_cast<std::uint8_t>(op), value, false);
    if (!fut.wait_for(cfg.collective_timeout)) {
        std::lock_guard lk(me->coll.m);
        me->coll.rounds.erase(seq);
        throw std::runtime_error("collective round " + std::to_string(seq) +
                                 " timed out; mismatched participation across localities?");
    }
    auto out = fut.get();
    {
        std::lock_guard lk(me->coll.m);
        me->coll.rounds.erase(seq);
    }
    return out;
}

// ----------------------------------------------------------------- lifecycle

void RuntimeImpl::register_system_actions() {
    register_raw("sys.reply", [](Locality&, ByteReader&, ByteWriter&) {
        throw std::logic_error("reply pseudo-action invoked");
    }, ActionKind::service);

    register_raw("sys.shutdown", [this](Locality&, ByteReader&, ByteWriter&) {
        {
            std::lock_guard lk(shutdown_m);
            shutdown_flag = true;
        }
        shutdown_cv.notify_all();
    }, ActionKind::service);

    register_raw("sys.coll_up", [this](Locality& loc, ByteReader& in, ByteWriter&) {
        auto seq = read_value<std::uint64_t>(in);
        auto tag = read_value<std::uint8_t>(in);
        auto op = read_value<std::uint8_t>(in);
        auto bytes = read_value<std::vector<std::byte>>(in);
        collective_contribute(locals[loc.id()].get(), seq, tag, op, bytes, true);
    }, ActionKind::service);

    register_raw("sys.coll_down", [this](Locality& loc, ByteReader& in, ByteWriter&) {
        auto seq = read_value<std::uint64_t>(in);
        auto bytes = read_value<std::vector<std::byte>>(in);
        collective_finish(locals[loc.id()].get(), seq, std::move(bytes));
    }, ActionKind::service);

    register_raw("sys.counters", [this](Locality& loc, ByteReader&, ByteWriter& out) {
        Wire<MetricsSnapshot>::write(out, locals[loc.id()]->counters.snapshot());
    }, ActionKind::service);
}

void RuntimeImpl::start() {
    if (started.load()) throw std::logic_error("runtime already started");
    locals.resize(cfg.localities);
    for (LocalityId id = 0; id < cfg.localities; ++id) {
        if (!hosts(id)) continue;
        auto ls = std::make_unique<LocalityState>();
        ls->id = id;
        ls->rt = this;
        ls->pub.id_ = id;
        ls->pub.rt_ = self;
        ls->pub.state_ = ls.get();
        ls->out.resize(cfg.localities);
        ls->counters.num_actions = actions.size();
        ls->counters.actions_served = std::make_unique<std::atomic<std::uint64_t>[]>(actions.size());
        for (std::size_t i = 0; i < actions.size(); ++i) ls->counters.actions_served[i] = 0;
        locals[id] = std::move(ls);
    }

    if (cfg.transport == Transport::socket) {
        sock.rt = this;
        sock.start(table_hash());
    }
    if (cfg.transport == Transport::inproc && cfg.injected_latency.count() > 0) {
        delay.rt = this;
        delay.th = std::thread([this] { delay.run(); });
    }
    flusher = std::thread([this] { flusher_main(); });

    stop_workers.store(false);
    for (auto& lsp : locals) {
        if (!lsp) continue;
        LocalityState* ls = lsp.get();
        ls->workers.resize(cfg.workers_per_locality);
        for (std::uint32_t i = 0; i < cfg.workers_per_locality; ++i) {
            auto w = std::make_unique<WorkerState>();
            w->loc = ls;
            w->index = i;
            w->reserved = i < cfg.reserved_remote_workers;
            ls->workers[i] = std::move(w);
        }
        for (auto& w : ls->workers) w->thread = std::thread([this, wp = w.get()] { worker_main(wp); });
    }
    started.store(true);
}

bool RuntimeImpl::locally_idle() {
    for (auto& lsp : locals) {
        if (!lsp) continue;
        LocalityState* ls = lsp.get();
        if (ls->active_tasks.load() != 0) return false;
        {
            std::lock_guard lk(ls->inject_m);
            if (!ls->inject.empty()) return false;
        }
        {
            std::lock_guard lk(ls->service_m);
            if (!ls->service.empty()) return false;
        }
        for (auto& w : ls->workers) {
            std::lock_guard lk(w->m);
            if (!w->own.empty()) return false;
        }
        {
            std::lock_guard lk(ls->pending_m);
            if (!ls->pending.empty()) return false;
        }
        {
            std::lock_guard lk(ls->out_m);
            for (const auto& b : ls->out)
                if (!b.frames.empty()) return false;
        }
    }
    if (cfg.transport == Transport::inproc && delay.th.joinable() && delay.size() > 0) return false;
    return true;
}

std::uint64_t RuntimeImpl::undelivered_count() {
    std::uint64_t n = 0;
    for (auto& lsp : locals) {
        if (!lsp) continue;
        LocalityState* ls = lsp.get();
        {
            std::lock_guard lk(ls->pending_m);
            n += ls->pending.size();
        }
        {
            std::lock_guard lk(ls->out_m);
            for (const auto& b : ls->out) n += b.frames.size();
        }
    }
    return n;
}

void RuntimeImpl::stop(bool broadcast_shutdown) {
    if (!started.load()) return;

    // drain in-flight parcels; the flusher keeps pushing aged batches out
    const auto deadline = Clock::now() + cfg.drain_timeout;
    bool clean = false;
    for (;;) {
        if (locally_idle()) {
            clean = true;
            break;
        }
        if (Clock::now() >= deadline) break;
        std::this_thread::sleep_for(std::chrono::microseconds(500));
    }
    const std::uint64_t undelivered = clean ? 0 : undelivered_count();

    if (!clean) {
        // unblock any task stuck waiting for a reply that will never come
        aborting.store(true, std::memory_order_relaxed);
        for (auto& lsp : locals) {
            if (!lsp) continue;
            std::unordered_map<std::uint64_t, ReplyHandler> leftover;
            {
                std::lock_guard lk(lsp->pending_m);
                leftover.swap(lsp->pending);
            }
            for (auto& [token, h] : leftover) {
                ByteWriter w;
                Wire<std::string>::write(w, "runtime stopped before reply arrived");
                ByteReader r(w.bytes());
                h(false, r);
            }
        }
    }

    if (cfg.transport == Transport::socket && cfg.rank == 0 && broadcast_shutdown) {
        for (LocalityId p = 0; p < cfg.localities; ++p)
            if (p != cfg.rank) post_internal(p, kShutdownAction);
        flush_all_now();
    }

    stop_workers.store(true, std::memory_order_release);
    for (auto& lsp : locals) {
        if (!lsp) continue;
        lsp->sleep_cv.notify_all();
        for (auto& w : lsp->workers)
            if (w->thread.joinable()) w->thread.join();
    }
    {
        std::lock_guard lk(flush_m);
        flush_stop = true;
    }
    flush_cv.notify_all();
    if (flusher.joinable()) flusher.join();
    delay.shutdown();
    if (cfg.transport == Transport::socket) sock.close_all();

    // settle anything still waiting so no future hangs forever
    for (auto& lsp : locals) {
        if (!lsp) continue;
        std::unordered_map<std::uint64_t, ReplyHandler> leftover;
        {
            std::lock_guard lk(lsp->pending_m);
            leftover.swap(lsp->pending);
        }
        for (auto& [token, h] : leftover) {
            ByteWriter w;
            Wire<std::string>::write(w, "runtime stopped before reply arrived");
            ByteReader r(w.bytes());
            h(false, r);
        }
    }

    started.store(false);
    if (!clean)
        throw std::runtime_error("runtime stopped with " + std::to_string(undelivered) +
                                 " undelivered parcels after drain timeout");
}

void RuntimeImpl::serve() {
    if (cfg.transport != Transport::socket || cfg.rank == 0)
        throw std::logic_error("serve() is for non-root socket ranks");
    {
        std::unique_lock lk(shutdown_m);
        shutdown_cv.wait(lk, [&] { return shutdown_flag; });
    }
    stop(false);
}

// ------------------------------------------------------------------ sockets

namespace {

void read_exact_or_throw(int fd, void* buf, std::size_t n) {
    auto* p = static_cast<char*>(buf);
    while (n > 0) {
        ssize_t r = ::recv(fd, p, n, 0);
        if (r <= 0) throw std::runtime_error("connection closed");
        p += r;
        n -= static_cast<std::size_t>(r);
    }
}

bool read_exact(int fd, void* buf, std::size_t n) {
    auto* p = static_cast<char*>(buf);
    while (n > 0) {
        ssize_t r = ::recv(fd, p, n, 0);
        if (r <= 0) return false;
        p += r;
        n -= static_cast<std::size_t>(r);
    }
    return true;
}

std::pair<std::string, std::uint16_t> split_host_port(const std::string& addr) {
    auto pos = addr.rfind(':');
    if (pos == std::string::npos) throw std::invalid_argument("peer address needs host:port, got " + addr);
    return {addr.substr(0, pos), static_cast<std::uint16_t>(std::stoi(addr.substr(pos + 1)))};
}

}  // namespace

void SocketTransport::start(std::uint64_t table_hash) {
    const auto& cfg = rt->cfg;
    const std::uint32_t L = cfg.localities;
    fds.assign(L, -1);
    send_mx.resize(L);
    for (auto& m : send_mx) m = std::make_unique<std::mutex>();

    auto [host, port] = split_host_port(cfg.peers[cfg.rank]);
    (void)host;  // we always bind the wildcard address
    listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    ::setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_addr.s_addr = htonl(INADDR_ANY);
    sa.sin_port = htons(port);
    if (::bind(listen_fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
        throw std::runtime_error("bind to port " + std::to_string(port) + " failed: " + std::strerror(errno));
    if (::listen(listen_fd, static_cast<int>(L)) != 0) throw std::runtime_error("listen failed");

    auto handshake_send = [&](int fd) {
        ByteWriter w;
        write_values(w, cfg.rank, table_hash);
        if (::send(fd, w.bytes().data(), w.size(), 0) != static_cast<ssize_t>(w.size()))
            throw std::runtime_error("handshake send failed");
    };
    auto handshake_check = [&](std::uint64_t their_hash) {
        if (their_hash != table_hash)
            throw std::runtime_error("peer action table differs; all localities must register "
                                     "the same actions in the same order");
    };

    // connect to lower ranks, accept from higher ranks
    for (LocalityId q = 0; q < cfg.rank; ++q) {
        auto [qhost, qport] = split_host_port(cfg.peers[q]);
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (::getaddrinfo(qhost.c_str(), std::to_string(qport).c_str(), &hints, &res) != 0)
            throw std::runtime_error("cannot resolve peer " + cfg.peers[q]);
        const auto deadline = Clock::now() + std::chrono::seconds(20);
        int fd = -1;
        for (;;) {
            fd = ::socket(AF_INET, SOCK_STREAM, 0);
            if (fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) == 0) break;
            if (fd >= 0) ::close(fd);
            fd = -1;
            if (Clock::now() >= deadline) {
                ::freeaddrinfo(res);
                throw std::runtime_error("cannot connect to peer " + cfg.peers[q]);
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(25));
        }
        ::freeaddrinfo(res);
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        handshake_send(fd);
        std::byte hello[12];
        read_exact_or_throw(fd, hello, sizeof hello);
        ByteReader r(hello);
        (void)read_value<std::uint32_t>(r);
        handshake_check(read_value<std::uint64_t>(r));
        fds[q] = fd;
    }
    for (LocalityId i = cfg.rank + 1; i < L; ++i) {
        int fd = ::accept(listen_fd, nullptr, nullptr);
        if (fd < 0) throw std::runtime_error("accept failed");
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        std::byte hello[12];
        read_exact_or_throw(fd, hello, sizeof hello);
        ByteReader r(hello);
        auto their_rank = read_value<std::uint32_t>(r);
        handshake_check(read_value<std::uint64_t>(r));
        if (their_rank >= L || fds[their_rank] != -1) throw std::runtime_error("bad peer rank in handshake");
        handshake_send(fd);
        fds[their_rank] = fd;
    }
    ::close(listen_fd);
    listen_fd = -1;

    for (LocalityId q = 0; q < L; ++q) {
        if (q == cfg.rank) continue;
        recv_threads.emplace_back([this, q] { recv_loop(q); });
    }
}

void SocketTransport::send_batch(LocalityId dest, const std::vector<std::byte>& buf) {
    std::lock_guard lk(*send_mx[dest]);
    const char* p = reinterpret_cast<const char*>(buf.data());
    std::size_t n = buf.size();
    while (n > 0) {
        ssize_t r = ::send(fds[dest], p, n, MSG_NOSIGNAL);
        if (r <= 0) throw std::runtime_error(std::string("send failed: ") + std::strerror(errno));
        p += r;
        n -= static_cast<std::size_t>(r);
    }
}

void SocketTransport::recv_loop(LocalityId peer) {
    const int fd = fds[peer];
    std::vector<Frame> batch;
    for (;;) {
        std::byte lenbuf[4];
        if (!read_exact(fd, lenbuf, 4)) break;
        ByteReader lr(lenbuf);
        auto len = static_cast<std::size_t>(read_value<std::uint32_t>(lr));
        if (len < 12) break;
        std::vector<std::byte> body(len);
        if (!read_exact(fd, body.data(), len)) break;
        Frame f;
        {
            ByteReader hr(std::span<const std::byte>(body.data(), 12));
            f.action = read_value<std::uint32_t>(hr);
            f.token = read_value<std::uint64_t>(hr);
        }
        f.payload.assign(body.begin() + 12, body.end());
        batch.push_back(std::move(f));

        int avail = 0;
        if (batch.size() < 4096 && ::ioctl(fd, FIONREAD, &avail) == 0 && avail >= 4) continue;
        rt->deliver_local(rt->cfg.rank, std::move(batch));
        batch = {};
    }
    if (!batch.empty()) rt->deliver_local(rt->cfg.rank, std::move(batch));
    if (!closing.load() && !rt->stop_workers.load())
        std::fprintf(stderr, "dgraph: connection to locality %u lost\n", peer);
}

void SocketTransport::close_all() {
    closing.store(true);
    for (int& fd : fds) {
        if (fd >= 0) {
            ::shutdown(fd, SHUT_RDWR);
            ::close(fd);
            fd = -1;
        }
    }
    for (auto& t : recv_threads)
        if (t.joinable()) t.join();
    recv_threads.clear();
}

}  // namespace detail

// ------------------------------------------------------------ public facade

void Locality::add_graph_storage_bytes(std::int64_t delta) {
    state_->counters.graph_storage_bytes.fetch_add(delta, std::memory_order_relaxed);
}

Runtime::Runtime(RuntimeConfig cfg) : impl_(std::make_unique<detail::RuntimeImpl>(std::move(cfg))) {
    impl_->self = this;
    impl_->register_system_actions();
}

Runtime::~Runtime() {
    try {
        impl_->stop(true);
    } catch (...) {
    }
}

ActionId Runtime::register_raw_action(std::string name, RawAction fn, ActionKind kind) {
    return impl_->register_raw(std::move(name), std::move(fn), kind);
}

ActionId Runtime::action_id(std::string_view name) const {
    auto it = impl_->action_ids.find(std::string(name));
    if (it == impl_->action_ids.end())
        throw std::invalid_argument("no action named '" + std::string(name) + "'");
    return it->second;
}

const std::vector<std::string>& Runtime::action_names() const { return impl_->action_name_list; }

void Runtime::start() { impl_->start(); }
void Runtime::stop() { impl_->stop(true); }
bool Runtime::running() const { return impl_->started.load(); }
void Runtime::serve() { impl_->serve(); }

std::uint32_t Runtime::locality_count() const { return impl_->cfg.localities; }

bool Runtime::is_root() const {
    return impl_->cfg.transport == Transport::inproc || impl_->cfg.rank == 0;
}

LocalityId Runtime::here() const { return impl_->current_or_root()->id; }

bool Runtime::on_reserved_worker() { return detail::tl_worker && detail::tl_worker->reserved; }

Locality& Runtime::local(LocalityId id) {
    if (id >= impl_->cfg.localities) throw std::out_of_range("locality id out of range");
    if (!impl_->hosts(id))
        throw std::logic_error("locality " + std::to_string(id) + " lives in another process");
    return impl_->locals[id]->pub;
}

const RuntimeConfig& Runtime::config() const { return impl_->cfg; }

void Runtime::enqueue_task(std::function<void()> fn) { impl_->enqueue_task(std::move(fn)); }

void Runtime::send_parcel(LocalityId dest, ActionId action, std::vector<std::byte> payload,
                          ReplyHandler on_reply) {
    impl_->send_parcel(dest, action, std::move(payload), std::move(on_reply));
}

std::vector<std::byte> Runtime::all_reduce_bytes(std::vector<std::byte> value, std::uint8_t tag,
                                                 ReduceOp op) {
    return impl_->all_reduce_bytes(std::move(value), tag, op);
}

MetricsSnapshot Runtime::counters(LocalityId loc) {
    if (loc >= impl_->cfg.localities) throw std::out_of_range("locality id out of range");
    if (impl_->hosts(loc)) return impl_->locals[loc]->counters.snapshot();
    return remote_invoke<MetricsSnapshot>(loc, detail::kCountersAction).get();
}

std::vector<MetricsSnapshot> Runtime::all_counters() {
    std::vector<MetricsSnapshot> out;
    out.reserve(impl_->cfg.localities);
    for (LocalityId i = 0; i < impl_->cfg.localities; ++i) out.push_back(counters(i));
    return out;
}

}  // namespace dgraph

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgraph/graph.hpp"
#include "dgraph/runtime.hpp"

namespace dgraph {

/// Block decomposition of [0, N) into localities * parts_per_locality
/// contiguous ranges whose sizes differ by at most one vertex; partitions
/// [k*P, (k+1)*P) belong to locality k. Every locality keeps a full copy, so
/// ownership lookups never communicate.
class PartitionMap {
public:
    PartitionMap() = default;

    static PartitionMap block(std::uint32_t num_vertices, std::uint32_t localities,
                              std::uint32_t parts_per_locality);

    std::uint32_t num_vertices() const { return n_; }
    std::uint32_t localities() const { return localities_; }
    std::uint32_t parts_per_locality() const { return parts_; }
    std::uint32_t num_partitions() const { return localities_ * parts_; }

    VertexId part_begin(std::uint32_t p) const { return cuts_[p]; }
    VertexId part_end(std::uint32_t p) const { return cuts_[p + 1]; }

    /// Partition containing v, O(1); throws std::out_of_range for v >= N.
    std::uint32_t partition_of(VertexId v) const;

    LocalityId locality_of_partition(std::uint32_t p) const { return p / parts_; }

    /// (owning locality, partition index) of v.
    std::pair<LocalityId, std::uint32_t> owner_of(VertexId v) const {
        auto p = partition_of(v);
        return {locality_of_partition(p), p};
    }

    const std::vector<VertexId>& cuts() const { return cuts_; }

    friend bool operator==(const PartitionMap&, const PartitionMap&) = default;

private:
    std::uint32_t n_ = 0;
    std::uint32_t localities_ = 1;
    std::uint32_t parts_ = 1;
    std::vector<VertexId> cuts_;  // num_partitions()+1 boundaries
};

template <>
struct Wire<PartitionMap> {
    static void write(ByteWriter& w, const PartitionMap& m) {
        write_values(w, m.num_vertices(), m.localities(), m.parts_per_locality());
    }
    static PartitionMap read(ByteReader& r) {
        auto n = read_value<std::uint32_t>(r);
        auto l = read_value<std::uint32_t>(r);
        auto p = read_value<std::uint32_t>(r);
        return PartitionMap::block(n, l, p);
    }
};

/// One partition's share of a distributed CSR: offsets rebased to the range
/// start, targets still global vertex ids.
struct CsrSlice {
    VertexId first = 0;
    VertexId last = 0;
    std::vector<std::uint64_t> offsets;  // (last-first)+1 entries
    std::vector<VertexId> targets;

    std::span<const VertexId> neighbors(VertexId u) const {
        const auto i = u - first;
        return {targets.data() + offsets[i], targets.data() + offsets[i + 1]};
    }
};

/// Locality-resident part of a distributed graph: the slices this locality
/// owns plus the partition map. Out-edges of every owned vertex are fully
/// local by construction.
struct LocalCsr {
    PartitionMap map;
    LocalityId owner = 0;
    std::uint64_t global_edges = 0;
    bool sorted = false;
    std::unordered_map<std::uint32_t, CsrSlice> slices;  // by partition id
    std::int64_t bytes_accounted = 0;

    const CsrSlice& slice(std::uint32_t partition) const;
    /// Neighbor range of an owned vertex; throws if v is not resident here.
    std::span<const VertexId> neighbors(VertexId v) const;
};

/// Driver-side description of a distributed CSR graph.
struct DistCsrHandle {
    std::string name;
    PartitionMap map;
    std::uint64_t num_edges = 0;
    bool sorted = false;
};

/// Locality-resident slices of a distributed per-vertex array. Elements are
/// stored exactly once, on their owner; direct access to a vertex that lives
/// elsewhere throws (remote access must go through an explicit remote action).
template <typename T>
struct LocalArray {
    PartitionMap map;
    LocalityId owner = 0;
    std::vector<std::vector<T>> parts;  // indexed by partition - first_part

    std::uint32_t first_part() const { return owner * map.parts_per_locality(); }

    T* slot(VertexId v) {
        auto [loc, p] = map.owner_of(v);
        if (loc != owner) return nullptr;
        return parts[p - first_part()].data() + (v - map.part_begin(p));
    }

    T get(VertexId v) {
        T* s = slot(v);
        if (!s)
            throw std::logic_error("vertex " + std::to_string(v) +
                                   " is not local; remote elements require a remote action");
        return *s;
    }

    void set(VertexId v, T x) {
        T* s = slot(v);
        if (!s)
            throw std::logic_error("vertex " + std::to_string(v) +
                                   " is not local; remote elements require a remote action");
        *s = x;
    }

    void atomic_add(VertexId v, T x) {
        T* s = slot(v);
        if (!s) throw std::logic_error("atomic_add on a non-local vertex");
        std::atomic_ref<T>(*s).fetch_add(x, std::memory_order_relaxed);
    }

    /// Atomic compare-and-set; true when this call performed the transition.
    bool claim(VertexId v, T expected, T desired) {
        T* s = slot(v);
        if (!s) throw std::logic_error("claim on a non-local vertex");
        return std::atomic_ref<T>(*s).compare_exchange_strong(expected, desired,
                                                              std::memory_order_acq_rel);
    }

    std::vector<T>& part_values(std::uint32_t partition) { return parts[partition - first_part()]; }
};

template <typename T>
struct DistArrayHandle {
    std::string name;
    PartitionMap map;
};

namespace dist_detail {
template <typename T>
struct ArraySuffix;
template <>
struct ArraySuffix<double> {
    static constexpr const char* value = "f64";
};
template <>
struct ArraySuffix<std::uint32_t> {
    static constexpr const char* value = "u32";
};
template <>
struct ArraySuffix<std::uint64_t> {
    static constexpr const char* value = "u64";
};

template <typename T>
std::string array_action(const char* op) {
    return std::string("array.") + op + "." + ArraySuffix<T>::value;
}
}  // namespace dist_detail

/// Registers the graph-slice and array actions; call on every locality's
/// runtime before start().
void register_partition_actions(Runtime& rt);

// ---- distributed CSR ----

/// Ships per-partition slices of g to their owners under `name` and returns
/// the driver-side handle. Concatenating the slices in partition order
/// reproduces g exactly.
DistCsrHandle distribute(Runtime& rt, const CsrGraph& g, const PartitionMap& map,
                         const std::string& name);

/// Fetches every slice back and reassembles the global CSR (verification path).
CsrGraph reassemble(Runtime& rt, const DistCsrHandle& h);

void free_dist_csr(Runtime& rt, const DistCsrHandle& h);

// ---- distributed arrays ----

template <typename T>
DistArrayHandle<T> dist_array_new(Runtime& rt, const PartitionMap& map, const std::string& name,
                                  T init) {
    const ActionId create = rt.action_id(dist_detail::array_action<T>("create"));
    std::vector<Future<Unit>> fs;
    for (LocalityId l = 0; l < map.localities(); ++l)
        fs.push_back(rt.remote_invoke<void>(l, create, name, map, init));
    wait_all(fs);
    return {name, map};
}

/// Creates the array and bulk-initializes it from a flat vector of length N.
template <typename T>
DistArrayHandle<T> dist_array_scatter(Runtime& rt, const PartitionMap& map,
                                      const std::string& name, std::span<const T> values) {
    if (values.size() != map.num_vertices())
        throw std::invalid_argument("scatter length must equal the vertex count");
    auto h = dist_array_new<T>(rt, map, name, T{});
    const ActionId scatter = rt.action_id(dist_detail::array_action<T>("scatter"));
    std::vector<Future<Unit>> fs;
    for (std::uint32_t p = 0; p < map.num_partitions(); ++p) {
        std::vector<T> part(values.begin() + map.part_begin(p), values.begin() + map.part_end(p));
        fs.push_back(rt.remote_invoke<void>(map.locality_of_partition(p), scatter, name, p,
                                            std::move(part)));
    }
    wait_all(fs);
    return h;
}

/// Collects all N elements in vertex order at the caller (locality 0 drives this).
template <typename T>
std::vector<T> gather(Runtime& rt, const DistArrayHandle<T>& h) {
    const ActionId fetch = rt.action_id(dist_detail::array_action<T>("fetch"));
    std::vector<Future<std::vector<T>>> fs;
    for (std::uint32_t p = 0; p < h.map.num_partitions(); ++p)
        fs.push_back(rt.remote_invoke<std::vector<T>>(h.map.locality_of_partition(p), fetch,
                                                      h.name, p));
    std::vector<T> out(h.map.num_vertices());
    for (std::uint32_t p = 0; p < h.map.num_partitions(); ++p) {
        auto part = fs[p].get();
        std::copy(part.begin(), part.end(), out.begin() + h.map.part_begin(p));
    }
    return out;
}

template <typename T>
void dist_array_free(Runtime& rt, const DistArrayHandle<T>& h) {
    const ActionId free_id = rt.action_id("array.free");
    std::vector<Future<Unit>> fs;
    for (LocalityId l = 0; l < h.map.localities(); ++l)
        fs.push_back(rt.remote_invoke<void>(l, free_id, h.name));
    wait_all(fs);
}

/// Explicit remote element accessors (the sanctioned slow path).
template <typename T>
T dist_array_get(Runtime& rt, const DistArrayHandle<T>& h, VertexId v) {
    auto [loc, p] = h.map.owner_of(v);
    (void)p;
    return rt.remote_invoke<T>(loc, rt.action_id(dist_detail::array_action<T>("get1")), h.name, v)
        .get();
}

template <typename T>
void dist_array_set(Runtime& rt, const DistArrayHandle<T>& h, VertexId v, T x) {
    auto [loc, p] = h.map.owner_of(v);
    (void)p;
    rt.remote_invoke<void>(loc, rt.action_id(dist_detail::array_action<T>("set1")), h.name, v, x)
        .get();
}

// ---- partition iteration ----

/// Driver side: invokes `action(partition)` on the owner of every partition
/// and hands back all localities*parts futures.
template <typename R>
std::vector<Future<std::conditional_t<std::is_void_v<R>, Unit, R>>> invoke_on_partitions(
    Runtime& rt, const PartitionMap& map, ActionId action) {
    std::vector<Future<std::conditional_t<std::is_void_v<R>, Unit, R>>> fs;
    fs.reserve(map.num_partitions());
    for (std::uint32_t p = 0; p < map.num_partitions(); ++p)
        fs.push_back(rt.remote_invoke<R>(map.locality_of_partition(p), action, p));
    return fs;
}

/// Locality side: spawns body(partition) as one stealable task per partition
/// owned by the calling locality.
template <typename F>
auto spawn_owned_partitions(Runtime& rt, const PartitionMap& map, F&& body) {
    using R = std::invoke_result_t<F, std::uint32_t>;
    using R2 = std::conditional_t<std::is_void_v<R>, Unit, R>;
    const LocalityId me = rt.here();
    std::vector<Future<R2>> fs;
    fs.reserve(map.parts_per_locality());
    for (std::uint32_t p = me * map.parts_per_locality();
         p < (me + 1) * map.parts_per_locality(); ++p)
        fs.push_back(rt.spawn([body, p] { return body(p); }));
    return fs;
}

}  // namespace dgraph

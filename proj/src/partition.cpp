#include "dgraph/partition.hpp"

#include <algorithm>
#include <stdexcept>

namespace dgraph {

PartitionMap PartitionMap::block(std::uint32_t num_vertices, std::uint32_t localities,
                                 std::uint32_t parts_per_locality) {
    if (localities < 1 || parts_per_locality < 1)
        throw std::invalid_argument("partition map needs at least one locality and one part");
    PartitionMap m;
    m.n_ = num_vertices;
    m.localities_ = localities;
    m.parts_ = parts_per_locality;
    const std::uint64_t total = static_cast<std::uint64_t>(localities) * parts_per_locality;
    m.cuts_.resize(total + 1);
    const std::uint64_t q = num_vertices / total;
    const std::uint64_t r = num_vertices % total;
    std::uint64_t at = 0;
    for (std::uint64_t p = 0; p <= total; ++p) {
        m.cuts_[p] = static_cast<VertexId>(at);
        if (p < total) at += q + (p < r ? 1 : 0);
    }
    return m;
}

std::uint32_t PartitionMap::partition_of(VertexId v) const {
    if (v >= n_) throw std::out_of_range("vertex " + std::to_string(v) + " out of range");
    const std::uint64_t total = num_partitions();
    const std::uint64_t q = n_ / total;
    const std::uint64_t r = n_ % total;
    // first r partitions hold q+1 vertices, the rest hold q
    const std::uint64_t big_span = r * (q + 1);
    if (v < big_span) return static_cast<std::uint32_t>(v / (q + 1));
    return static_cast<std::uint32_t>(r + (v - big_span) / q);
}

const CsrSlice& LocalCsr::slice(std::uint32_t partition) const {
    auto it = slices.find(partition);
    if (it == slices.end())
        throw std::logic_error("partition " + std::to_string(partition) +
                               " is not resident on locality " + std::to_string(owner));
    return it->second;
}

std::span<const VertexId> LocalCsr::neighbors(VertexId v) const {
    auto [loc, p] = map.owner_of(v);
    if (loc != owner)
        throw std::logic_error("vertex " + std::to_string(v) + " is not resident on locality " +
                               std::to_string(owner));
    return slice(p).neighbors(v);
}

namespace {

LocalCsr& resident_graph(Locality& loc, const std::string& name) {
    return *loc.store().get<LocalCsr>(name);
}

template <typename T>
void register_array_actions_for(Runtime& rt) {
    using dist_detail::array_action;

    rt.register_raw_action(
        array_action<T>("create"),
        [](Locality& loc, ByteReader& in, ByteWriter&) {
            auto name = read_value<std::string>(in);
            auto map = read_value<PartitionMap>(in);
            auto init = read_value<T>(in);
            auto arr = std::make_shared<LocalArray<T>>();
            arr->map = map;
            arr->owner = loc.id();
            arr->parts.resize(map.parts_per_locality());
            const std::uint32_t first = arr->first_part();
            for (std::uint32_t i = 0; i < map.parts_per_locality(); ++i)
                arr->parts[i].assign(map.part_end(first + i) - map.part_begin(first + i), init);
            loc.store().put(name, std::move(arr));
        },
        ActionKind::service);

    rt.register_raw_action(
        array_action<T>("scatter"),
        [](Locality& loc, ByteReader& in, ByteWriter&) {
            auto name = read_value<std::string>(in);
            auto p = read_value<std::uint32_t>(in);
            auto values = read_value<std::vector<T>>(in);
            auto arr = loc.store().get<LocalArray<T>>(name);
            auto& part = arr->part_values(p);
            if (values.size() != part.size()) throw std::invalid_argument("scatter size mismatch");
            part = std::move(values);
        },
        ActionKind::service);

    rt.register_raw_action(
        array_action<T>("fetch"),
        [](Locality& loc, ByteReader& in, ByteWriter& out) {
            auto name = read_value<std::string>(in);
            auto p = read_value<std::uint32_t>(in);
            auto arr = loc.store().get<LocalArray<T>>(name);
            Wire<std::vector<T>>::write(out, arr->part_values(p));
        },
        ActionKind::service);

    rt.register_raw_action(
        array_action<T>("get1"),
        [](Locality& loc, ByteReader& in, ByteWriter& out) {
            auto name = read_value<std::string>(in);
            auto v = read_value<std::uint32_t>(in);
            Wire<T>::write(out, loc.store().get<LocalArray<T>>(name)->get(v));
        },
        ActionKind::service);

    rt.register_raw_action(
        array_action<T>("set1"),
        [](Locality& loc, ByteReader& in, ByteWriter&) {
            auto name = read_value<std::string>(in);
            auto v = read_value<std::uint32_t>(in);
            auto x = read_value<T>(in);
            loc.store().get<LocalArray<T>>(name)->set(v, x);
        },
        ActionKind::service);
}

}  // namespace

void register_partition_actions(Runtime& rt) {
    rt.register_raw_action(
        "graph.create",
        [](Locality& loc, ByteReader& in, ByteWriter&) {
            auto name = read_value<std::string>(in);
            auto map = read_value<PartitionMap>(in);
            auto edges = read_value<std::uint64_t>(in);
            auto sorted = read_value<std::uint8_t>(in);
            auto g = std::make_shared<LocalCsr>();
            g->map = map;
            g->owner = loc.id();
            g->global_edges = edges;
            g->sorted = sorted != 0;
            loc.store().put(name, std::move(g));
        },
        ActionKind::service);

    rt.register_raw_action(
        "graph.install_slice",
        [](Locality& loc, ByteReader& in, ByteWriter&) {
            auto name = read_value<std::string>(in);
            auto p = read_value<std::uint32_t>(in);
            CsrSlice s;
            s.first = read_value<std::uint32_t>(in);
            s.last = read_value<std::uint32_t>(in);
            s.offsets = read_value<std::vector<std::uint64_t>>(in);
            s.targets = read_value<std::vector<VertexId>>(in);
            auto g = loc.store().get<LocalCsr>(name);
            const auto bytes = static_cast<std::int64_t>(s.offsets.size() * sizeof(std::uint64_t) +
                                                         s.targets.size() * sizeof(VertexId));
            g->bytes_accounted += bytes;
            loc.add_graph_storage_bytes(bytes);
            g->slices.emplace(p, std::move(s));
        },
        ActionKind::service);

    rt.register_raw_action(
        "graph.fetch_slice",
        [](Locality& loc, ByteReader& in, ByteWriter& out) {
            auto name = read_value<std::string>(in);
            auto p = read_value<std::uint32_t>(in);
            const CsrSlice& s = resident_graph(loc, name).slice(p);
            write_values(out, s.first, s.last, s.offsets, s.targets);
        },
        ActionKind::service);

    rt.register_raw_action(
        "graph.free",
        [](Locality& loc, ByteReader& in, ByteWriter&) {
            auto name = read_value<std::string>(in);
            if (auto g = loc.store().try_get<LocalCsr>(name)) {
                loc.add_graph_storage_bytes(-g->bytes_accounted);
                loc.store().erase(name);
            }
        },
        ActionKind::service);

    rt.register_raw_action(
        "array.free",
        [](Locality& loc, ByteReader& in, ByteWriter&) {
            loc.store().erase(read_value<std::string>(in));
        },
        ActionKind::service);

    register_array_actions_for<double>(rt);
    register_array_actions_for<std::uint32_t>(rt);
    register_array_actions_for<std::uint64_t>(rt);
}

DistCsrHandle distribute(Runtime& rt, const CsrGraph& g, const PartitionMap& map,
                         const std::string& name) {
    if (map.num_vertices() != g.num_vertices())
        throw std::invalid_argument("partition map and graph disagree on the vertex count");

    const ActionId create = rt.action_id("graph.create");
    const ActionId install = rt.action_id("graph.install_slice");

    std::vector<Future<Unit>> fs;
    for (LocalityId l = 0; l < map.localities(); ++l)
        fs.push_back(rt.remote_invoke<void>(l, create, name, map, g.num_edges(),
                                            static_cast<std::uint8_t>(g.sorted_adjacency())));
    wait_all(fs);
    fs.clear();

    for (std::uint32_t p = 0; p < map.num_partitions(); ++p) {
        const VertexId first = map.part_begin(p);
        const VertexId last = map.part_end(p);
        const std::uint64_t ebase = g.offsets()[first];
        std::vector<std::uint64_t> offsets(last - first + 1);
        for (VertexId u = first; u <= last; ++u) offsets[u - first] = g.offsets()[u] - ebase;
        std::vector<VertexId> targets(g.targets().begin() + static_cast<std::ptrdiff_t>(ebase),
                                      g.targets().begin() +
                                          static_cast<std::ptrdiff_t>(g.offsets()[last]));
        fs.push_back(rt.remote_invoke<void>(map.locality_of_partition(p), install, name, p, first,
                                            last, std::move(offsets), std::move(targets)));
    }
    wait_all(fs);
    return {name, map, g.num_edges(), g.sorted_adjacency()};
}

CsrGraph reassemble(Runtime& rt, const DistCsrHandle& h) {
    const ActionId fetch = rt.action_id("graph.fetch_slice");
    using SliceTuple = std::tuple<std::uint32_t, std::uint32_t, std::vector<std::uint64_t>,
                                  std::vector<VertexId>>;
    std::vector<Future<SliceTuple>> fs;
    for (std::uint32_t p = 0; p < h.map.num_partitions(); ++p)
        fs.push_back(
            rt.remote_invoke<SliceTuple>(h.map.locality_of_partition(p), fetch, h.name, p));

    const std::uint32_t n = h.map.num_vertices();
    std::vector<std::uint64_t> offsets(static_cast<std::size_t>(n) + 1, 0);
    std::vector<VertexId> targets;
    targets.reserve(h.num_edges);
    for (std::uint32_t p = 0; p < h.map.num_partitions(); ++p) {
        auto [first, last, soff, stgt] = fs[p].get();
        if (first != h.map.part_begin(p) || last != h.map.part_end(p))
            throw std::runtime_error("slice bounds do not match the partition map");
        const std::uint64_t base = targets.size();
        for (VertexId u = first; u < last; ++u) offsets[u + 1] = base + soff[u - first + 1];
        targets.insert(targets.end(), stgt.begin(), stgt.end());
    }
    return CsrGraph(n, std::move(offsets), std::move(targets), h.sorted);
}

void free_dist_csr(Runtime& rt, const DistCsrHandle& h) {
    const ActionId free_id = rt.action_id("graph.free");
    std::vector<Future<Unit>> fs;
    for (LocalityId l = 0; l < h.map.localities(); ++l)
        fs.push_back(rt.remote_invoke<void>(l, free_id, h.name));
    wait_all(fs);
}

}  // namespace dgraph

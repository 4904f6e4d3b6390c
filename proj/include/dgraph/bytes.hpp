#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

namespace dgraph {

/// Append-only little-endian byte sink used for parcel payloads and wire frames.
class ByteWriter {
public:
    ByteWriter() = default;
    explicit ByteWriter(std::size_t reserve) { buf_.reserve(reserve); }

    void put_le(std::uint64_t v, std::size_t nbytes) {
        for (std::size_t i = 0; i < nbytes; ++i)
            buf_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
    }

    void raw(std::span<const std::byte> bytes) {
        buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    }

    std::size_t size() const { return buf_.size(); }
    const std::vector<std::byte>& bytes() const { return buf_; }
    std::vector<std::byte> take() { return std::move(buf_); }

private:
    std::vector<std::byte> buf_;
};

/// Bounds-checked reader over a byte span; throws on truncated input.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::byte> data) : data_(data) {}

    std::uint64_t get_le(std::size_t nbytes) {
        if (pos_ + nbytes > data_.size())
            throw std::runtime_error("byte stream truncated");
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < nbytes; ++i)
            v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(data_[pos_ + i])) << (8 * i);
        pos_ += nbytes;
        return v;
    }

    std::span<const std::byte> raw(std::size_t nbytes) {
        if (pos_ + nbytes > data_.size())
            throw std::runtime_error("byte stream truncated");
        auto out = data_.subspan(pos_, nbytes);
        pos_ += nbytes;
        return out;
    }

    bool exhausted() const { return pos_ == data_.size(); }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    std::span<const std::byte> data_;
    std::size_t pos_ = 0;
};

// Wire<T> maps a value type onto the byte stream. Specializations below cover
// everything actions are allowed to exchange; anything else fails to compile.
template <typename T, typename Enable = void>
struct Wire;

template <typename T>
struct Wire<T, std::enable_if_t<std::is_integral_v<T> || std::is_enum_v<T>>> {
    static void write(ByteWriter& w, T v) {
        w.put_le(static_cast<std::uint64_t>(v), sizeof(T));
    }
    static T read(ByteReader& r) {
        return static_cast<T>(r.get_le(sizeof(T)));
    }
};

template <>
struct Wire<double> {
    static void write(ByteWriter& w, double v) { w.put_le(std::bit_cast<std::uint64_t>(v), 8); }
    static double read(ByteReader& r) { return std::bit_cast<double>(r.get_le(8)); }
};

template <>
struct Wire<float> {
    static void write(ByteWriter& w, float v) { w.put_le(std::bit_cast<std::uint32_t>(v), 4); }
    static float read(ByteReader& r) { return std::bit_cast<float>(static_cast<std::uint32_t>(r.get_le(4))); }
};

template <>
struct Wire<std::string> {
    static void write(ByteWriter& w, const std::string& s) {
        w.put_le(s.size(), 4);
        w.raw(std::as_bytes(std::span<const char>(s.data(), s.size())));
    }
    static std::string read(ByteReader& r) {
        auto n = static_cast<std::size_t>(r.get_le(4));
        auto b = r.raw(n);
        return std::string(reinterpret_cast<const char*>(b.data()), n);
    }
};

template <typename T>
struct Wire<std::vector<T>> {
    static void write(ByteWriter& w, const std::vector<T>& v) {
        w.put_le(v.size(), 4);
        if constexpr (std::is_arithmetic_v<T>) {
            // fixed-width elements: bulk copy on little-endian hosts
            if constexpr (std::endian::native == std::endian::little) {
                w.raw(std::as_bytes(std::span<const T>(v.data(), v.size())));
                return;
            }
        }
        for (const auto& x : v) Wire<T>::write(w, x);
    }
    static std::vector<T> read(ByteReader& r) {
        auto n = static_cast<std::size_t>(r.get_le(4));
        std::vector<T> out;
        if constexpr (std::is_arithmetic_v<T>) {
            if constexpr (std::endian::native == std::endian::little) {
                auto b = r.raw(n * sizeof(T));
                out.resize(n);
                std::memcpy(out.data(), b.data(), n * sizeof(T));
                return out;
            }
        }
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(Wire<T>::read(r));
        return out;
    }
};

template <typename A, typename B>
struct Wire<std::pair<A, B>> {
    static void write(ByteWriter& w, const std::pair<A, B>& p) {
        Wire<A>::write(w, p.first);
        Wire<B>::write(w, p.second);
    }
    static std::pair<A, B> read(ByteReader& r) {
        A a = Wire<A>::read(r);
        B b = Wire<B>::read(r);
        return {std::move(a), std::move(b)};
    }
};

template <typename T, std::size_t N>
struct Wire<std::array<T, N>> {
    static void write(ByteWriter& w, const std::array<T, N>& a) {
        for (const auto& x : a) Wire<T>::write(w, x);
    }
    static std::array<T, N> read(ByteReader& r) {
        std::array<T, N> out{};
        for (auto& x : out) x = Wire<T>::read(r);
        return out;
    }
};

template <typename... Ts>
struct Wire<std::tuple<Ts...>> {
    static void write(ByteWriter& w, const std::tuple<Ts...>& t) {
        std::apply([&](const auto&... xs) { (Wire<std::decay_t<decltype(xs)>>::write(w, xs), ...); }, t);
    }
    static std::tuple<Ts...> read(ByteReader& r) {
        // brace-init guarantees left-to-right evaluation of the reads
        return std::tuple<Ts...>{Wire<Ts>::read(r)...};
    }
};

struct Unit {};

template <>
struct Wire<Unit> {
    static void write(ByteWriter&, Unit) {}
    static Unit read(ByteReader&) { return {}; }
};

template <typename... Ts>
void write_values(ByteWriter& w, const Ts&... vs) {
    (Wire<std::decay_t<Ts>>::write(w, vs), ...);
}

template <typename T>
T read_value(ByteReader& r) {
    return Wire<T>::read(r);
}

}  // namespace dgraph

#include <doctest.h>

#include <random>

#include "dgraph/bytes.hpp"

using namespace dgraph;

namespace {

template <typename T>
T round_trip(const T& v) {
    ByteWriter w;
    Wire<T>::write(w, v);
    ByteReader r(w.bytes());
    T out = Wire<T>::read(r);
    CHECK(r.exhausted());
    return out;
}

}  // namespace

TEST_CASE("scalar round trips") {
    CHECK(round_trip<std::uint8_t>(0xAB) == 0xAB);
    CHECK(round_trip<std::uint32_t>(0xDEADBEEF) == 0xDEADBEEF);
    CHECK(round_trip<std::uint64_t>(0x0123456789ABCDEFull) == 0x0123456789ABCDEFull);
    CHECK(round_trip<std::int64_t>(-42) == -42);
    CHECK(round_trip<std::int32_t>(-1) == -1);
    CHECK(round_trip<bool>(true) == true);
    CHECK(round_trip<double>(3.141592653589793) == 3.141592653589793);
    CHECK(round_trip<double>(-0.0) == -0.0);
    CHECK(round_trip<float>(1.5f) == 1.5f);
}

TEST_CASE("string and container round trips") {
    CHECK(round_trip<std::string>("") == "");
    CHECK(round_trip<std::string>("hello parcels") == "hello parcels");
    CHECK(round_trip(std::vector<std::uint32_t>{1, 2, 3}) == std::vector<std::uint32_t>{1, 2, 3});
    CHECK(round_trip(std::vector<double>{}) == std::vector<double>{});
    CHECK(round_trip(std::pair<std::uint32_t, double>{7, 0.5}) ==
          std::pair<std::uint32_t, double>{7, 0.5});
    auto t = std::tuple<std::uint32_t, std::string, std::vector<std::uint64_t>>{
        9, "x", {1ull << 40, 2}};
    CHECK(round_trip(t) == t);
    auto a = std::array<double, 3>{1.0, -2.5, 1e-300};
    CHECK(round_trip(a) == a);
    CHECK(round_trip(std::vector<std::string>{"a", "", "bc"}) ==
          std::vector<std::string>{"a", "", "bc"});
}

TEST_CASE("random value round trips") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        std::vector<std::uint64_t> v(rng() % 50);
        for (auto& x : v) x = rng();
        CHECK(round_trip(v) == v);
        const double d = std::bit_cast<double>(rng() | 0x1ull);  // avoid NaN-payload compares
        if (d == d) CHECK(round_trip(d) == d);
    }
}

TEST_CASE("truncated input throws") {
    ByteWriter w;
    Wire<std::uint64_t>::write(w, 1);
    auto bytes = w.take();
    bytes.resize(4);
    ByteReader r(bytes);
    CHECK_THROWS_AS(Wire<std::uint64_t>::read(r), std::runtime_error);

    ByteWriter w2;
    w2.put_le(100, 4);  // claims 100 vector elements, provides none
    ByteReader r2(w2.bytes());
    CHECK_THROWS_AS(Wire<std::vector<std::uint32_t>>::read(r2), std::runtime_error);
}

TEST_CASE("multiple values share one stream") {
    ByteWriter w;
    write_values(w, std::uint32_t{1}, std::string("mid"), double(2.5));
    ByteReader r(w.bytes());
    CHECK(read_value<std::uint32_t>(r) == 1);
    CHECK(read_value<std::string>(r) == "mid");
    CHECK(read_value<double>(r) == 2.5);
    CHECK(r.exhausted());
}

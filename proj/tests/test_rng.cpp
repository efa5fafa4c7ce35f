#include <doctest.h>

#include <set>

#include "fkrwrc/rng.hpp"

using namespace fkrwrc;

TEST_CASE("philox4x32-10 known answers")
{
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == Philox4x32Ctr{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          Philox4x32Ctr{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          Philox4x32Ctr{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("unit interval mapping is (0,1]")
{
    CHECK(bits_to_unit(0) > 0.0);
    CHECK(bits_to_unit(~0ull) == 1.0);
}

TEST_CASE("counter streams are pure and keyed")
{
    const CounterStream a(stream_key(7, "walk", 1, 2));
    const CounterStream b(stream_key(7, "walk", 1, 3));
    CHECK(a.bits(10, 0) == a.bits(10, 0));
    CHECK(a.bits(10, 0) != a.bits(10, 1));
    CHECK(a.bits(10, 0) != b.bits(10, 0));
    CHECK(stream_key(1, "edge") != stream_key(1, "env"));
}

TEST_CASE("sequential generator")
{
    Rng r(5, "test");
    Rng s(5, "test");
    for (int i = 0; i < 100; ++i) CHECK(r() == s());
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) seen.insert(r.below(10));
    CHECK(seen.size() == 10);
    double m = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) m += r.normal();
    CHECK(std::abs(m / n) < 5.0 / std::sqrt(double(n)));
}

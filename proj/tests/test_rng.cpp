#include <doctest.h>

#include <set>

#include "misclass/rng.hpp"

using misclass::RandomStream;

TEST_SUITE("rng") {

TEST_CASE("philox known answer for zero key and counter") {
  // Reference output of Philox4x32-10 with key (0, 0) and counter (0, 0, 0, 0).
  RandomStream rng(0, 0);
  CHECK(rng.next_u32() == 0x6627e8d5u);
  CHECK(rng.next_u32() == 0xe169c58du);
  CHECK(rng.next_u32() == 0xbc57ac4cu);
  CHECK(rng.next_u32() == 0x9b00dbd8u);
}

TEST_CASE("same seed and stream reproduce the sequence") {
  RandomStream a(42, 7);
  RandomStream b(42, 7);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct streams and seeds differ") {
  RandomStream a(42, 0);
  RandomStream b(42, 1);
  RandomStream c(43, 0);
  int same_ab = 0;
  int same_ac = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    same_ab += x == b.next_u64();
    same_ac += x == c.next_u64();
  }
  CHECK(same_ab == 0);
  CHECK(same_ac == 0);
}

TEST_CASE("split depends on identity, not position") {
  RandomStream a(9, 3);
  const RandomStream before = a.split(5);
  for (int i = 0; i < 17; ++i) a.next_u32();
  RandomStream after = a.split(5);
  RandomStream b = before;
  for (int i = 0; i < 50; ++i) REQUIRE(b.next_u64() == after.next_u64());

  std::set<std::uint64_t> firsts;
  for (std::uint64_t k = 0; k < 64; ++k) firsts.insert(a.split(k).next_u64());
  CHECK(firsts.size() == 64);
}

TEST_CASE("uniform draws lie in [0, 1) with the right mean") {
  RandomStream rng(1, 0);
  double sum = 0.0;
  double sum_sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sum_sq += u * u;
  }
  const double mean = sum / n;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.005));
  CHECK(sum_sq / n - mean * mean == doctest::Approx(1.0 / 12.0).epsilon(0.01));

  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform_open();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

}  // TEST_SUITE

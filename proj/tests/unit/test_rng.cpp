#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fedzo/rng.hpp"

using namespace fedzo;

TEST_CASE("same seed reproduces the sequence exactly") {
  RngStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  RngStream a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a.next_u64() == b.next_u64();
  CHECK(equal == 0);
}

TEST_CASE("substream derivation ignores parent draw position") {
  RngStream parent(7);
  RngStream early = parent.substream("estimator", 3);
  for (int i = 0; i < 57; ++i) parent.next_u64();
  RngStream late = parent.substream("estimator", 3);
  for (int i = 0; i < 100; ++i) REQUIRE(early.next_u64() == late.next_u64());
}

TEST_CASE("substreams with distinct labels or indices differ") {
  RngStream parent(7);
  RngStream a = parent.substream("estimator", 0);
  RngStream b = parent.substream("estimator", 1);
  RngStream c = parent.substream("compressor", 0);
  CHECK(a.next_u64() != b.next_u64());
  CHECK(a.next_u64() != c.next_u64());
  CHECK(b.next_u64() != c.next_u64());
}

TEST_CASE("next_double lies in [0,1) with mean near one half") {
  RngStream rng(11);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.next_double();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    sum += v;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("gaussian moments") {
  RngStream rng(13);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.next_gaussian();
    sum += v;
    sum_sq += v * v;
  }
  CHECK(std::fabs(sum / n) < 0.01);
  CHECK(sum_sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("gaussian consumes exactly two uniforms") {
  RngStream a(99), b(99);
  a.next_gaussian();
  b.next_u64();
  b.next_u64();
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("next_below stays in range and covers it") {
  RngStream rng(3);
  std::vector<int> seen(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const auto v = rng.next_below(5);
    REQUIRE(v < 5);
    ++seen[v];
  }
  for (int count : seen) CHECK(count > 800);
}

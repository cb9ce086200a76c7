#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "mtle/rng.hpp"

using mtle::Rng;

TEST_CASE("same seed reproduces the stream bit for bit") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("named streams are decorrelated") {
  Rng init = Rng::stream(7, "init");
  Rng schedule = Rng::stream(7, "schedule");
  Rng salted = Rng::stream(7, "schedule", 1);
  CHECK(init.next_u64() != schedule.next_u64());
  CHECK(Rng::stream(7, "schedule").next_u64() != salted.next_u64());
}

TEST_CASE("uniform_int stays in range and covers it") {
  Rng rng(3);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    std::uint64_t v = rng.uniform_int(7);
    REQUIRE(v < 7);
    ++seen[static_cast<std::size_t>(v)];
  }
  for (int count : seen) CHECK(count > 700);
}

TEST_CASE("uniform lies in [0,1)") {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("truncated normal stays within the clip and matches the analytic stddev") {
  const double stddev = 0.1;
  Rng rng(123);
  const int draws = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    double v = rng.truncated_normal(stddev);
    REQUIRE(std::abs(v) <= 2.0 * stddev);
    sum += v;
    sum_sq += v * v;
  }
  double mean = sum / draws;
  double var = sum_sq / draws - mean * mean;

  // Analytic variance of a standard normal truncated at +/- 2 sigma:
  // 1 - 4 phi(2) / (erf(sqrt(2))), scaled by stddev^2.
  double phi2 = std::exp(-2.0) / std::sqrt(2.0 * M_PI);
  double z = std::erf(std::sqrt(2.0));
  double analytic_std = stddev * std::sqrt(1.0 - 4.0 * phi2 / z);

  CHECK(std::abs(std::sqrt(var) - analytic_std) / analytic_std < 0.05);
  CHECK(std::abs(mean) < 0.01 * stddev * 10);
}

TEST_CASE("shuffle is a permutation and is seed-deterministic") {
  std::vector<int> items(100);
  std::iota(items.begin(), items.end(), 0);
  std::vector<int> copy = items;
  Rng a(9), b(9);
  a.shuffle(items);
  b.shuffle(copy);
  CHECK(items == copy);
  std::vector<int> sorted = items;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("state round trip resumes the identical stream") {
  Rng rng(5);
  rng.next_u64();
  auto saved = rng.state();
  std::vector<std::uint64_t> expected;
  for (int i = 0; i < 16; ++i) expected.push_back(rng.next_u64());
  rng.set_state(saved);
  for (std::uint64_t v : expected) CHECK(rng.next_u64() == v);
}

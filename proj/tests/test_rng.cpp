#include "ewe/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <doctest/doctest.h>

using namespace ewe;

TEST_CASE("same seed, same stream") {
  Rng a(99), b(99), c(100);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    std::uint64_t x = a.next_u64();
    all_equal = all_equal && x == b.next_u64();
    any_diff = any_diff || x != c.next_u64();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform stays in the half-open unit interval") {
  Rng rng(7);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double x = rng.uniform();
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    sum += x;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("below is unbiased across its range") {
  Rng rng(8);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(rng.below(7))];
  for (int k = 0; k < 7; ++k) {
    CHECK(counts[static_cast<std::size_t>(k)] > 9000);
    CHECK(counts[static_cast<std::size_t>(k)] < 11000);
  }
  CHECK(rng.below(1) == 0);
}

TEST_CASE("normal has roughly standard moments") {
  Rng rng(9);
  const int n = 50000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("shuffle permutes and is seed-stable") {
  std::vector<int> base(52);
  for (int i = 0; i < 52; ++i) base[static_cast<std::size_t>(i)] = i;

  std::vector<int> x = base, y = base;
  Rng a(31), b(31);
  a.shuffle(x);
  b.shuffle(y);
  CHECK(x == y);
  CHECK(x != base);
  std::vector<int> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == base);
}

TEST_CASE("derived seeds separate streams and indices") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t stream = 1; stream <= 5; ++stream)
    for (std::uint64_t index = 0; index < 50; ++index)
      CHECK(seen.insert(derive_seed(42, stream, index)).second);
  CHECK(derive_seed(42, kStreamShuffle, 3) == derive_seed(42, kStreamShuffle, 3));
  CHECK(derive_seed(42, kStreamShuffle, 3) != derive_seed(43, kStreamShuffle, 3));
  CHECK(derive_seed(42, kStreamShuffle) != derive_seed(42, kStreamDropout));
}

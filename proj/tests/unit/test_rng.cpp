#include <doctest.h>

#include <cmath>
#include <vector>

#include "cael/rng.hpp"

using cael::Rng;

TEST_CASE("equal seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng c(42), d(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(c.uniform() == d.uniform());
    CHECK(c.normal() == d.normal());
  }
}

TEST_CASE("derived seeds differ by index and are stable") {
  CHECK(cael::derive_seed(1, 0) != cael::derive_seed(1, 1));
  CHECK(cael::derive_seed(1, 0) != cael::derive_seed(2, 0));
  CHECK(cael::derive_seed(7, 3) == cael::derive_seed(7, 3));
}

TEST_CASE("uniform stays in [0,1) and has the right mean") {
  Rng rng(7);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // SE of the mean is 1/sqrt(12 n) ~ 6.5e-4.
  CHECK(std::abs(sum / n - 0.5) < 4 * 6.5e-4);
}

TEST_CASE("normal moments") {
  Rng rng(11);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(sum_sq / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("uniform_int covers its range without bias") {
  Rng rng(3);
  std::vector<int> counts(10, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto v = rng.uniform_int(10);
    REQUIRE(v < 10);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (int c : counts) {
    // 4 sigma binomial band around n/10.
    CHECK(std::abs(c - n / 10) < 4 * std::sqrt(n * 0.1 * 0.9));
  }
  CHECK_THROWS_AS((void)rng.uniform_int(0), cael::InvalidArgument);
}

TEST_CASE("categorical follows the pmf") {
  Rng rng(5);
  const std::vector<double> p{0.2, 0.5, 0.3};
  std::vector<int> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(rng.categorical(p))];
  for (int a = 0; a < 3; ++a) {
    const double expect = n * p[static_cast<std::size_t>(a)];
    const double sd = std::sqrt(expect * (1 - p[static_cast<std::size_t>(a)]));
    CHECK(std::abs(counts[static_cast<std::size_t>(a)] - expect) < 4 * sd);
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include <omp.h>

#include "gmcs/common.hpp"
#include "gmcs/ref.hpp"

using namespace gmcs;

TEST_CASE("rng substream keys ignore the parent's draw position") {
  Rng a(42);
  Rng before = a.substream(7);
  for (int i = 0; i < 13; ++i) a.next_u64();
  Rng after = a.substream(7);
  CHECK(before.key() == after.key());
  for (int i = 0; i < 8; ++i) CHECK(before.next_u64() == after.next_u64());
}

TEST_CASE("rng replay, ranges, and tag separation") {
  Rng a(1), b(1);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (std::uint64_t n : {1ull, 2ull, 7ull, 1000ull})
    for (int i = 0; i < 200; ++i) CHECK(c.below(n) < n);

  CHECK(Rng(3).substream(0).key() != Rng(3).substream(1).key());
  CHECK(Rng(3).substream(5).substream(2).key() != Rng(3).substream(2).substream(5).key());
}

TEST_CASE("halving_reduce folds adjacent pairs") {
  std::vector<double> v;
  CHECK(halving_reduce(v) == 0.0);
  v = {5.0};
  CHECK(halving_reduce(v) == 5.0);
  v = {1.0, 2.0, 3.0};
  CHECK(halving_reduce(v) == 6.0);
}

TEST_CASE("block_sum matches the serial reference") {
  Rng rng(9);
  std::vector<double> v(10000);
  for (double& x : v) x = rng.normal() * std::exp(4.0 * rng.uniform());
  const double got = block_sum(static_cast<std::ptrdiff_t>(v.size()),
                               [&](std::ptrdiff_t i) { return v[static_cast<std::size_t>(i)]; });
  const double want = ref::sum_ref(static_cast<Eigen::Index>(v.size()),
                                   [&](Eigen::Index i) { return v[static_cast<std::size_t>(i)]; });
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
  CHECK(block_sum(0, [](std::ptrdiff_t) { return 1.0; }) == 0.0);
  CHECK(block_sum(1, [](std::ptrdiff_t) { return 3.5; }) == 3.5);
}

TEST_CASE("block_sum is bit-identical across thread counts") {
  Rng rng(11);
  std::vector<double> v(100001);
  for (double& x : v) x = rng.normal();
  auto term = [&](std::ptrdiff_t i) { return v[static_cast<std::size_t>(i)]; };
  omp_set_num_threads(1);
  const double one = block_sum(static_cast<std::ptrdiff_t>(v.size()), term);
  omp_set_num_threads(4);
  const double four = block_sum(static_cast<std::ptrdiff_t>(v.size()), term);
  omp_set_num_threads(1);
  CHECK(std::memcmp(&one, &four, sizeof one) == 0);
}

TEST_CASE("log_sum_exp") {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> all_ninf = {-inf, -inf, -inf};
  CHECK(log_sum_exp(all_ninf.data(), 3) == -inf);

  std::vector<double> two_zeros = {0.0, 0.0};
  CHECK(log_sum_exp(two_zeros.data(), 2) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  std::vector<double> big = {1000.0, 1000.0};
  CHECK(log_sum_exp(big.data(), 2) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));

  Rng rng(5);
  std::vector<double> v(17);
  for (double& x : v) x = 4.0 * rng.normal();
  double direct = 0.0;
  for (double x : v) direct += std::exp(x);
  CHECK(log_sum_exp(v.data(), static_cast<std::ptrdiff_t>(v.size())) ==
        doctest::Approx(std::log(direct)).epsilon(1e-12));
}

TEST_CASE("fnv1a64 known vectors and hex64 formatting") {
  CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cull);
  CHECK(hex64(0) == "0000000000000000");
  CHECK(hex64(0xdeadbeefull) == "00000000deadbeef");
  CHECK(hex64(0xffffffffffffffffull) == "ffffffffffffffff");
}

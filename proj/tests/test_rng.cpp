#include <doctest.h>

#include <cmath>

#include "ntklab/rng.hpp"

using ntklab::Rng;

TEST_CASE("same seed reproduces the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds and child streams differ") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  CHECK(same == 0);

  Rng parent(7);
  Rng c0 = parent.child(0);
  Rng c1 = parent.child(1);
  CHECK(c0.next_u64() != c1.next_u64());
  // child derivation is independent of parent draw position
  Rng parent2(7);
  parent2.next_u64();
  CHECK(parent2.child(0).next_u64() == parent.child(0).next_u64());
}

TEST_CASE("uniform lies in [0,1)") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal moments") {
  Rng rng(5);
  const long n = 1000000;
  double sum = 0.0, sum_sq = 0.0, sum_cube = 0.0;
  for (long i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
    sum_cube += z * z * z;
  }
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(sum_sq / n - 1.0) < 0.01);
  CHECK(std::abs(sum_cube / n) < 0.02);
}

TEST_CASE("matrix fill order is row-major and deterministic") {
  Rng a(11);
  const Eigen::MatrixXd m = a.normal_matrix(2, 3);
  Rng b(11);
  CHECK(m(0, 0) == b.normal());
  CHECK(m(0, 1) == b.normal());
  CHECK(m(0, 2) == b.normal());
  CHECK(m(1, 0) == b.normal());
}

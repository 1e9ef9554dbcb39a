#include "test_util.h"

#include <bolt/error.h>
#include <bolt/sparse_vector.h>

#include <doctest.h>

using namespace bolt;

TEST_CASE("sparseDenseDot hand sums") {
  CHECK(sparseDenseDot(SparseVector(3), DenseVector{5, 6, 7}) == 0.0);
  CHECK(sparseDenseDot(SparseVector(2, {{0, 2.0}, {1, -1.0}}), DenseVector{1, 1}) == 1.0);
  CHECK(sparseDenseDot(SparseVector(4, {{1, 3.0}, {3, 2.0}}), DenseVector{9, 1, 9, 2}) == 7.0);
}

TEST_CASE("sparseDenseDot rejects a dimension mismatch") {
  CHECK_THROWS_AS(sparseDenseDot(SparseVector(3), DenseVector{1, 2}), DimensionError);
}

TEST_CASE("densify") {
  CHECK(densify(SparseVector(3, {{1, 4.0}})) == DenseVector{0, 4, 0});
  CHECK(densify(SparseVector(2)) == DenseVector{0, 0});
  CHECK(densify(SparseVector(1, {{0, -2.0}})) == DenseVector{-2});
}

TEST_CASE("sparsify") {
  CHECK(sparsify(DenseVector{0, 4, 0}) == SparseVector(3, {{1, 4.0}}));
  CHECK(sparsify(DenseVector{0, 0}) == SparseVector(2));
  CHECK(sparsify(DenseVector{1, 0, 2}) == SparseVector(3, {{0, 1.0}, {2, 2.0}}));
}

TEST_CASE("construction validates ordering, range and dimension") {
  CHECK_THROWS_AS(SparseVector(3, {2, 1}, {1.0, 1.0}), ContractError);
  CHECK_THROWS_AS(SparseVector(3, {1, 1}, {1.0, 1.0}), ContractError);
  CHECK_THROWS_AS(SparseVector(3, {3}, {1.0}), ContractError);
  CHECK_THROWS_AS(SparseVector(3, {0, 1}, {1.0}), ContractError);
  CHECK_THROWS_AS(SparseVector(0, {}, {}), DimensionError);
}

TEST_CASE("explicit zeros stay stored") {
  SparseVector v(3, {{1, 0.0}});
  CHECK(v.nnz() == 1);
  CHECK(v.at(1) == 0.0);
  CHECK(sparsify(densify(v)).nnz() == 0);
}

TEST_CASE("property: densify(sparsify(x)) == x") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> coin(0, 2);
  for (int trial = 0; trial < 500; trial++) {
    const std::size_t n = 1 + rng() % 64;
    DenseVector x(n);
    for (std::size_t i = 0; i < n; i++) {
      x[i] = coin(rng) == 0 ? std::normal_distribution<double>()(rng) : 0.0;
    }
    const SparseVector s = sparsify(x);
    REQUIRE(densify(s) == x);
    for (std::size_t k = 1; k < s.nnz(); k++) {
      REQUIRE(s.index(k - 1) < s.index(k));
    }
    for (std::size_t k = 0; k < s.nnz(); k++) {
      REQUIRE(s.value(k) != 0.0);
    }
  }
}

TEST_CASE("property: sparse dot equals the dense dot") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; trial++) {
    const uint32_t n = 1 + static_cast<uint32_t>(rng() % 500);
    const SparseVector v = testing::randomSparse(n, 0.2, rng);
    const DenseVector row(testing::randomNormal(n, rng));
    const DenseVector dv = densify(v);
    double dense = 0.0;
    double mag = 0.0;
    for (uint32_t i = 0; i < n; i++) {
      dense += dv[i] * row[i];
      mag += std::abs(dv[i] * row[i]);
    }
    REQUIRE(std::abs(sparseDenseDot(v, row) - dense) <= 1e-12 * std::max(mag, 1e-300));
  }
}

TEST_CASE("at() finds stored values and returns 0 elsewhere") {
  SparseVector v(10, {{2, 1.5}, {7, -3.0}});
  CHECK(v.at(2) == 1.5);
  CHECK(v.at(7) == -3.0);
  CHECK(v.at(0) == 0.0);
  CHECK(v.at(9) == 0.0);
}

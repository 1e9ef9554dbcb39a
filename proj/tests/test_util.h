#pragma once

#include <bolt/sparse_vector.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace bolt::testing {

inline std::vector<double> randomNormal(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> out(n);
  for (auto& x : out) x = nd(rng);
  return out;
}

// Random sparse vector with roughly `density` of its coordinates stored.
inline SparseVector randomSparse(uint32_t dim, double density, std::mt19937_64& rng,
                                 double scale = 1.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<uint32_t> idx;
  std::vector<double> val;
  for (uint32_t i = 0; i < dim; i++) {
    if (u(rng) < density) {
      idx.push_back(i);
      val.push_back(nd(rng));
    }
  }
  if (idx.empty()) {
    idx.push_back(static_cast<uint32_t>(rng() % dim));
    val.push_back(nd(rng));
  }
  return SparseVector(dim, std::move(idx), std::move(val));
}

inline double relErr(double a, double b, double floor = 0.0) {
  const double den = std::max({std::abs(a), std::abs(b), floor});
  return den == 0.0 ? 0.0 : std::abs(a - b) / den;
}

}  // namespace bolt::testing

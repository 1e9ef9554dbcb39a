#pragma once

#include <cstdint>

namespace bolt {

struct AutotuneConfig {
  // Expected number of neurons retrieved, as a multiple of the s*d target.
  double c1 = 1.0;
  // Upper bound on the predicted sparse/dense cost ratio.
  double c2 = 0.1;
  uint32_t lMax = 256;
};

// Shape of a NeuronIndex: bits per table, number of tables, bucket capacity.
struct IndexShape {
  uint32_t kBits = 0;
  uint32_t numTables = 0;
  uint32_t bucketCap = 0;

  friend bool operator==(const IndexShape&, const IndexShape&) = default;
};

struct AutotunePlan {
  uint32_t kBits = 0;
  uint32_t numTables = 0;
  uint32_t bucketCap = 0;
  AutotuneConfig config;
  uint32_t layerDim = 0;
  uint32_t prevDim = 0;
  double sparsity = 0.0;

  IndexShape shape() const { return {kBits, numTables, bucketCap}; }
};

// Picks (K, L, R) for a sparse layer of width `layerDim` fed by `prevDim`
// inputs. Scans K = 1, 2, ... with L(K) = max(1, round(c1 * s * 2^K)) and
// keeps the last K for which K*L + s*d <= c2*d and L <= lMax both hold.
// R = ceil(2d / 2^K), twice the expected bucket occupancy.
//
// Throws InfeasibleSparsity if K = 1 already breaks the cost budget, and
// ContractError if d < 2 or s is outside (0, 1).
AutotunePlan autotune(uint32_t layerDim, uint32_t prevDim, double sparsity,
                      const AutotuneConfig& config = {});

// A plan with caller-chosen K and L (R still derived from K). Used for
// grid searches around the autotuned point; cost constraints are not
// enforced.
AutotunePlan manualPlan(uint32_t kBits, uint32_t numTables, uint32_t layerDim,
                        uint32_t prevDim, double sparsity,
                        const AutotuneConfig& config = {});

// (K*L + s*d) / d, the predicted cost of the sparse layer relative to dense.
double planCostRatio(const AutotunePlan& plan);

// ceil(2d / 2^K), at least 1.
uint32_t bucketCapFor(uint32_t layerDim, uint32_t kBits);

// max(1, floor(c1 * s * 2^K + 0.5)).
uint32_t tablesFor(uint32_t kBits, double sparsity, double c1);

}  // namespace bolt

#include <bolt/autotune.h>

#include <bolt/error.h>

#include <cmath>
#include <optional>
#include <sstream>

namespace bolt {

namespace {

constexpr uint32_t kMaxBits = 32;

bool satisfiesBudget(uint32_t kBits, uint32_t numTables, uint32_t layerDim,
                     double sparsity, const AutotuneConfig& config) {
  const double hashing = static_cast<double>(kBits) * numTables;
  return hashing + sparsity * layerDim <= config.c2 * layerDim &&
         numTables <= config.lMax;
}

}  // namespace

uint32_t tablesFor(uint32_t kBits, double sparsity, double c1) {
  const double exact = c1 * sparsity * std::ldexp(1.0, static_cast<int>(kBits));
  const double rounded = std::floor(exact + 0.5);
  if (rounded < 1.0) {
    return 1;
  }
  // Values beyond uint32 range never pass the budget check anyway.
  if (rounded > 4294967295.0) {
    return UINT32_MAX;
  }
  return static_cast<uint32_t>(rounded);
}

uint32_t bucketCapFor(uint32_t layerDim, uint32_t kBits) {
  const double cap =
      std::ceil(2.0 * layerDim / std::ldexp(1.0, static_cast<int>(kBits)));
  return cap < 1.0 ? 1u : static_cast<uint32_t>(cap);
}

AutotunePlan autotune(uint32_t layerDim, uint32_t prevDim, double sparsity,
                      const AutotuneConfig& config) {
  if (layerDim < 2) {
    throw ContractError("autotune: layer dimension must be at least 2");
  }
  if (!(sparsity > 0.0 && sparsity < 1.0)) {
    throw ContractError("autotune: sparsity must lie in (0, 1)");
  }
  if (!(config.c1 > 0.0) || !(config.c2 > 0.0 && config.c2 < 1.0)) {
    throw ContractError("autotune: need c1 > 0 and 0 < c2 < 1");
  }

  std::optional<uint32_t> best;
  for (uint32_t k = 1; k <= kMaxBits; k++) {
    if (!satisfiesBudget(k, tablesFor(k, sparsity, config.c1), layerDim,
                         sparsity, config)) {
      break;
    }
    best = k;
  }

  if (!best) {
    std::ostringstream msg;
    msg << "InfeasibleSparsity: sparsity " << sparsity << " on a layer of width "
        << layerDim << " leaves no hashing budget under c2 = " << config.c2
        << " (need K*L + s*d <= c2*d with K = 1); lower the sparsity or raise c2";
    throw InfeasibleSparsity(msg.str());
  }

  return manualPlan(*best, tablesFor(*best, sparsity, config.c1), layerDim,
                    prevDim, sparsity, config);
}

AutotunePlan manualPlan(uint32_t kBits, uint32_t numTables, uint32_t layerDim,
                        uint32_t prevDim, double sparsity,
                        const AutotuneConfig& config) {
  if (kBits < 1 || kBits > kMaxBits || numTables < 1) {
    throw ContractError("plan needs 1 <= K <= 32 and L >= 1");
  }
  AutotunePlan plan;
  plan.kBits = kBits;
  plan.numTables = numTables;
  plan.bucketCap = bucketCapFor(layerDim, kBits);
  plan.config = config;
  plan.layerDim = layerDim;
  plan.prevDim = prevDim;
  plan.sparsity = sparsity;
  return plan;
}

double planCostRatio(const AutotunePlan& plan) {
  const double hashing = static_cast<double>(plan.kBits) * plan.numTables;
  return (hashing + plan.sparsity * plan.layerDim) / plan.layerDim;
}

}  // namespace bolt

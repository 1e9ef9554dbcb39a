#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>

namespace bolt::testing {

struct Shape {
  uint32_t k;
  uint32_t l;
  uint32_t r;
};

// Independent oracle: evaluate every K in [1, 32] and keep the longest
// feasible prefix, with the rounding rules written out directly.
inline std::optional<Shape> bruteForce(uint32_t d, double s, double c1, double c2, uint32_t lMax) {
  std::optional<Shape> best;
  for (uint32_t k = 1; k <= 32; k++) {
    const double raw = c1 * s * std::ldexp(1.0, static_cast<int>(k));
    const double rounded = std::floor(raw + 0.5);
    const uint32_t l = rounded < 1.0 ? 1u : static_cast<uint32_t>(rounded);
    const bool costOk = static_cast<double>(k) * l + s * d <= c2 * d;
    if (!costOk || l > lMax) {
      break;
    }
    const double buckets = std::ldexp(1.0, static_cast<int>(k));
    const uint32_t r = static_cast<uint32_t>(std::max(1.0, std::ceil(2.0 * d / buckets)));
    best = Shape{k, l, r};
  }
  return best;
}

}  // namespace bolt::testing

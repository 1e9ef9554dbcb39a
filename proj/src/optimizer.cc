#include <bolt/optimizer.h>

#include <bolt/error.h>

#include <cmath>

namespace bolt {

SparseAdamState::SparseAdamState(uint32_t rows, uint32_t cols, AdamHyper hyper)
    : _rows(rows),
      _cols(cols),
      _hyper(hyper),
      _m(static_cast<std::size_t>(rows) * (cols + 1), 0.0),
      _v(static_cast<std::size_t>(rows) * (cols + 1), 0.0),
      _lastStep(rows, 0) {}

void lazyAdamUpdate(SparseAdamState& state, uint32_t row,
                    std::span<double> weights, double& bias,
                    std::span<const double> weightGrad, double biasGrad,
                    uint64_t step) {
  if (weights.size() != state._cols || weightGrad.size() != state._cols) {
    throw DimensionError("lazyAdamUpdate: row length mismatch");
  }
  if (step == 0 || step < state._lastStep[row]) {
    throw ContractError("lazyAdamUpdate: steps are 1-based and non-decreasing");
  }
  const AdamHyper& h = state._hyper;
  const double correct1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
  const double correct2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));

  double* m = state.firstMoment(row).data();
  double* v = state.secondMoment(row).data();
  const uint32_t cols = state._cols;
  for (uint32_t j = 0; j < cols; j++) {
    const double g = weightGrad[j];
    m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g;
    v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g * g;
    weights[j] -= h.lr * (m[j] / correct1) / (std::sqrt(v[j] / correct2) + h.eps);
  }
  m[cols] = h.beta1 * m[cols] + (1.0 - h.beta1) * biasGrad;
  v[cols] = h.beta2 * v[cols] + (1.0 - h.beta2) * biasGrad * biasGrad;
  bias -= h.lr * (m[cols] / correct1) / (std::sqrt(v[cols] / correct2) + h.eps);

  state._lastStep[row] = step;
}

}  // namespace bolt

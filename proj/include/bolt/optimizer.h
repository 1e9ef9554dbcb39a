#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace bolt {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam moments for one layer, one record per neuron row (prevDim weights
// plus the bias). Rows are advanced only when a batch touches them; steps a
// row sat out are not replayed.
class SparseAdamState {
 public:
  SparseAdamState(uint32_t rows, uint32_t cols, AdamHyper hyper);

  uint32_t rows() const { return _rows; }
  uint32_t cols() const { return _cols; }
  const AdamHyper& hyper() const { return _hyper; }

  // Global step of the last update applied to `row`; 0 if never touched.
  uint64_t lastStep(uint32_t row) const { return _lastStep[row]; }

  // Views over the (cols + 1) moments of a row; the bias moment is last.
  std::span<double> firstMoment(uint32_t row) {
    return {_m.data() + static_cast<std::size_t>(row) * (_cols + 1), _cols + 1};
  }
  std::span<double> secondMoment(uint32_t row) {
    return {_v.data() + static_cast<std::size_t>(row) * (_cols + 1), _cols + 1};
  }

 private:
  friend void lazyAdamUpdate(SparseAdamState&, uint32_t, std::span<double>,
                             double&, std::span<const double>, double,
                             uint64_t);

  uint32_t _rows;
  uint32_t _cols;
  AdamHyper _hyper;
  std::vector<double> _m;
  std::vector<double> _v;
  std::vector<uint64_t> _lastStep;
};

// One Adam step on a row at global step `step` (1-based). Bias correction
// uses `step`, not the number of times this row was touched.
void lazyAdamUpdate(SparseAdamState& state, uint32_t row,
                    std::span<double> weights, double& bias,
                    std::span<const double> weightGrad, double biasGrad,
                    uint64_t step);

}  // namespace bolt

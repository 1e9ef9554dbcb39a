#pragma once

#include <bolt/autotune.h>
#include <bolt/lsh_index.h>
#include <bolt/sparse_vector.h>

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

namespace bolt {

enum class Activation : uint8_t { ReLU = 0, Softmax = 1, Identity = 2 };

std::string_view activationName(Activation a);
// Accepts "relu", "softmax", "identity"; throws ContractError otherwise.
Activation parseActivation(std::string_view name);

enum class ForwardMode { Train, SparseInfer, DenseInfer };

enum class NeuronOrigin : uint8_t { Sampled, LabelForced, Padded };

struct ActiveSet {
  // Ascending, distinct, all < layer dim.
  std::vector<uint32_t> ids;
  std::vector<NeuronOrigin> origins;

  std::size_t size() const { return ids.size(); }
  static ActiveSet all(uint32_t dim);
  // Throws ContractError unless `ids` is ascending, distinct and < dim.
  static ActiveSet of(std::vector<uint32_t> ids, uint32_t dim);
};

struct LayerOutput {
  ActiveSet active;
  // w_i . x + b_i for each active id, aligned with active.ids.
  std::vector<double> preactivations;
  // f applied to the preactivations; entries exactly at the active ids.
  SparseVector activations;
  // Bucket chosen in every table; empty when the index was not consulted.
  std::vector<uint32_t> codes;
  // Train mode: labels the hash buckets did not return. These are the
  // candidates for label insertion into the selected buckets.
  std::vector<uint32_t> missedLabels;
};

// Gradients of one sample for one layer, restricted to the active neurons.
// The weight gradient of active row k is the rank-one product
// biasGrads[k] * input over the input's support and is materialized on
// demand; no other row has a gradient.
struct LayerGradients {
  std::vector<uint32_t> ids;
  std::vector<double> biasGrads;
  SparseVector input;
  // Sum over active i of delta_i * w_i, zeros dropped. Empty (dim 0) when
  // not requested.
  SparseVector inputGrad;

  // Values aligned with input.indices().
  std::vector<double> weightRowGrad(std::size_t k) const;
  DenseVector weightRowGradDense(std::size_t k) const;
};

struct SoftmaxCe {
  double loss = 0.0;
  // softmax(logits) - target, aligned with the logits.
  std::vector<double> delta;
};

// Cross entropy of softmax(logits) against the uniform distribution over the
// label positions. `activeIds` names the neuron behind each logit; every
// label must be one of them (ContractError otherwise).
SoftmaxCe lossGradSoftmaxCe(std::span<const double> logits,
                            std::span<const uint32_t> activeIds,
                            std::span<const uint32_t> labels);

// Fully connected layer a_i = f(w_i . x + b_i) that evaluates only an
// LSH-sampled subset of its neurons. With sparsity 1 it has no index and
// always evaluates every neuron.
class SparseLinearLayer {
 public:
  // Autotunes the index for sparsity < 1. Weights are uniform in
  // +-sqrt(6 / (prevDim + dim)), biases zero.
  SparseLinearLayer(uint32_t dim, uint32_t prevDim, double sparsity,
                    Activation activation, uint64_t seed,
                    const AutotuneConfig& config = {});

  // Uses `plan` as given (for grid searches over K and L).
  SparseLinearLayer(uint32_t dim, uint32_t prevDim, Activation activation,
                    const AutotunePlan& plan, uint64_t seed);

  // Dense layer with explicit parameters.
  SparseLinearLayer(uint32_t dim, uint32_t prevDim, Activation activation,
                    std::vector<double> weights, std::vector<double> biases);

  // Train mode forces every label into the active set; labels may be empty
  // for hidden layers. SparseInfer samples ceil(s * dim) neurons, with s
  // taken from `inferenceSparsity` when given. DenseInfer, and any mode on a
  // dense layer, evaluates all neurons.
  LayerOutput forward(const SparseVector& input, ForwardMode mode,
                      std::span<const uint32_t> labels = {},
                      std::optional<double> inferenceSparsity = {}) const;

  // Evaluates exactly the given active set.
  LayerOutput forwardActive(const SparseVector& input, ActiveSet active) const;

  // `upstream` is dL/da over the layer width for ReLU and Identity, and
  // dL/dz (e.g. SoftmaxCe::delta) for Softmax. Its support must lie inside
  // out.active (ContractError otherwise).
  LayerGradients backward(const SparseVector& input, const LayerOutput& out,
                          const SparseVector& upstream,
                          bool wantInputGrad = true) const;

  uint32_t dim() const { return _dim; }
  uint32_t prevDim() const { return _prevDim; }
  double sparsity() const { return _sparsity; }
  Activation activation() const { return _activation; }
  bool isSparse() const { return _index.has_value(); }
  const std::optional<AutotunePlan>& plan() const { return _plan; }
  const NeuronIndex* index() const { return _index ? &*_index : nullptr; }
  NeuronIndex* index() { return _index ? &*_index : nullptr; }

  // Row-major dim x prevDim.
  std::span<const double> weights() const { return _weights; }
  std::span<double> weights() { return _weights; }
  std::span<const double> weightRow(uint32_t i) const {
    return std::span<const double>(_weights).subspan(
        static_cast<std::size_t>(i) * _prevDim, _prevDim);
  }
  std::span<double> weightRow(uint32_t i) {
    return std::span<double>(_weights).subspan(
        static_cast<std::size_t>(i) * _prevDim, _prevDim);
  }
  std::span<const double> biases() const { return _biases; }
  std::span<double> biases() { return _biases; }

  // ceil(s * dim) clamped to [1, dim].
  uint32_t activeCount(double sparsity) const;

  void rebuildIndex();

  void serialize(std::ostream& out) const;
  static SparseLinearLayer deserialize(std::istream& in);

 private:
  SparseLinearLayer() = default;

  void initWeights(uint64_t seed);
  void fillActivations(const SparseVector& input, LayerOutput& out) const;

  uint32_t _dim = 0;
  uint32_t _prevDim = 0;
  double _sparsity = 1.0;
  Activation _activation = Activation::ReLU;
  std::vector<double> _weights;
  std::vector<double> _biases;
  std::optional<AutotunePlan> _plan;
  std::optional<NeuronIndex> _index;
};

}  // namespace bolt

#pragma once

#include <bolt/autotune.h>
#include <bolt/layer.h>
#include <bolt/sparse_vector.h>

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace bolt {

struct LayerSpec {
  uint32_t dim = 0;
  double sparsity = 1.0;
  Activation activation = Activation::ReLU;
};

struct ModelSpec {
  uint32_t inputDim = 0;
  std::vector<LayerSpec> layers;
  AutotuneConfig autotune;
  uint64_t seed = 0;
};

// Per-layer outputs of one forward pass. Layer l > 0 consumes
// outputs[l - 1].activations as its input.
struct ModelPass {
  std::vector<LayerOutput> outputs;

  const LayerOutput& last() const { return outputs.back(); }
};

// Everything one training sample contributes to a batch update.
struct SampleGradients {
  std::vector<LayerGradients> layers;
  double loss = 0.0;
  bool top1Correct = false;
  // Labels the output layer's buckets missed, and the buckets that were
  // selected instead. Empty when nothing needs inserting.
  std::vector<uint32_t> alnLabels;
  std::vector<uint32_t> alnCodes;
};

// A feedforward stack of SparseLinearLayers. Hidden layers hand their
// sparse activation vectors straight to the next layer.
class Model {
 public:
  explicit Model(const ModelSpec& spec);
  explicit Model(std::vector<SparseLinearLayer> layers);

  uint32_t inputDim() const { return _layers.front().prevDim(); }
  uint32_t outputDim() const { return _layers.back().dim(); }
  std::size_t numLayers() const { return _layers.size(); }
  const SparseLinearLayer& layer(std::size_t l) const { return _layers[l]; }
  SparseLinearLayer& layer(std::size_t l) { return _layers[l]; }

  // Labels reach only the output layer. `inferenceSparsity` overrides the
  // output layer's sparsity in SparseInfer mode.
  ModelPass forward(const SparseVector& input, ForwardMode mode,
                    std::span<const uint32_t> labels = {},
                    std::optional<double> inferenceSparsity = {}) const;

  // Train-mode forward, active-set softmax cross entropy, and backward
  // through every layer. Requires a softmax output layer.
  SampleGradients trainSample(const SparseVector& input,
                              std::span<const uint32_t> labels) const;

  void rebuildIndexes();

  // "BLTM", version u32, layer count u32, then each layer: dim, prevDim,
  // sparsity, activation tag, plan, weights, biases, index.
  void save(std::ostream& out) const;
  static Model load(std::istream& in);

  // Writes to a sibling temp file and renames it into place.
  void saveFile(const std::filesystem::path& path) const;
  static Model loadFile(const std::filesystem::path& path);

 private:
  std::vector<SparseLinearLayer> _layers;
};

}  // namespace bolt

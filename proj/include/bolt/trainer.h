#pragma once

#include <bolt/dataset.h>
#include <bolt/layer.h>
#include <bolt/model.h>
#include <bolt/optimizer.h>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace bolt {

struct TrainConfig {
  uint32_t batchSize = 256;
  uint32_t epochs = 1;
  double lr = 1e-3;
  // Batches between index rebuilds.
  uint32_t rebuildInterval = 50;
  // Insert missed labels into the buckets selected for their sample.
  bool alnEnabled = true;
  // Output-layer sparsity for sparse inference; defaults to the training
  // sparsity of the output layer.
  std::optional<double> inferenceSparsity;
  uint64_t seed = 0;
  // Fixed gradient reduction order. When false, workers accumulate into
  // shared buffers in whatever order they finish.
  bool deterministic = true;
  uint32_t workers = 1;
};

struct BatchRecord {
  uint32_t epoch = 0;  // 1-based
  uint32_t batch = 0;  // 1-based within the epoch
  double loss = 0.0;   // mean over the batch
  double pAt1 = 0.0;   // training top-1 over the batch's active sets
  double seconds = 0.0;  // since training started
};

struct EpochStats {
  uint32_t epoch = 0;
  double loss = 0.0;
  double pAt1 = 0.0;
  double seconds = 0.0;  // wall time of this epoch
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::vector<BatchRecord> batches;
};

// Checks labels and feature width against the model; throws DataError.
void validateDataset(const Model& model, const XcDataset& data);

// Owns optimizer state for one model and runs batches over it. Each batch
// runs in three phases: parallel per-sample forward/backward, an exclusive
// update of the touched rows plus the label-insertion flush, and (every
// rebuildInterval batches) an exclusive index rebuild.
class Trainer {
 public:
  Trainer(Model& model, TrainConfig config);

  // Shuffled sample order for `epoch` (1-based); depends only on the seed.
  std::vector<uint32_t> epochOrder(std::size_t numExamples, uint32_t epoch) const;

  // One optimizer step on the given examples. Returns batch loss and
  // training top-1 (epoch, batch and seconds are left 0).
  BatchRecord trainBatch(const XcDataset& data, std::span<const uint32_t> batch);

  TrainReport train(const XcDataset& data,
                    const std::function<void(const BatchRecord&)>& onBatch = {});

  uint64_t step() const { return _step; }
  const SparseAdamState& adamState(std::size_t layer) const { return _adam[layer]; }

 private:
  void applyDeterministic(std::span<const SampleGradients> samples);
  void applyRacy();
  void accumulateRacy(const SampleGradients& sample);

  Model& _model;
  TrainConfig _config;
  std::vector<SparseAdamState> _adam;
  uint64_t _step = 0;
  // Racy-mode accumulators, allocated on first use.
  std::vector<std::vector<double>> _racyWeightGrads;
  std::vector<std::vector<double>> _racyBiasGrads;
  std::vector<std::vector<uint8_t>> _racyTouched;
};

TrainReport train(Model& model, const XcDataset& data, const TrainConfig& config,
                  const std::function<void(const BatchRecord&)>& onBatch = {});

enum class InferenceMode { Sparse, Dense };

// Output neurons ordered by activation (descending, ties by ascending id).
// Sparse mode ranks only the sampled neurons, using
// ceil(inferenceSparsity * d) as the sample size; topK = 0 ranks them all.
std::vector<uint32_t> predict(const Model& model, const SparseVector& input,
                              InferenceMode mode,
                              std::optional<double> inferenceSparsity = {},
                              std::size_t topK = 0);

// |top-k predictions intersect labels| / k.
double precisionAtK(std::span<const uint32_t> ranking,
                    std::span<const uint32_t> labels, std::size_t k);

struct EvalResult {
  double precisionAtK = 0.0;
  // Mean over the first min(1000, n) examples, each predicted alone.
  double meanLatencyMs = 0.0;
};

EvalResult evaluate(const Model& model, const XcDataset& data, std::size_t k,
                    InferenceMode mode, std::optional<double> inferenceSparsity = {},
                    uint32_t workers = 1);

struct Checkpoint {
  double seconds = 0.0;  // training wall time, evaluation excluded
  double pAt1 = 0.0;
};

// Trains for config.epochs, pausing `checkpointsPerEpoch` times per epoch
// to measure p@1 on `heldOut`.
std::vector<Checkpoint> benchmark(Model& model, const XcDataset& trainData,
                                  const XcDataset& heldOut, const TrainConfig& config,
                                  uint32_t checkpointsPerEpoch, InferenceMode mode);

}  // namespace bolt

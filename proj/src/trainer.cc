#include <bolt/trainer.h>

#include <bolt/error.h>
#include <bolt/lsh_index.h>

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <string>

namespace bolt {

namespace {

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int threadCount(uint32_t workers) { return static_cast<int>(std::max(1u, workers)); }

// Runs body(i) for i in [0, n) on `workers` threads and rethrows the first
// exception raised by any iteration.
template <typename Body>
void parallelFor(std::size_t n, uint32_t workers, Body&& body) {
  std::exception_ptr error;
  std::mutex errorLock;
#pragma omp parallel for num_threads(threadCount(workers)) schedule(dynamic, 4)
  for (int64_t i = 0; i < static_cast<int64_t>(n); i++) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> guard(errorLock);
      if (!error) {
        error = std::current_exception();
      }
    }
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

}  // namespace

void validateDataset(const Model& model, const XcDataset& data) {
  if (data.numFeatures != model.inputDim()) {
    throw DataError(DataError::Kind::FeatureOutOfRange, 0,
                    "dataset has " + std::to_string(data.numFeatures) +
                        " features but the model expects " +
                        std::to_string(model.inputDim()));
  }
  for (std::size_t n = 0; n < data.examples.size(); n++) {
    const Example& ex = data.examples[n];
    if (ex.labels.empty()) {
      throw DataError(DataError::Kind::EmptyLabelSet, 0,
                      "example " + std::to_string(n) + " has no labels");
    }
    for (uint32_t label : ex.labels) {
      if (label >= model.outputDim()) {
        throw DataError(DataError::Kind::LabelOutOfRange, 0,
                        "example " + std::to_string(n) + " has label " +
                            std::to_string(label) + " but the output layer has " +
                            std::to_string(model.outputDim()) + " neurons");
      }
    }
  }
}

// ------------------------------------------------------------------ Trainer

Trainer::Trainer(Model& model, TrainConfig config)
    : _model(model), _config(std::move(config)) {
  if (_config.batchSize < 1 || _config.rebuildInterval < 1) {
    throw ContractError("batch size and rebuild interval must be at least 1");
  }
  AdamHyper hyper;
  hyper.lr = _config.lr;
  for (std::size_t l = 0; l < _model.numLayers(); l++) {
    const auto& layer = _model.layer(l);
    _adam.emplace_back(layer.dim(), layer.prevDim(), hyper);
  }
}

std::vector<uint32_t> Trainer::epochOrder(std::size_t numExamples, uint32_t epoch) const {
  std::vector<uint32_t> order(numExamples);
  std::iota(order.begin(), order.end(), 0u);
  std::mt19937_64 gen(splitMix64(_config.seed ^ (uint64_t{epoch} << 32)));
  std::shuffle(order.begin(), order.end(), gen);
  return order;
}

BatchRecord Trainer::trainBatch(const XcDataset& data, std::span<const uint32_t> batch) {
  _step++;
  std::vector<SampleGradients> samples(batch.size());
  const bool racy = !_config.deterministic;
  if (racy && _racyWeightGrads.empty()) {
    for (std::size_t l = 0; l < _model.numLayers(); l++) {
      const auto& layer = _model.layer(l);
      _racyWeightGrads.emplace_back(static_cast<std::size_t>(layer.dim()) * layer.prevDim(), 0.0);
      _racyBiasGrads.emplace_back(layer.dim(), 0.0);
      _racyTouched.emplace_back(layer.dim(), 0);
    }
  }

  parallelFor(batch.size(), _config.workers, [&](std::size_t i) {
    const Example& ex = data.examples[batch[i]];
    samples[i] = _model.trainSample(ex.features, ex.labels);
    if (racy) {
      accumulateRacy(samples[i]);
      samples[i].layers.clear();
    }
  });

  if (racy) {
    applyRacy();
  } else {
    applyDeterministic(samples);
  }

  BatchRecord rec;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    rec.loss += s.loss;
    correct += s.top1Correct ? 1 : 0;
  }
  rec.loss /= static_cast<double>(samples.size());
  rec.pAt1 = static_cast<double>(correct) / static_cast<double>(samples.size());

  if (_config.alnEnabled) {
    NeuronIndex* index = _model.layer(_model.numLayers() - 1).index();
    if (index != nullptr) {
      for (const auto& s : samples) {
        if (!s.alnLabels.empty()) {
          index->insertLabels(s.alnLabels, s.alnCodes);
        }
      }
    }
  }

  if (_step % _config.rebuildInterval == 0) {
    _model.rebuildIndexes();
  }
  return rec;
}

void Trainer::applyDeterministic(std::span<const SampleGradients> samples) {
  for (std::size_t l = 0; l < _model.numLayers(); l++) {
    SparseLinearLayer& layer = _model.layer(l);

    // Group (sample, position) pairs by row, keeping sample order inside
    // each row so the reduction order is fixed.
    std::vector<uint32_t> slot(layer.dim(), UINT32_MAX);
    std::vector<uint32_t> rows;
    std::vector<uint32_t> offsets;
    for (const auto& s : samples) {
      for (uint32_t id : s.layers[l].ids) {
        if (slot[id] == UINT32_MAX) {
          slot[id] = static_cast<uint32_t>(rows.size());
          rows.push_back(id);
          offsets.push_back(0);
        }
        offsets[slot[id]]++;
      }
    }
    std::exclusive_scan(offsets.begin(), offsets.end(), offsets.begin(), 0u);
    std::vector<std::pair<uint32_t, uint32_t>> entries;
    {
      std::size_t count = 0;
      for (const auto& s : samples) {
        count += s.layers[l].ids.size();
      }
      entries.resize(count);
    }
    std::vector<uint32_t> fill = offsets;
    for (uint32_t si = 0; si < samples.size(); si++) {
      const auto& ids = samples[si].layers[l].ids;
      for (uint32_t k = 0; k < ids.size(); k++) {
        entries[fill[slot[ids[k]]]++] = {si, k};
      }
    }
    offsets.push_back(static_cast<uint32_t>(entries.size()));

    const uint32_t prev = layer.prevDim();
    SparseAdamState& adam = _adam[l];
    const uint64_t step = _step;
#pragma omp parallel num_threads(threadCount(_config.workers))
    {
      std::vector<double> grad(prev);
#pragma omp for schedule(dynamic, 16)
      for (int64_t r = 0; r < static_cast<int64_t>(rows.size()); r++) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double biasGrad = 0.0;
        for (uint32_t e = offsets[r]; e < offsets[r + 1]; e++) {
          const LayerGradients& g = samples[entries[e].first].layers[l];
          const double delta = g.biasGrads[entries[e].second];
          biasGrad += delta;
          const auto idx = g.input.indices();
          const auto val = g.input.values();
          for (std::size_t j = 0; j < idx.size(); j++) {
            grad[idx[j]] += delta * val[j];
          }
        }
        const uint32_t row = rows[r];
        lazyAdamUpdate(adam, row, layer.weightRow(row), layer.biases()[row], grad,
                       biasGrad, step);
      }
    }
  }
}

void Trainer::accumulateRacy(const SampleGradients& sample) {
  // Buffers are allocated in trainBatch before the parallel phase.
  for (std::size_t l = 0; l < sample.layers.size(); l++) {
    const LayerGradients& g = sample.layers[l];
    const uint32_t prev = _model.layer(l).prevDim();
    std::vector<double>& w = _racyWeightGrads[l];
    std::vector<double>& b = _racyBiasGrads[l];
    std::vector<uint8_t>& touched = _racyTouched[l];
    const auto idx = g.input.indices();
    const auto val = g.input.values();
    for (std::size_t k = 0; k < g.ids.size(); k++) {
      const uint32_t row = g.ids[k];
      const double delta = g.biasGrads[k];
      std::atomic_ref<uint8_t>(touched[row]).store(1, std::memory_order_relaxed);
      std::atomic_ref<double>(b[row]).fetch_add(delta, std::memory_order_relaxed);
      double* wr = w.data() + static_cast<std::size_t>(row) * prev;
      for (std::size_t j = 0; j < idx.size(); j++) {
        std::atomic_ref<double>(wr[idx[j]]).fetch_add(delta * val[j],
                                                       std::memory_order_relaxed);
      }
    }
  }
}

void Trainer::applyRacy() {
  for (std::size_t l = 0; l < _model.numLayers(); l++) {
    SparseLinearLayer& layer = _model.layer(l);
    const uint32_t prev = layer.prevDim();
    std::vector<uint32_t> rows;
    for (uint32_t i = 0; i < layer.dim(); i++) {
      if (_racyTouched[l][i]) {
        rows.push_back(i);
      }
    }
    SparseAdamState& adam = _adam[l];
    const uint64_t step = _step;
#pragma omp parallel for num_threads(threadCount(_config.workers)) schedule(dynamic, 16)
    for (int64_t r = 0; r < static_cast<int64_t>(rows.size()); r++) {
      const uint32_t row = rows[r];
      std::span<double> grad(_racyWeightGrads[l].data() + static_cast<std::size_t>(row) * prev,
                             prev);
      lazyAdamUpdate(adam, row, layer.weightRow(row), layer.biases()[row], grad,
                     _racyBiasGrads[l][row], step);
      std::fill(grad.begin(), grad.end(), 0.0);
      _racyBiasGrads[l][row] = 0.0;
      _racyTouched[l][row] = 0;
    }
  }
}

TrainReport Trainer::train(const XcDataset& data,
                           const std::function<void(const BatchRecord&)>& onBatch) {
  validateDataset(_model, data);
  if (data.examples.empty()) {
    throw DataError(DataError::Kind::CountMismatch, 0, "training set is empty");
  }

  TrainReport report;
  const auto start = Clock::now();
  for (uint32_t epoch = 1; epoch <= _config.epochs; epoch++) {
    const auto epochStart = Clock::now();
    const std::vector<uint32_t> order = epochOrder(data.examples.size(), epoch);
    EpochStats stats;
    stats.epoch = epoch;
    uint32_t batchNo = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += _config.batchSize) {
      const std::size_t end = std::min(order.size(), begin + _config.batchSize);
      const std::span<const uint32_t> batch(order.data() + begin, end - begin);
      BatchRecord rec = trainBatch(data, batch);
      rec.epoch = epoch;
      rec.batch = ++batchNo;
      rec.seconds = secondsSince(start);
      const double n = static_cast<double>(batch.size());
      stats.loss += rec.loss * n;
      stats.pAt1 += rec.pAt1 * n;
      report.batches.push_back(rec);
      if (onBatch) {
        onBatch(rec);
      }
    }
    stats.loss /= static_cast<double>(order.size());
    stats.pAt1 /= static_cast<double>(order.size());
    stats.seconds = secondsSince(epochStart);
    report.epochs.push_back(stats);
  }
  return report;
}

TrainReport train(Model& model, const XcDataset& data, const TrainConfig& config,
                  const std::function<void(const BatchRecord&)>& onBatch) {
  Trainer trainer(model, config);
  return trainer.train(data, onBatch);
}

// ---------------------------------------------------------------- Inference

std::vector<uint32_t> predict(const Model& model, const SparseVector& input,
                              InferenceMode mode, std::optional<double> inferenceSparsity,
                              std::size_t topK) {
  const ModelPass pass = model.forward(
      input, mode == InferenceMode::Dense ? ForwardMode::DenseInfer : ForwardMode::SparseInfer,
      {}, inferenceSparsity);
  const SparseVector& act = pass.last().activations;

  std::vector<uint32_t> pos(act.nnz());
  std::iota(pos.begin(), pos.end(), 0u);
  auto better = [&act](uint32_t a, uint32_t b) {
    return act.value(a) != act.value(b) ? act.value(a) > act.value(b) : a < b;
  };
  const std::size_t keep = topK == 0 ? pos.size() : std::min(topK, pos.size());
  std::partial_sort(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(keep), pos.end(),
                    better);
  std::vector<uint32_t> ranking(keep);
  for (std::size_t r = 0; r < keep; r++) {
    ranking[r] = act.index(pos[r]);
  }
  return ranking;
}

double precisionAtK(std::span<const uint32_t> ranking, std::span<const uint32_t> labels,
                    std::size_t k) {
  if (k == 0) {
    throw ContractError("precision@k needs k >= 1");
  }
  std::size_t hits = 0;
  for (std::size_t r = 0; r < std::min(k, ranking.size()); r++) {
    if (std::find(labels.begin(), labels.end(), ranking[r]) != labels.end()) {
      hits++;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

EvalResult evaluate(const Model& model, const XcDataset& data, std::size_t k,
                    InferenceMode mode, std::optional<double> inferenceSparsity,
                    uint32_t workers) {
  if (k == 0) {
    throw ContractError("precision@k needs k >= 1");
  }
  validateDataset(model, data);
  EvalResult result;
  const std::size_t n = data.examples.size();
  if (n == 0) {
    return result;
  }

  auto hitsFor = [&](const Example& ex, const std::vector<uint32_t>& ranking) {
    std::size_t hits = 0;
    for (uint32_t id : ranking) {
      hits += std::binary_search(ex.labels.begin(), ex.labels.end(), id) ? 1 : 0;
    }
    return hits;
  };

  const std::size_t timed = std::min<std::size_t>(1000, n);
  std::size_t hits = 0;
  double totalMs = 0.0;
  for (std::size_t i = 0; i < timed; i++) {
    const Example& ex = data.examples[i];
    const auto t0 = Clock::now();
    const auto ranking = predict(model, ex.features, mode, inferenceSparsity, k);
    totalMs += std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    hits += hitsFor(ex, ranking);
  }
  result.meanLatencyMs = totalMs / static_cast<double>(timed);

  std::vector<std::size_t> restHits(n - timed, 0);
  parallelFor(n - timed, workers, [&](std::size_t i) {
    const Example& ex = data.examples[timed + i];
    restHits[i] = hitsFor(ex, predict(model, ex.features, mode, inferenceSparsity, k));
  });
  hits = std::accumulate(restHits.begin(), restHits.end(), hits);

  result.precisionAtK =
      static_cast<double>(hits) / (static_cast<double>(n) * static_cast<double>(k));
  return result;
}

std::vector<Checkpoint> benchmark(Model& model, const XcDataset& trainData,
                                  const XcDataset& heldOut, const TrainConfig& config,
                                  uint32_t checkpointsPerEpoch, InferenceMode mode) {
  validateDataset(model, trainData);
  if (checkpointsPerEpoch < 1) {
    throw ContractError("need at least one checkpoint per epoch");
  }
  Trainer trainer(model, config);
  std::vector<Checkpoint> out;
  double trainSeconds = 0.0;
  for (uint32_t epoch = 1; epoch <= config.epochs; epoch++) {
    const std::vector<uint32_t> order = trainer.epochOrder(trainData.examples.size(), epoch);
    const std::size_t numBatches = (order.size() + config.batchSize - 1) / config.batchSize;
    std::size_t nextCheckpoint = 1;
    for (std::size_t b = 0; b < numBatches; b++) {
      const std::size_t begin = b * config.batchSize;
      const std::size_t end = std::min(order.size(), begin + config.batchSize);
      const auto t0 = Clock::now();
      trainer.trainBatch(trainData,
                         std::span<const uint32_t>(order.data() + begin, end - begin));
      trainSeconds += secondsSince(t0);

      // Checkpoint c fires after batch ceil(c * numBatches / checkpoints).
      while (nextCheckpoint <= checkpointsPerEpoch &&
             (b + 1) * checkpointsPerEpoch >= nextCheckpoint * numBatches) {
        const double p = evaluate(model, heldOut, 1, mode, config.inferenceSparsity,
                                  config.workers)
                             .precisionAtK;
        out.push_back({trainSeconds, p});
        nextCheckpoint++;
      }
    }
  }
  return out;
}

}  // namespace bolt

#include <bolt/layer.h>

#include <bolt/binary_io.h>
#include <bolt/error.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace bolt {

std::string_view activationName(Activation a) {
  switch (a) {
    case Activation::ReLU:
      return "relu";
    case Activation::Softmax:
      return "softmax";
    case Activation::Identity:
      return "identity";
  }
  return "unknown";
}

Activation parseActivation(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "softmax") return Activation::Softmax;
  if (name == "identity") return Activation::Identity;
  throw ContractError("unknown activation \"" + std::string(name) + "\"");
}

ActiveSet ActiveSet::all(uint32_t dim) {
  ActiveSet s;
  s.ids.resize(dim);
  for (uint32_t i = 0; i < dim; i++) {
    s.ids[i] = i;
  }
  s.origins.assign(dim, NeuronOrigin::Sampled);
  return s;
}

ActiveSet ActiveSet::of(std::vector<uint32_t> ids, uint32_t dim) {
  for (std::size_t k = 0; k < ids.size(); k++) {
    if (ids[k] >= dim || (k > 0 && ids[k] <= ids[k - 1])) {
      throw ContractError("active ids must be ascending, distinct and < dim");
    }
  }
  ActiveSet s;
  s.origins.assign(ids.size(), NeuronOrigin::Sampled);
  s.ids = std::move(ids);
  return s;
}

std::vector<double> LayerGradients::weightRowGrad(std::size_t k) const {
  std::vector<double> g(input.nnz());
  for (std::size_t j = 0; j < g.size(); j++) {
    g[j] = biasGrads[k] * input.value(j);
  }
  return g;
}

DenseVector LayerGradients::weightRowGradDense(std::size_t k) const {
  DenseVector g(input.dim());
  for (std::size_t j = 0; j < input.nnz(); j++) {
    g[input.index(j)] = biasGrads[k] * input.value(j);
  }
  return g;
}

SoftmaxCe lossGradSoftmaxCe(std::span<const double> logits,
                            std::span<const uint32_t> activeIds,
                            std::span<const uint32_t> labels) {
  if (logits.size() != activeIds.size() || logits.empty()) {
    throw ContractError("lossGradSoftmaxCe: logits and ids must align");
  }
  if (labels.empty()) {
    throw ContractError("lossGradSoftmaxCe: empty label set");
  }

  SoftmaxCe out;
  out.delta.resize(logits.size());
  const double maxLogit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); k++) {
    out.delta[k] = std::exp(logits[k] - maxLogit);
    sum += out.delta[k];
  }
  const double logSum = maxLogit + std::log(sum);
  for (auto& p : out.delta) {
    p /= sum;
  }

  const double target = 1.0 / static_cast<double>(labels.size());
  for (uint32_t label : labels) {
    auto it = std::lower_bound(activeIds.begin(), activeIds.end(), label);
    if (it == activeIds.end() || *it != label) {
      throw ContractError("lossGradSoftmaxCe: label " + std::to_string(label) +
                          " is not in the active set");
    }
    const std::size_t k = static_cast<std::size_t>(it - activeIds.begin());
    out.delta[k] -= target;
    out.loss -= target * (logits[k] - logSum);
  }
  return out;
}

// --------------------------------------------------------- SparseLinearLayer

SparseLinearLayer::SparseLinearLayer(uint32_t dim, uint32_t prevDim,
                                     double sparsity, Activation activation,
                                     uint64_t seed, const AutotuneConfig& config)
    : _dim(dim), _prevDim(prevDim), _sparsity(sparsity), _activation(activation) {
  if (dim < 1 || prevDim < 1) {
    throw DimensionError("layer dimensions must be positive");
  }
  if (!(sparsity > 0.0 && sparsity <= 1.0)) {
    throw ContractError("layer sparsity must lie in (0, 1]");
  }
  initWeights(seed);
  if (sparsity < 1.0) {
    _plan = autotune(dim, prevDim, sparsity, config);
    _index.emplace(dim, prevDim, _plan->shape(), splitMix64(seed ^ 0x1D1D1D1DULL));
    _index->rebuild(_weights);
  }
}

SparseLinearLayer::SparseLinearLayer(uint32_t dim, uint32_t prevDim,
                                     Activation activation,
                                     const AutotunePlan& plan, uint64_t seed)
    : _dim(dim),
      _prevDim(prevDim),
      _sparsity(plan.sparsity),
      _activation(activation),
      _plan(plan) {
  if (dim < 1 || prevDim < 1) {
    throw DimensionError("layer dimensions must be positive");
  }
  if (plan.layerDim != dim || plan.prevDim != prevDim) {
    throw DimensionError("plan dimensions do not match the layer");
  }
  if (!(plan.sparsity > 0.0 && plan.sparsity < 1.0)) {
    throw ContractError("a planned layer needs sparsity in (0, 1)");
  }
  initWeights(seed);
  _index.emplace(dim, prevDim, plan.shape(), splitMix64(seed ^ 0x1D1D1D1DULL));
  _index->rebuild(_weights);
}

SparseLinearLayer::SparseLinearLayer(uint32_t dim, uint32_t prevDim,
                                     Activation activation,
                                     std::vector<double> weights,
                                     std::vector<double> biases)
    : _dim(dim),
      _prevDim(prevDim),
      _sparsity(1.0),
      _activation(activation),
      _weights(std::move(weights)),
      _biases(std::move(biases)) {
  if (_weights.size() != static_cast<std::size_t>(dim) * prevDim ||
      _biases.size() != dim) {
    throw DimensionError("explicit layer parameters have the wrong size");
  }
}

void SparseLinearLayer::initWeights(uint64_t seed) {
  const double bound = std::sqrt(6.0 / (static_cast<double>(_prevDim) + _dim));
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> uniform(-bound, bound);
  _weights.resize(static_cast<std::size_t>(_dim) * _prevDim);
  for (auto& w : _weights) {
    w = uniform(gen);
  }
  _biases.assign(_dim, 0.0);
}

uint32_t SparseLinearLayer::activeCount(double sparsity) const {
  // The small slack keeps s*d that is integral in exact arithmetic (0.05 *
  // 10000) from rounding up after floating point error.
  const double exact = std::ceil(sparsity * _dim - 1e-9);
  if (exact < 1.0) {
    return 1;
  }
  return exact >= _dim ? _dim : static_cast<uint32_t>(exact);
}

void SparseLinearLayer::rebuildIndex() {
  if (_index) {
    _index->rebuild(_weights);
  }
}

LayerOutput SparseLinearLayer::forward(const SparseVector& input,
                                       ForwardMode mode,
                                       std::span<const uint32_t> labels,
                                       std::optional<double> inferenceSparsity) const {
  if (input.dim() != _prevDim) {
    throw DimensionError("layer input dim " + std::to_string(input.dim()) +
                         " vs expected " + std::to_string(_prevDim));
  }
  for (uint32_t label : labels) {
    if (label >= _dim) {
      throw ContractError("label " + std::to_string(label) +
                          " out of range for layer width " + std::to_string(_dim));
    }
  }

  LayerOutput out;
  const bool sampled = _index && mode != ForwardMode::DenseInfer;
  if (!sampled) {
    out.active = ActiveSet::all(_dim);
  } else {
    double s = _sparsity;
    if (mode == ForwardMode::SparseInfer && inferenceSparsity) {
      s = *inferenceSparsity;
    }
    Retrieval r = _index->query(input, activeCount(s));
    out.active.ids = std::move(r.ids);
    out.active.origins.resize(out.active.ids.size());
    for (std::size_t k = 0; k < r.padded.size(); k++) {
      out.active.origins[k] = r.padded[k] ? NeuronOrigin::Padded : NeuronOrigin::Sampled;
    }
    out.codes = std::move(r.codes);

    if (mode == ForwardMode::Train && !labels.empty()) {
      std::vector<uint32_t> forced;
      for (uint32_t label : labels) {
        auto it = std::lower_bound(out.active.ids.begin(), out.active.ids.end(), label);
        if (it != out.active.ids.end() && *it == label) {
          const auto k = static_cast<std::size_t>(it - out.active.ids.begin());
          if (out.active.origins[k] == NeuronOrigin::Padded) {
            out.active.origins[k] = NeuronOrigin::LabelForced;
            out.missedLabels.push_back(label);
          }
        } else {
          forced.push_back(label);
          out.missedLabels.push_back(label);
        }
      }
      if (!forced.empty()) {
        std::sort(forced.begin(), forced.end());
        forced.erase(std::unique(forced.begin(), forced.end()), forced.end());
        ActiveSet merged;
        merged.ids.reserve(out.active.size() + forced.size());
        merged.origins.reserve(out.active.size() + forced.size());
        std::size_t a = 0;
        std::size_t b = 0;
        while (a < out.active.size() || b < forced.size()) {
          if (b == forced.size() ||
              (a < out.active.size() && out.active.ids[a] < forced[b])) {
            merged.ids.push_back(out.active.ids[a]);
            merged.origins.push_back(out.active.origins[a++]);
          } else {
            merged.ids.push_back(forced[b++]);
            merged.origins.push_back(NeuronOrigin::LabelForced);
          }
        }
        out.active = std::move(merged);
      }
      std::sort(out.missedLabels.begin(), out.missedLabels.end());
      out.missedLabels.erase(
          std::unique(out.missedLabels.begin(), out.missedLabels.end()),
          out.missedLabels.end());
    }
  }

  fillActivations(input, out);
  return out;
}

LayerOutput SparseLinearLayer::forwardActive(const SparseVector& input,
                                             ActiveSet active) const {
  if (input.dim() != _prevDim) {
    throw DimensionError("layer input dim " + std::to_string(input.dim()) +
                         " vs expected " + std::to_string(_prevDim));
  }
  if (active.ids.empty() || active.ids.back() >= _dim) {
    throw ContractError("active set must be nonempty and within the layer");
  }
  LayerOutput out;
  out.active = std::move(active);
  fillActivations(input, out);
  return out;
}

void SparseLinearLayer::fillActivations(const SparseVector& input,
                                        LayerOutput& out) const {
  const std::size_t n = out.active.size();
  out.preactivations.resize(n);
  const auto idx = input.indices();
  const auto val = input.values();
  constexpr std::size_t kAhead = 4;
  const std::size_t rowLines = (static_cast<std::size_t>(_prevDim) * sizeof(double) + 63) / 64;
  for (std::size_t k = 0; k < n; k++) {
    const uint32_t i = out.active.ids[k];
    const double* w = _weights.data() + static_cast<std::size_t>(i) * _prevDim;
    // Sampled rows are scattered; fetch upcoming ones while this one sums.
    if (k + kAhead < n) {
      const char* next = reinterpret_cast<const char*>(
          _weights.data() + static_cast<std::size_t>(out.active.ids[k + kAhead]) * _prevDim);
      for (std::size_t line = 0; line < std::min<std::size_t>(rowLines, 16); line++) {
        __builtin_prefetch(next + line * 64);
      }
    }
    double z = 0.0;
    for (std::size_t j = 0; j < idx.size(); j++) {
      z += val[j] * w[idx[j]];
    }
    out.preactivations[k] = z + _biases[i];
  }

  std::vector<double> a(n);
  switch (_activation) {
    case Activation::ReLU:
      for (std::size_t k = 0; k < n; k++) {
        a[k] = out.preactivations[k] > 0.0 ? out.preactivations[k] : 0.0;
      }
      break;
    case Activation::Identity:
      a = out.preactivations;
      break;
    case Activation::Softmax: {
      const double maxZ =
          *std::max_element(out.preactivations.begin(), out.preactivations.end());
      double sum = 0.0;
      for (std::size_t k = 0; k < n; k++) {
        a[k] = std::exp(out.preactivations[k] - maxZ);
        sum += a[k];
      }
      for (auto& p : a) {
        p /= sum;
      }
      break;
    }
  }
  out.activations = SparseVector::fromSortedUnchecked(_dim, out.active.ids, std::move(a));
}

LayerGradients SparseLinearLayer::backward(const SparseVector& input,
                                           const LayerOutput& out,
                                           const SparseVector& upstream,
                                           bool wantInputGrad) const {
  if (input.dim() != _prevDim || upstream.dim() != _dim) {
    throw DimensionError("backward: input or upstream dimension mismatch");
  }
  const auto& ids = out.active.ids;
  LayerGradients g;
  g.ids = ids;
  g.biasGrads.assign(ids.size(), 0.0);
  g.input = input;

  // Both lists ascending: walk them together.
  std::size_t k = 0;
  for (std::size_t u = 0; u < upstream.nnz(); u++) {
    const uint32_t id = upstream.index(u);
    while (k < ids.size() && ids[k] < id) {
      k++;
    }
    if (k == ids.size() || ids[k] != id) {
      throw ContractError("backward: upstream gradient at neuron " +
                          std::to_string(id) + " outside the active set");
    }
    double delta = upstream.value(u);
    if (_activation == Activation::ReLU && !(out.preactivations[k] > 0.0)) {
      delta = 0.0;
    }
    g.biasGrads[k] = delta;
  }

  if (wantInputGrad) {
    std::vector<double> acc(_prevDim, 0.0);
    for (std::size_t a = 0; a < ids.size(); a++) {
      const double delta = g.biasGrads[a];
      if (delta == 0.0) {
        continue;
      }
      const double* w = _weights.data() + static_cast<std::size_t>(ids[a]) * _prevDim;
      for (uint32_t j = 0; j < _prevDim; j++) {
        acc[j] += delta * w[j];
      }
    }
    g.inputGrad = sparsify(acc);
  }
  return g;
}

void SparseLinearLayer::serialize(std::ostream& out) const {
  io::writeU32(out, _dim);
  io::writeU32(out, _prevDim);
  io::writeF64(out, _sparsity);
  io::writeU8(out, static_cast<uint8_t>(_activation));
  io::writeU8(out, _plan ? 1 : 0);
  if (_plan) {
    io::writeU32(out, _plan->kBits);
    io::writeU32(out, _plan->numTables);
    io::writeU32(out, _plan->bucketCap);
    io::writeF64(out, _plan->config.c1);
    io::writeF64(out, _plan->config.c2);
    io::writeU32(out, _plan->config.lMax);
    io::writeU32(out, _plan->layerDim);
    io::writeU32(out, _plan->prevDim);
    io::writeF64(out, _plan->sparsity);
  }
  io::writeF64s(out, _weights);
  io::writeF64s(out, _biases);
  io::writeU8(out, _index ? 1 : 0);
  if (_index) {
    _index->serialize(out);
  }
}

SparseLinearLayer SparseLinearLayer::deserialize(std::istream& in) {
  SparseLinearLayer layer;
  layer._dim = io::readU32(in);
  layer._prevDim = io::readU32(in);
  layer._sparsity = io::readF64(in);
  const uint8_t tag = io::readU8(in);
  if (tag > static_cast<uint8_t>(Activation::Identity)) {
    throw FormatError("unknown activation tag " + std::to_string(tag));
  }
  layer._activation = static_cast<Activation>(tag);
  if (layer._dim < 1 || layer._prevDim < 1 ||
      !(layer._sparsity > 0.0 && layer._sparsity <= 1.0)) {
    throw FormatError("layer header out of range");
  }
  if (io::readU8(in) != 0) {
    AutotunePlan plan;
    plan.kBits = io::readU32(in);
    plan.numTables = io::readU32(in);
    plan.bucketCap = io::readU32(in);
    plan.config.c1 = io::readF64(in);
    plan.config.c2 = io::readF64(in);
    plan.config.lMax = io::readU32(in);
    plan.layerDim = io::readU32(in);
    plan.prevDim = io::readU32(in);
    plan.sparsity = io::readF64(in);
    layer._plan = plan;
  }
  layer._weights.resize(static_cast<std::size_t>(layer._dim) * layer._prevDim);
  io::readF64s(in, layer._weights);
  layer._biases.resize(layer._dim);
  io::readF64s(in, layer._biases);
  if (io::readU8(in) != 0) {
    layer._index.emplace(NeuronIndex::deserialize(in));
    if (layer._index->numNeurons() != layer._dim ||
        layer._index->inputDim() != layer._prevDim ||
        !layer._plan || layer._index->shape() != layer._plan->shape()) {
      throw FormatError("layer index does not match the layer or its plan");
    }
  }
  if (layer._index.has_value() != (layer._sparsity < 1.0)) {
    throw FormatError("layer must carry an index exactly when sparsity < 1");
  }
  return layer;
}

}  // namespace bolt

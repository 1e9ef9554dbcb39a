#include <bolt/model.h>

#include <bolt/binary_io.h>
#include <bolt/error.h>
#include <bolt/lsh_index.h>

#include <algorithm>
#include <fstream>
#include <string>
#include <system_error>

namespace bolt {

namespace {

constexpr uint32_t kModelVersion = 1;

std::vector<SparseLinearLayer> buildLayers(const ModelSpec& spec) {
  if (spec.layers.empty()) {
    throw ContractError("model needs at least one layer");
  }
  std::vector<SparseLinearLayer> layers;
  layers.reserve(spec.layers.size());
  uint32_t prev = spec.inputDim;
  for (std::size_t l = 0; l < spec.layers.size(); l++) {
    const LayerSpec& ls = spec.layers[l];
    layers.emplace_back(ls.dim, prev, ls.sparsity, ls.activation,
                        splitMix64(spec.seed + l + 1), spec.autotune);
    prev = ls.dim;
  }
  return layers;
}

}  // namespace

Model::Model(const ModelSpec& spec) : _layers(buildLayers(spec)) {}

Model::Model(std::vector<SparseLinearLayer> layers) : _layers(std::move(layers)) {
  if (_layers.empty()) {
    throw ContractError("model needs at least one layer");
  }
  for (std::size_t l = 1; l < _layers.size(); l++) {
    if (_layers[l].prevDim() != _layers[l - 1].dim()) {
      throw DimensionError("layer " + std::to_string(l) +
                           " input does not match the previous layer width");
    }
  }
}

ModelPass Model::forward(const SparseVector& input, ForwardMode mode,
                         std::span<const uint32_t> labels,
                         std::optional<double> inferenceSparsity) const {
  ModelPass pass;
  pass.outputs.reserve(_layers.size());
  for (std::size_t l = 0; l < _layers.size(); l++) {
    const bool last = l + 1 == _layers.size();
    const SparseVector& x = l == 0 ? input : pass.outputs[l - 1].activations;
    pass.outputs.push_back(_layers[l].forward(
        x, mode, last ? labels : std::span<const uint32_t>{},
        last ? inferenceSparsity : std::nullopt));
  }
  return pass;
}

SampleGradients Model::trainSample(const SparseVector& input,
                                   std::span<const uint32_t> labels) const {
  if (_layers.back().activation() != Activation::Softmax) {
    throw ContractError("training needs a softmax output layer");
  }
  if (labels.empty()) {
    throw ContractError("training sample has no labels");
  }
  const ModelPass pass = forward(input, ForwardMode::Train, labels);
  const LayerOutput& top = pass.last();

  const SoftmaxCe ce = lossGradSoftmaxCe(top.preactivations, top.active.ids, labels);

  SampleGradients out;
  out.loss = ce.loss;
  const auto best = std::max_element(top.preactivations.begin(), top.preactivations.end());
  const uint32_t predicted = top.active.ids[best - top.preactivations.begin()];
  out.top1Correct = std::find(labels.begin(), labels.end(), predicted) != labels.end();
  if (!top.missedLabels.empty()) {
    out.alnLabels = top.missedLabels;
    out.alnCodes = top.codes;
  }

  out.layers.resize(_layers.size());
  SparseVector upstream = SparseVector::fromSortedUnchecked(
      _layers.back().dim(), top.active.ids, ce.delta);
  for (std::size_t l = _layers.size(); l-- > 0;) {
    const SparseVector& x = l == 0 ? input : pass.outputs[l - 1].activations;
    out.layers[l] = _layers[l].backward(x, pass.outputs[l], upstream, l > 0);
    if (l == 0) {
      break;
    }
    // Only the previous layer's active neurons carry gradient onward.
    const SparseVector& grad = out.layers[l].inputGrad;
    const auto& prevIds = pass.outputs[l - 1].active.ids;
    std::vector<uint32_t> idx;
    std::vector<double> val;
    std::size_t a = 0;
    for (std::size_t k = 0; k < grad.nnz(); k++) {
      while (a < prevIds.size() && prevIds[a] < grad.index(k)) {
        a++;
      }
      if (a < prevIds.size() && prevIds[a] == grad.index(k)) {
        idx.push_back(grad.index(k));
        val.push_back(grad.value(k));
      }
    }
    upstream = SparseVector::fromSortedUnchecked(grad.dim(), std::move(idx), std::move(val));
    out.layers[l].inputGrad = SparseVector();
  }
  return out;
}

void Model::rebuildIndexes() {
  for (auto& layer : _layers) {
    layer.rebuildIndex();
  }
}

void Model::save(std::ostream& out) const {
  io::writeMagic(out, "BLTM");
  io::writeU32(out, kModelVersion);
  io::writeU32(out, static_cast<uint32_t>(_layers.size()));
  for (const auto& layer : _layers) {
    layer.serialize(out);
  }
}

Model Model::load(std::istream& in) {
  io::expectMagic(in, "BLTM");
  const uint32_t version = io::readU32(in);
  if (version != kModelVersion) {
    throw FormatError("unsupported model version " + std::to_string(version));
  }
  const uint32_t count = io::readU32(in);
  if (count == 0) {
    throw FormatError("model has no layers");
  }
  std::vector<SparseLinearLayer> layers;
  layers.reserve(count);
  for (uint32_t l = 0; l < count; l++) {
    layers.push_back(SparseLinearLayer::deserialize(in));
  }
  try {
    return Model(std::move(layers));
  } catch (const DimensionError& e) {
    throw FormatError(e.what());
  }
}

void Model::saveFile(const std::filesystem::path& path) const {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot open " + tmp.string() + " for writing");
    }
    save(out);
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move model into place at " + path.string());
  }
}

Model Model::loadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open model file " + path.string());
  }
  return load(in);
}

}  // namespace bolt

#include <bolt/dense_reference.h>

#include <bolt/error.h>

#include <algorithm>
#include <cmath>

namespace bolt {

DenseForward denseReferenceForward(const SparseLinearLayer& layer,
                                   const SparseVector& input) {
  if (input.dim() != layer.prevDim()) {
    throw DimensionError("denseReferenceForward: input dimension mismatch");
  }
  const DenseVector x = densify(input);
  const uint32_t dim = layer.dim();
  const uint32_t prev = layer.prevDim();

  DenseForward out;
  out.preactivations.resize(dim);
  for (uint32_t i = 0; i < dim; i++) {
    const auto w = layer.weightRow(i);
    double z = 0.0;
    for (uint32_t j = 0; j < prev; j++) {
      z += x[j] * w[j];
    }
    out.preactivations[i] = z + layer.biases()[i];
  }

  out.activations.resize(dim);
  switch (layer.activation()) {
    case Activation::ReLU:
      for (uint32_t i = 0; i < dim; i++) {
        out.activations[i] = std::max(out.preactivations[i], 0.0);
      }
      break;
    case Activation::Identity:
      out.activations = out.preactivations;
      break;
    case Activation::Softmax: {
      const double maxZ =
          *std::max_element(out.preactivations.begin(), out.preactivations.end());
      double sum = 0.0;
      for (uint32_t i = 0; i < dim; i++) {
        out.activations[i] = std::exp(out.preactivations[i] - maxZ);
        sum += out.activations[i];
      }
      for (auto& p : out.activations) {
        p /= sum;
      }
      break;
    }
  }
  return out;
}

DenseGradients denseReferenceBackward(const SparseLinearLayer& layer,
                                      const SparseVector& input,
                                      const DenseForward& forward,
                                      std::span<const double> upstream) {
  const uint32_t dim = layer.dim();
  const uint32_t prev = layer.prevDim();
  if (input.dim() != prev || upstream.size() != dim) {
    throw DimensionError("denseReferenceBackward: dimension mismatch");
  }
  const DenseVector x = densify(input);

  DenseGradients g;
  g.biasGrads.resize(dim);
  g.weightGrads.assign(static_cast<std::size_t>(dim) * prev, 0.0);
  g.inputGrad.assign(prev, 0.0);
  for (uint32_t i = 0; i < dim; i++) {
    double delta = upstream[i];
    if (layer.activation() == Activation::ReLU && !(forward.preactivations[i] > 0.0)) {
      delta = 0.0;
    }
    g.biasGrads[i] = delta;
    const auto w = layer.weightRow(i);
    for (uint32_t j = 0; j < prev; j++) {
      g.weightGrads[static_cast<std::size_t>(i) * prev + j] = delta * x[j];
      g.inputGrad[j] += delta * w[j];
    }
  }
  return g;
}

}  // namespace bolt

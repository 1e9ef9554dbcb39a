#pragma once

#include <bolt/layer.h>
#include <bolt/sparse_vector.h>

#include <span>
#include <vector>

namespace bolt {

// Straightforward dense evaluation of a layer: every neuron, every input
// coordinate. It is the correctness oracle for the sampled path and doubles
// as dense inference.

struct DenseForward {
  std::vector<double> preactivations;  // length dim
  std::vector<double> activations;     // length dim; softmax over all neurons
};

struct DenseGradients {
  std::vector<double> weightGrads;  // dim x prevDim, row-major
  std::vector<double> biasGrads;    // length dim
  std::vector<double> inputGrad;    // length prevDim
};

DenseForward denseReferenceForward(const SparseLinearLayer& layer,
                                   const SparseVector& input);

// `upstream` has length dim and follows the same convention as
// SparseLinearLayer::backward (dL/dz for softmax layers).
DenseGradients denseReferenceBackward(const SparseLinearLayer& layer,
                                      const SparseVector& input,
                                      const DenseForward& forward,
                                      std::span<const double> upstream);

}  // namespace bolt

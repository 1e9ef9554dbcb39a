#include "gradcheck.h"
#include "test_util.h"

#include <bolt/dense_reference.h>
#include <bolt/error.h>
#include <bolt/layer.h>

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace bolt;

namespace {

SparseLinearLayer handLayer(Activation act = Activation::ReLU) {
  return SparseLinearLayer(3, 2, act, {1, 0, 0, 1, 1, 1}, {0, 0, 0});
}

}  // namespace

TEST_CASE("hand example on an explicit active set") {
  const auto layer = handLayer();
  const SparseVector x(2, {{0, 2.0}, {1, -1.0}});
  const auto out = layer.forwardActive(x, ActiveSet::of({0, 2}, 3));
  CHECK(out.activations == SparseVector(3, {{0, 2.0}, {2, 1.0}}));

  const auto dense = denseReferenceForward(layer, x);
  CHECK(dense.activations == std::vector<double>{2.0, 0.0, 1.0});
  CHECK(sparsify(dense.activations) == SparseVector(3, {{0, 2.0}, {2, 1.0}}));
}

TEST_CASE("softmax over two equal logits") {
  const SparseLinearLayer layer(4, 1, Activation::Softmax, std::vector<double>{1, 1, 5, 1}, std::vector<double>{0, 0, 0, 0});
  const auto out = layer.forwardActive(SparseVector(1, {{0, 1.0}}), ActiveSet::of({1, 3}, 4));
  CHECK(out.activations.value(0) == 0.5);
  CHECK(out.activations.value(1) == 0.5);
}

TEST_CASE("softmax cross entropy worked cases") {
  const uint32_t ab[] = {10, 20};
  const double eq[] = {0.3, 0.3};
  const uint32_t labA[] = {10};
  const auto r = lossGradSoftmaxCe(eq, ab, labA);
  CHECK(r.delta[0] == doctest::Approx(-0.5));
  CHECK(r.delta[1] == doctest::Approx(0.5));
  CHECK(r.loss == doctest::Approx(std::log(2.0)));

  const uint32_t one[] = {4};
  const double z[] = {2.7};
  const auto s = lossGradSoftmaxCe(z, one, one);
  CHECK(s.delta[0] == 0.0);
  CHECK(s.loss == 0.0);

  const uint32_t missing[] = {11};
  CHECK_THROWS_AS(lossGradSoftmaxCe(eq, ab, missing), ContractError);
}

TEST_CASE("property: softmax CE delta sums to zero and loss matches log-sum-exp") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 300; trial++) {
    const auto logits = testing::randomNormal(5, rng, 3.0);
    const std::vector<uint32_t> ids = {1, 4, 6, 8, 9};
    std::vector<uint32_t> labels;
    for (uint32_t id : ids) if (rng() % 2) labels.push_back(id);
    if (labels.empty()) labels.push_back(6);
    const auto r = lossGradSoftmaxCe(logits, ids, labels);
    REQUIRE(std::abs(std::accumulate(r.delta.begin(), r.delta.end(), 0.0)) <= 1e-12);
    long double sum = 0;
    for (double v : logits) sum += std::exp(static_cast<long double>(v));
    const long double lse = std::log(sum);
    long double want = 0;
    for (uint32_t l : labels) {
      const std::size_t k = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), l) - ids.begin());
      want -= (logits[k] - lse) / labels.size();
    }
    REQUIRE(std::abs(r.loss - static_cast<double>(want)) <= 1e-12 * std::max(1.0, std::abs(r.loss)));
  }
}

TEST_CASE("dead ReLU has zero gradients") {
  const SparseLinearLayer layer(1, 2, Activation::ReLU, std::vector<double>{1, 1}, std::vector<double>{-3});
  const SparseVector x(2, {{0, 1.0}, {1, 1.0}});
  const auto out = layer.forwardActive(x, ActiveSet::all(1));
  CHECK(out.preactivations[0] == -1.0);
  const auto g = layer.backward(x, out, SparseVector(1, {{0, 5.0}}));
  CHECK(g.biasGrads[0] == 0.0);
  CHECK(g.weightRowGradDense(0) == DenseVector{0, 0});
  CHECK(g.inputGrad.nnz() == 0);
}

TEST_CASE("identity neuron gradients") {
  const SparseLinearLayer layer(1, 2, Activation::Identity, std::vector<double>{0.5, -4}, std::vector<double>{0});
  const SparseVector x(2, {{0, 2.0}, {1, -1.0}});
  const auto out = layer.forwardActive(x, ActiveSet::all(1));
  const auto g = layer.backward(x, out, SparseVector(1, {{0, 1.0}}));
  CHECK(g.weightRowGradDense(0) == DenseVector{2, -1});
  CHECK(g.biasGrads[0] == 1.0);
  CHECK(densify(g.inputGrad) == DenseVector{0.5, -4});
}

TEST_CASE("upstream outside the active set is a contract error") {
  const auto layer = handLayer();
  const SparseVector x(2, {{0, 1.0}});
  const auto out = layer.forwardActive(x, ActiveSet::of({0, 2}, 3));
  CHECK_THROWS_AS(layer.backward(x, out, SparseVector(3, {{1, 1.0}})), ContractError);
}

TEST_CASE("dimension mismatches") {
  const auto layer = handLayer();
  CHECK_THROWS_AS(layer.forward(SparseVector(3), ForwardMode::DenseInfer), DimensionError);
  CHECK_THROWS_AS(denseReferenceForward(layer, SparseVector(5)), DimensionError);
}

TEST_CASE("finite differences for every activation") {
  for (Activation act : {Activation::ReLU, Activation::Identity, Activation::Softmax}) {
    for (uint64_t seed = 0; seed < 20; seed++) {
      const auto r = testing::gradCheckCase(act, 1000 * static_cast<uint64_t>(act) + seed);
      CAPTURE(activationName(act));
      CAPTURE(seed);
      CHECK(r.maxRelErr < 1e-4);
      CHECK(r.checked > 0);
    }
  }
}

TEST_CASE("full active set matches the dense path bit for bit") {
  std::mt19937_64 rng(8);
  for (Activation act : {Activation::ReLU, Activation::Identity, Activation::Softmax}) {
    for (int trial = 0; trial < 20; trial++) {
      const uint32_t dim = 1 + static_cast<uint32_t>(rng() % 40);
      const uint32_t prev = 1 + static_cast<uint32_t>(rng() % 30);
      const SparseLinearLayer layer(dim, prev, 1.0, act, rng());
      const SparseVector x = testing::randomSparse(prev, 0.4, rng);
      const auto sparse = layer.forward(x, ForwardMode::DenseInfer);
      const auto dense = denseReferenceForward(layer, x);
      REQUIRE(sparse.preactivations == dense.preactivations);
      REQUIRE(densify(sparse.activations).values() == dense.activations);

      const auto up = testing::randomNormal(dim, rng);
      std::vector<uint32_t> all(dim);
      std::iota(all.begin(), all.end(), 0u);
      const auto gs = layer.backward(x, sparse, SparseVector(dim, all, up));
      const auto gd = denseReferenceBackward(layer, x, dense, up);
      REQUIRE(gs.biasGrads == gd.biasGrads);
      for (uint32_t i = 0; i < dim; i++) {
        const DenseVector row = gs.weightRowGradDense(i);
        for (uint32_t j = 0; j < prev; j++) {
          REQUIRE(row[j] == gd.weightGrads[static_cast<std::size_t>(i) * prev + j]);
        }
      }
      REQUIRE(densify(gs.inputGrad).values() == gd.inputGrad);
    }
  }
}

TEST_CASE("sampled forward agrees with the dense forward on the active ids") {
  std::mt19937_64 rng(9);
  for (Activation act : {Activation::ReLU, Activation::Identity, Activation::Softmax}) {
    const SparseLinearLayer layer(1000, 64, 0.01, act, rng());
    REQUIRE(layer.isSparse());
    for (int q = 0; q < 10; q++) {
      const SparseVector x = testing::randomSparse(64, 0.3, rng);
      const auto out = layer.forward(x, ForwardMode::SparseInfer);
      const auto dense = denseReferenceForward(layer, x);
      REQUIRE(out.active.size() >= layer.activeCount(0.01));
      double sum = 0;
      double partition = 0;
      for (uint32_t id : out.active.ids) partition += std::exp(dense.preactivations[id]);
      for (std::size_t k = 0; k < out.active.size(); k++) {
        const uint32_t id = out.active.ids[k];
        REQUIRE(testing::relErr(out.preactivations[k], dense.preactivations[id], 1e-300) <= 1e-6);
        const double want = act == Activation::Softmax ? std::exp(dense.preactivations[id]) / partition
                                                       : dense.activations[id];
        REQUIRE(testing::relErr(out.activations.value(k), want, 1e-300) <= 1e-6);
        sum += out.activations.value(k);
      }
      if (act == Activation::Softmax) REQUIRE(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("train mode forces labels into the active set and reports misses") {
  std::mt19937_64 rng(10);
  const SparseLinearLayer layer(2000, 16, 0.01, Activation::Softmax, 3);
  for (int q = 0; q < 50; q++) {
    const SparseVector x = testing::randomSparse(16, 0.5, rng);
    std::vector<uint32_t> labels = {static_cast<uint32_t>(rng() % 2000), static_cast<uint32_t>(rng() % 2000)};
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    const auto out = layer.forward(x, ForwardMode::Train, labels);
    const auto sampled = layer.index()->query(x, layer.activeCount(0.01));
    for (uint32_t l : labels) {
      const auto it = std::lower_bound(out.active.ids.begin(), out.active.ids.end(), l);
      REQUIRE(it != out.active.ids.end());
      REQUIRE(*it == l);
      const auto origin = out.active.origins[static_cast<std::size_t>(it - out.active.ids.begin())];
      REQUIRE((origin == NeuronOrigin::Sampled || origin == NeuronOrigin::LabelForced));
      // A label counts as missed unless a bucket returned it.
      bool hashed = false;
      for (std::size_t k = 0; k < sampled.ids.size(); k++) {
        hashed |= sampled.ids[k] == l && !sampled.padded[k];
      }
      const bool missed = std::binary_search(out.missedLabels.begin(), out.missedLabels.end(), l);
      REQUIRE(missed == !hashed);
    }
    REQUIRE(out.codes == sampled.codes);
  }
}

TEST_CASE("backward touches only active rows") {
  std::mt19937_64 rng(11);
  const SparseLinearLayer layer(500, 20, 0.02, Activation::Softmax, 4);
  for (int q = 0; q < 20; q++) {
    const SparseVector x = testing::randomSparse(20, 0.5, rng);
    const uint32_t label[] = {static_cast<uint32_t>(rng() % 500)};
    const auto out = layer.forward(x, ForwardMode::Train, label);
    const auto ce = lossGradSoftmaxCe(out.preactivations, out.active.ids, label);
    const auto g = layer.backward(x, out, SparseVector(500, out.active.ids, ce.delta));
    REQUIRE(g.ids == out.active.ids);
    REQUIRE(g.biasGrads.size() == out.active.size());
    REQUIRE(g.input == x);
  }
}

TEST_CASE("active count rounds up without floating point surprises") {
  const SparseLinearLayer layer(10000, 4, 1.0, Activation::ReLU, 1);
  CHECK(layer.activeCount(0.05) == 500);
  CHECK(layer.activeCount(0.00001) == 1);
  CHECK(layer.activeCount(1.0) == 10000);
  CHECK(layer.activeCount(0.12345) == 1235);
}

TEST_CASE("inference sparsity override widens the sample") {
  const SparseLinearLayer layer(3000, 8, 0.01, Activation::Softmax, 5);
  std::mt19937_64 rng(1);
  const SparseVector x = testing::randomSparse(8, 0.6, rng);
  CHECK(layer.forward(x, ForwardMode::SparseInfer, {}, 0.2).active.size() >= 600);
  CHECK(layer.forward(x, ForwardMode::SparseInfer, {}, 1.0).active.size() == 3000);
  CHECK(layer.forward(x, ForwardMode::DenseInfer).active.size() == 3000);
}

TEST_CASE("layer serialization round-trips") {
  const SparseLinearLayer layer(400, 12, 0.02, Activation::Softmax, 6);
  std::stringstream s;
  layer.serialize(s);
  const auto back = SparseLinearLayer::deserialize(s);
  CHECK(back.dim() == 400);
  CHECK(back.prevDim() == 12);
  CHECK(back.activation() == Activation::Softmax);
  CHECK(std::equal(back.weights().begin(), back.weights().end(), layer.weights().begin()));
  REQUIRE(back.index());
  CHECK(*back.index() == *layer.index());
  std::stringstream again;
  back.serialize(again);
  s.clear();
  CHECK(again.str() == [&] { std::stringstream t; layer.serialize(t); return t.str(); }());
}

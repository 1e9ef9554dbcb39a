#include "test_util.h"

#include <bolt/autotune.h>
#include <bolt/error.h>
#include <bolt/lsh_index.h>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

using namespace bolt;

namespace {

std::vector<double> randomRows(uint32_t rows, uint32_t cols, uint64_t seed) {
  std::mt19937_64 rng(seed);
  return testing::randomNormal(static_cast<std::size_t>(rows) * cols, rng);
}

void checkBucketInvariants(const NeuronIndex& ix) {
  for (uint32_t j = 0; j < ix.numTables(); j++) {
    const auto& t = ix.table(j);
    for (uint32_t c = 0; c < t.numBuckets(); c++) {
      const auto b = t.bucket(c);
      REQUIRE(b.size() <= ix.bucketCap());
      std::vector<uint32_t> sorted(b.begin(), b.end());
      std::sort(sorted.begin(), sorted.end());
      REQUIRE(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    }
  }
}

}  // namespace

TEST_CASE("hand-built projections") {
  const std::vector<double> p = {1, 0, 0, 1};
  const auto h = SrpHasher::fromProjections(2, 2, p);
  CHECK(h.hash(SparseVector(2, {{0, 2.0}})) == 1);
  CHECK(h.hash(SparseVector(2)) == 0);
  CHECK(h.hashDense(std::vector<double>{0.0, 0.0}) == 0);
  CHECK(h.hash(SparseVector(2, {{0, 1.0}, {1, 1.0}})) == 3);
  CHECK_THROWS_AS(h.hash(SparseVector(3)), DimensionError);
}

TEST_CASE("code of a basis vector is the sign pattern of the seeded projection column") {
  const uint32_t dim = 5;
  SrpHasher h(3, dim, 42);
  // Recompute the projections from the generator: bit-major, dim draws per bit.
  std::mt19937_64 gen(42);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> draws(3 * dim);
  for (auto& x : draws) x = nd(gen);
  for (uint32_t c = 0; c < dim; c++) {
    uint32_t want = 0;
    for (uint32_t b = 0; b < 3; b++) {
      want |= static_cast<uint32_t>(draws[b * dim + c] > 0.0) << b;
    }
    CHECK(h.hash(SparseVector(dim, {{c, 1.0}})) == want);
  }
}

TEST_CASE("property: sparse and dense hashing agree and stay in range") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; trial++) {
    const uint32_t k = 1 + static_cast<uint32_t>(rng() % 16);
    const uint32_t dim = 1 + static_cast<uint32_t>(rng() % 200);
    SrpHasher h(k, dim, rng());
    SrpHasher same(k, dim, h.seed());
    const SparseVector v = testing::randomSparse(dim, 0.3, rng);
    const uint32_t code = h.hash(v);
    REQUIRE(code == h.hashDense(densify(v).view()));
    REQUIRE(code == same.hash(v));
    REQUIRE(code < (uint64_t{1} << k));
  }
}

TEST_CASE("collision law 1 - theta/pi over 10000 hyperplanes") {
  const uint32_t dim = 64;
  for (double theta : {0.0, std::numbers::pi / 4, std::numbers::pi / 2}) {
    std::mt19937_64 rng(17);
    auto u = testing::randomNormal(dim, rng);
    auto w = testing::randomNormal(dim, rng);
    auto normalize = [](std::vector<double>& x) {
      double n = 0;
      for (double a : x) n += a * a;
      for (double& a : x) a /= std::sqrt(n);
    };
    normalize(u);
    double proj = 0;
    for (uint32_t i = 0; i < dim; i++) proj += u[i] * w[i];
    for (uint32_t i = 0; i < dim; i++) w[i] -= proj * u[i];
    normalize(w);
    std::vector<double> v(dim);
    for (uint32_t i = 0; i < dim; i++) v[i] = std::cos(theta) * u[i] + std::sin(theta) * w[i];

    uint32_t agree = 0;
    uint32_t total = 0;
    for (uint64_t seed = 0; total < 10000; seed++) {
      SrpHasher h(20, dim, 1000 + seed);
      const uint32_t a = h.hashDense(u);
      const uint32_t b = h.hashDense(v);
      agree += 20 - static_cast<uint32_t>(std::popcount(a ^ b));
      total += 20;
    }
    CAPTURE(theta);
    CHECK(std::abs(static_cast<double>(agree) / total - (1.0 - theta / std::numbers::pi)) <= 0.02);
  }
}

TEST_CASE("single neuron lands in exactly one bucket per table") {
  const auto w = randomRows(1, 8, 1);
  const auto ix = buildIndex(w, 1, 8, manualPlan(4, 3, 2, 8, 0.5), 9);
  for (uint32_t j = 0; j < ix.numTables(); j++) {
    CHECK(ix.table(j).numNonEmpty() == 1);
    CHECK(ix.table(j).totalEntries() == 1);
  }
  for (int q = 0; q < 5; q++) {
    std::mt19937_64 rng(q);
    const auto r = ix.query(testing::randomSparse(8, 0.5, rng), 1);
    CHECK(r.ids == std::vector<uint32_t>{0});
  }
}

TEST_CASE("identical rows share a bucket, up to the cap") {
  std::vector<double> row = {0.3, -1.0, 2.0};
  std::vector<double> w;
  for (int i = 0; i < 4; i++) w.insert(w.end(), row.begin(), row.end());
  for (uint32_t cap : {8u, 2u}) {
    NeuronIndex ix(4, 3, {5, 2, cap}, 77);
    ix.rebuild(w);
    for (uint32_t j = 0; j < 2; j++) {
      CHECK(ix.table(j).numNonEmpty() == 1);
      CHECK(ix.table(j).totalEntries() == std::min(cap, 4u));
    }
  }
}

TEST_CASE("mean occupancy of nonempty buckets is near d / 2^K") {
  const uint32_t d = 1000;
  const auto w = randomRows(d, 32, 2);
  NeuronIndex ix(d, 32, {4, 8, 2000}, 5);
  ix.rebuild(w);
  for (uint32_t j = 0; j < 8; j++) {
    const double mean = static_cast<double>(ix.table(j).totalEntries()) / ix.table(j).numNonEmpty();
    CHECK(std::abs(mean - d / 16.0) <= 0.35 * d / 16.0);
    CHECK(ix.table(j).totalEntries() == d);
  }
}

TEST_CASE("query returns the union of the selected buckets") {
  NeuronIndex ix(10, 4, {1, 2, 4}, 3);
  const uint32_t c00[] = {0, 0}, c01[] = {0, 1}, c10[] = {1, 0};
  const uint32_t one[] = {1}, two[] = {2}, three[] = {3};
  ix.insertLabels(one, c01);
  ix.insertLabels(two, c00);
  ix.insertLabels(three, c10);
  // Table 0 bucket 0 = {1, 2}; table 1 bucket 0 = {2, 3}.
  const auto r = ix.queryCodes({0, 0}, 3);
  CHECK(r.ids == std::vector<uint32_t>{1, 2, 3});
  CHECK(std::count(r.padded.begin(), r.padded.end(), 1) == 0);
}

TEST_CASE("short results are padded with distinct ids deterministically") {
  NeuronIndex ix(50, 4, {2, 2, 4}, 3);
  const uint32_t codes[] = {1, 2};
  const uint32_t lab[] = {7, 9};
  ix.insertLabels(lab, codes);
  const auto a = ix.queryCodes({1, 2}, 10);
  const auto b = ix.queryCodes({1, 2}, 10);
  CHECK(a.ids == b.ids);
  CHECK(a.padded == b.padded);
  REQUIRE(a.ids.size() == 10);
  CHECK(std::is_sorted(a.ids.begin(), a.ids.end()));
  CHECK(std::adjacent_find(a.ids.begin(), a.ids.end()) == a.ids.end());
  int sampled = 0;
  for (std::size_t k = 0; k < a.ids.size(); k++) {
    if (!a.padded[k]) {
      sampled++;
      CHECK((a.ids[k] == 7 || a.ids[k] == 9));
    }
  }
  CHECK(sampled == 2);
}

TEST_CASE("oversized unions keep the most frequent ids, ties by smaller id") {
  const uint32_t d = 400;
  const auto w = randomRows(d, 6, 8);
  NeuronIndex ix(d, 6, {2, 6, 400}, 21);
  ix.rebuild(w);
  std::mt19937_64 rng(4);
  for (int q = 0; q < 30; q++) {
    const SparseVector x = testing::randomSparse(6, 0.8, rng);
    const uint32_t minCount = 5;
    const auto r = ix.query(x, minCount);
    // Oracle from the raw buckets.
    std::vector<uint32_t> mult(d, 0);
    for (uint32_t j = 0; j < ix.numTables(); j++) {
      for (uint32_t id : ix.table(j).bucket(r.codes[j])) mult[id]++;
    }
    std::vector<uint32_t> cand;
    for (uint32_t i = 0; i < d; i++) if (mult[i]) cand.push_back(i);
    std::sort(cand.begin(), cand.end(), [&](uint32_t a, uint32_t b) {
      return mult[a] != mult[b] ? mult[a] > mult[b] : a < b;
    });
    if (cand.size() > 4 * minCount) cand.resize(4 * minCount);
    std::sort(cand.begin(), cand.end());
    if (cand.size() >= minCount) {
      CHECK(r.ids == cand);
    }
  }
}

TEST_CASE("a weight row retrieves itself more often than an unrelated neuron") {
  const uint32_t d = 100, dim = 16;
  const uint32_t target = 5, other = 17;
  int hitsTarget = 0, hitsOther = 0;
  for (uint64_t seed = 0; seed < 200; seed++) {
    const auto w = randomRows(d, dim, 100 + seed);
    NeuronIndex ix(d, dim, {6, 4, 8}, seed);
    ix.rebuild(w);
    const SparseVector x = sparsify(std::span<const double>(w).subspan(target * dim, dim));
    const auto r = ix.query(x, 1);
    for (std::size_t k = 0; k < r.ids.size(); k++) {
      if (r.padded[k]) continue;
      hitsTarget += r.ids[k] == target;
      hitsOther += r.ids[k] == other;
    }
  }
  CHECK(hitsTarget > hitsOther);
  CHECK(hitsTarget > 150);
}

TEST_CASE("insertLabels appends, ignores duplicates, respects the cap") {
  NeuronIndex ix(20, 3, {2, 1, 3}, 1);
  const uint32_t code[] = {2};
  const uint32_t seven[] = {7};
  ix.insertLabels(seven, code);
  CHECK(ix.table(0).contains(2, 7));
  ix.insertLabels(seven, code);
  CHECK(ix.table(0).bucket(2).size() == 1);
  const uint32_t more[] = {1, 2, 3, 4, 5};
  ix.insertLabels(more, code);
  CHECK(ix.table(0).bucket(2).size() == 3);
  checkBucketInvariants(ix);
}

TEST_CASE("rebuild is deterministic and drops inserted labels") {
  const auto w = randomRows(300, 10, 9);
  NeuronIndex a(300, 10, {5, 4, 12}, 33);
  NeuronIndex b(300, 10, {5, 4, 12}, 33);
  a.rebuild(w);
  b.rebuild(w);
  CHECK(a == b);
  const NeuronIndex snapshot = a;
  const uint32_t codes[] = {0, 1, 2, 3};
  const uint32_t labels[] = {299, 298};
  a.insertLabels(labels, codes);
  a.rebuild(w);
  CHECK(a == snapshot);
}

TEST_CASE("zero weights put every id into bucket 0") {
  std::vector<double> w(50 * 4, 0.0);
  NeuronIndex ix(50, 4, {3, 2, 64}, 1);
  ix.rebuild(w);
  for (uint32_t j = 0; j < 2; j++) {
    CHECK(ix.table(j).bucket(0).size() == 50);
    CHECK(ix.table(j).numNonEmpty() == 1);
  }
  NeuronIndex capped(50, 4, {3, 2, 7}, 1);
  capped.rebuild(w);
  CHECK(capped.table(0).bucket(0).size() == 7);
}

TEST_CASE("property: bucket cap and uniqueness hold under any interleaving") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 30; trial++) {
    const uint32_t d = 10 + static_cast<uint32_t>(rng() % 300);
    const uint32_t dim = 1 + static_cast<uint32_t>(rng() % 12);
    const IndexShape shape{1 + static_cast<uint32_t>(rng() % 6), 1 + static_cast<uint32_t>(rng() % 5),
                           1 + static_cast<uint32_t>(rng() % 10)};
    NeuronIndex ix(d, dim, shape, rng());
    for (int op = 0; op < 40; op++) {
      if (rng() % 4 == 0) {
        ix.rebuild(randomRows(d, dim, rng()));
      } else {
        std::vector<uint32_t> codes(shape.numTables);
        for (auto& c : codes) c = static_cast<uint32_t>(rng() % (1u << shape.kBits));
        std::vector<uint32_t> labels(1 + rng() % 6);
        for (auto& l : labels) l = static_cast<uint32_t>(rng() % d);
        ix.insertLabels(labels, codes);
      }
      checkBucketInvariants(ix);
    }
  }
}

TEST_CASE("table seeds are pairwise distinct and prefixes are shared") {
  NeuronIndex ix(10, 3, {4, 64, 4}, 0);
  std::set<uint64_t> seeds;
  for (uint32_t j = 0; j < 64; j++) seeds.insert(ix.table(j).hasher().seed());
  CHECK(seeds.size() == 64);
}

TEST_CASE("property: more tables retrieve a superset of the sampled ids") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; trial++) {
    const uint32_t d = 200, dim = 8;
    const auto w = randomRows(d, dim, rng());
    const uint64_t seed = rng();
    const uint32_t lBig = 2 + static_cast<uint32_t>(rng() % 8);
    const uint32_t lSmall = 1 + static_cast<uint32_t>(rng() % (lBig - 1));
    NeuronIndex big(d, dim, {5, lBig, 16}, seed);
    NeuronIndex small(d, dim, {5, lSmall, 16}, seed);
    big.rebuild(w);
    small.rebuild(w);
    for (int q = 0; q < 10; q++) {
      const SparseVector x = testing::randomSparse(dim, 0.6, rng);
      const auto rb = big.query(x, d / 4);
      const auto rs = small.query(x, d / 4);
      std::set<uint32_t> bigSampled;
      for (std::size_t k = 0; k < rb.ids.size(); k++) if (!rb.padded[k]) bigSampled.insert(rb.ids[k]);
      for (std::size_t k = 0; k < rs.ids.size(); k++) {
        if (!rs.padded[k]) REQUIRE(bigSampled.count(rs.ids[k]) == 1);
      }
    }
  }
}

TEST_CASE("serialization round-trips and starts with the magic") {
  const auto w = randomRows(120, 7, 4);
  NeuronIndex ix(120, 7, {4, 3, 9}, 1234);
  ix.rebuild(w);
  const uint32_t codes[] = {1, 2, 3};
  const uint32_t labels[] = {5};
  ix.insertLabels(labels, codes);
  std::stringstream s;
  ix.serialize(s);
  const std::string bytes = s.str();
  CHECK(bytes.substr(0, 4) == "BLTI");
  const NeuronIndex back = NeuronIndex::deserialize(s);
  CHECK(back == ix);
  std::mt19937_64 rng(1);
  const SparseVector x = testing::randomSparse(7, 0.5, rng);
  CHECK(back.query(x, 10).ids == ix.query(x, 10).ids);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(NeuronIndex::deserialize(truncated), FormatError);
}

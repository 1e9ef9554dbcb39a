#pragma once

#include <bolt/autotune.h>
#include <bolt/sparse_vector.h>

#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <vector>

namespace bolt {

// SplitMix64 finalizer; used to derive independent seeds from one seed.
uint64_t splitMix64(uint64_t x);

// Signed random projection hash. Bit j of a code is 1 iff the j-th Gaussian
// hyperplane has a strictly positive dot product with the input. Exact zeros
// map to 0.
class SrpHasher {
 public:
  SrpHasher(uint32_t kBits, uint32_t inputDim, uint64_t seed);

  // `rowMajor` holds K rows of inputDim values; row j is the hyperplane for
  // bit j. The seed is recorded as 0.
  static SrpHasher fromProjections(uint32_t kBits, uint32_t inputDim,
                                   std::span<const double> rowMajor);

  uint32_t hash(const SparseVector& v) const;
  uint32_t hashDense(std::span<const double> v) const;

  uint32_t kBits() const { return _kBits; }
  uint32_t inputDim() const { return _inputDim; }
  uint64_t seed() const { return _seed; }
  double projection(uint32_t bit, uint32_t coord) const {
    return _proj[static_cast<std::size_t>(coord) * _kBits + bit];
  }

 private:
  SrpHasher(uint32_t kBits, uint32_t inputDim, uint64_t seed,
            std::vector<double> coordMajor);

  uint32_t _kBits;
  uint32_t _inputDim;
  uint64_t _seed;
  // Coordinate-major (inputDim x K) so a sparse input touches one
  // contiguous K-run per nonzero.
  std::vector<double> _proj;
};

// 2^K fixed-capacity buckets of neuron ids. A bucket never holds more than
// `bucketCap` ids and never holds the same id twice.
class HashTable {
 public:
  HashTable(SrpHasher hasher, uint32_t bucketCap);

  const SrpHasher& hasher() const { return _hasher; }
  uint32_t numBuckets() const { return static_cast<uint32_t>(_sizes.size()); }
  uint32_t bucketCap() const { return _cap; }

  std::span<const uint32_t> bucket(uint32_t code) const {
    return {_slots.data() + static_cast<std::size_t>(code) * _cap,
            _sizes[code]};
  }
  bool contains(uint32_t code, uint32_t id) const;

  uint32_t numNonEmpty() const;
  uint64_t totalEntries() const;

  void clear();

  // Reservoir sampling step: `seen` counts every insert attempted into this
  // bucket so far, including this one. Keeps each of the `seen` ids with
  // equal probability R / seen.
  void insertReservoir(uint32_t code, uint32_t id, uint64_t seen,
                       std::mt19937_64& rng);

  // Appends `id` unless present; a full bucket evicts a uniformly random
  // victim. Returns false if `id` was already in the bucket.
  bool insertEvicting(uint32_t code, uint32_t id, std::mt19937_64& rng);

  // Raw restore for deserialization; throws FormatError on bad input.
  void restoreBucket(uint32_t code, std::span<const uint32_t> ids);

  friend bool operator==(const HashTable& a, const HashTable& b) {
    return a._cap == b._cap && a._sizes == b._sizes && a._slots == b._slots;
  }

 private:
  SrpHasher _hasher;
  uint32_t _cap;
  std::vector<uint32_t> _sizes;
  std::vector<uint32_t> _slots;
};

// Neurons sampled for one input.
struct Retrieval {
  // Ascending, distinct.
  std::vector<uint32_t> ids;
  // padded[k] != 0 when ids[k] came from the fallback fill rather than a
  // hash bucket.
  std::vector<uint8_t> padded;
  // Selected bucket code in each table.
  std::vector<uint32_t> codes;
};

// L independent SRP tables over the weight rows of one layer.
//
// Thread safety: const methods may run concurrently with each other.
// rebuild() and insertLabels() need exclusive access.
class NeuronIndex {
 public:
  // Empty buckets. Table seeds are derived from `seed` and are pairwise
  // distinct.
  NeuronIndex(uint32_t numNeurons, uint32_t inputDim, IndexShape shape,
              uint64_t seed);

  // Refills every table from `weights` (numNeurons rows of inputDim values,
  // row-major), keeping the hasher seeds. Labels added through
  // insertLabels() since the previous rebuild are dropped. Overfull buckets
  // keep a uniform random sample of their candidates (reservoir sampling).
  void rebuild(std::span<const double> weights);

  // One code per table.
  std::vector<uint32_t> hashCodes(const SparseVector& input) const;

  // Union of the selected bucket in every table. Fewer than `minCount` ids
  // are padded round-robin from an input-dependent start; more than
  // 4 * minCount are cut to the ids seen in the most tables, ties broken by
  // smaller id.
  Retrieval query(const SparseVector& input, uint32_t minCount) const;
  Retrieval queryCodes(std::vector<uint32_t> codes, uint32_t minCount) const;

  // Inserts each label into the bucket `codes[j]` of table j. Full buckets
  // evict a random member.
  void insertLabels(std::span<const uint32_t> labels,
                    std::span<const uint32_t> codes);

  uint32_t numNeurons() const { return _numNeurons; }
  uint32_t inputDim() const { return _inputDim; }
  uint32_t kBits() const { return _shape.kBits; }
  uint32_t numTables() const { return _shape.numTables; }
  uint32_t bucketCap() const { return _shape.bucketCap; }
  IndexShape shape() const { return _shape; }
  uint64_t seed() const { return _seed; }
  const HashTable& table(uint32_t j) const { return _tables[j]; }

  // Layout: "BLTI", version u32, K, L, R, d, d_prev (u32), index seed u64,
  // L table seeds u64, then per table a u32 count of nonempty buckets
  // followed by (code u32, count u32, count x id u32) records in ascending
  // code order. All integers little-endian.
  void serialize(std::ostream& out) const;
  static NeuronIndex deserialize(std::istream& in);

  friend bool operator==(const NeuronIndex& a, const NeuronIndex& b) {
    return a._numNeurons == b._numNeurons && a._inputDim == b._inputDim &&
           a._shape == b._shape && a._seed == b._seed &&
           a._tables == b._tables;
  }

 private:
  NeuronIndex(uint32_t numNeurons, uint32_t inputDim, IndexShape shape,
              uint64_t seed, std::span<const uint64_t> tableSeeds);

  void hashFused(std::span<const uint32_t> idx, std::span<const double> val,
                 std::span<double> acc, std::span<uint32_t> codes) const;
  void resetAlnRng();

  uint32_t _numNeurons;
  uint32_t _inputDim;
  IndexShape _shape;
  uint64_t _seed;
  std::vector<HashTable> _tables;
  // inputDim x (K * L): every table's hyperplanes side by side so one pass
  // over the input computes all codes.
  std::vector<double> _fused;
  std::mt19937_64 _alnRng;
};

NeuronIndex buildIndex(std::span<const double> weights, uint32_t numNeurons,
                       uint32_t inputDim, const AutotunePlan& plan,
                       uint64_t seed);

}  // namespace bolt

#include <bolt/lsh_index.h>

#include <bolt/binary_io.h>
#include <bolt/error.h>

#include <algorithm>
#include <numeric>
#include <string>

namespace bolt {

namespace {

constexpr uint32_t kIndexVersion = 1;
constexpr uint32_t kRebuildBlock = 2048;

// Per-thread multiplicity counters for query(). A slot is live only when
// its stamp equals the current epoch, so clearing is O(1).
struct QueryScratch {
  std::vector<uint32_t> stamp;
  std::vector<uint32_t> count;
  std::vector<uint32_t> seen;
  uint32_t epoch = 0;

  void begin(uint32_t numNeurons) {
    if (stamp.size() < numNeurons) {
      stamp.assign(numNeurons, 0);
      count.assign(numNeurons, 0);
      epoch = 0;
    }
    if (++epoch == 0) {
      std::fill(stamp.begin(), stamp.end(), 0);
      epoch = 1;
    }
    seen.clear();
  }
};

thread_local QueryScratch tlsScratch;

uint64_t foldCodes(std::span<const uint32_t> codes) {
  uint64_t h = 0x243F6A8885A308D3ULL;
  for (uint32_t c : codes) {
    h = splitMix64(h ^ c);
  }
  return h;
}

}  // namespace

uint64_t splitMix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// ---------------------------------------------------------------- SrpHasher

SrpHasher::SrpHasher(uint32_t kBits, uint32_t inputDim, uint64_t seed)
    : _kBits(kBits), _inputDim(inputDim), _seed(seed) {
  if (kBits < 1 || kBits > 32 || inputDim < 1) {
    throw ContractError("SrpHasher needs 1 <= K <= 32 and input dim >= 1");
  }
  _proj.resize(static_cast<std::size_t>(inputDim) * kBits);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (uint32_t b = 0; b < kBits; b++) {
    for (uint32_t c = 0; c < inputDim; c++) {
      _proj[static_cast<std::size_t>(c) * kBits + b] = normal(gen);
    }
  }
}

SrpHasher::SrpHasher(uint32_t kBits, uint32_t inputDim, uint64_t seed,
                     std::vector<double> coordMajor)
    : _kBits(kBits),
      _inputDim(inputDim),
      _seed(seed),
      _proj(std::move(coordMajor)) {}

SrpHasher SrpHasher::fromProjections(uint32_t kBits, uint32_t inputDim,
                                     std::span<const double> rowMajor) {
  if (kBits < 1 || kBits > 32 || inputDim < 1 ||
      rowMajor.size() != static_cast<std::size_t>(kBits) * inputDim) {
    throw ContractError("SrpHasher::fromProjections: bad shape");
  }
  std::vector<double> coordMajor(rowMajor.size());
  for (uint32_t b = 0; b < kBits; b++) {
    for (uint32_t c = 0; c < inputDim; c++) {
      coordMajor[static_cast<std::size_t>(c) * kBits + b] =
          rowMajor[static_cast<std::size_t>(b) * inputDim + c];
    }
  }
  return SrpHasher(kBits, inputDim, 0, std::move(coordMajor));
}

uint32_t SrpHasher::hash(const SparseVector& v) const {
  if (v.dim() != _inputDim) {
    throw DimensionError("SrpHasher: input dim " + std::to_string(v.dim()) +
                         " vs hasher dim " + std::to_string(_inputDim));
  }
  double acc[32] = {};
  const auto idx = v.indices();
  const auto val = v.values();
  for (std::size_t k = 0; k < idx.size(); k++) {
    const double* p = _proj.data() + static_cast<std::size_t>(idx[k]) * _kBits;
    for (uint32_t b = 0; b < _kBits; b++) {
      acc[b] += val[k] * p[b];
    }
  }
  uint32_t code = 0;
  for (uint32_t b = 0; b < _kBits; b++) {
    code |= static_cast<uint32_t>(acc[b] > 0.0) << b;
  }
  return code;
}

uint32_t SrpHasher::hashDense(std::span<const double> v) const {
  if (v.size() != _inputDim) {
    throw DimensionError("SrpHasher: input dim " + std::to_string(v.size()) +
                         " vs hasher dim " + std::to_string(_inputDim));
  }
  double acc[32] = {};
  for (uint32_t c = 0; c < _inputDim; c++) {
    const double* p = _proj.data() + static_cast<std::size_t>(c) * _kBits;
    for (uint32_t b = 0; b < _kBits; b++) {
      acc[b] += v[c] * p[b];
    }
  }
  uint32_t code = 0;
  for (uint32_t b = 0; b < _kBits; b++) {
    code |= static_cast<uint32_t>(acc[b] > 0.0) << b;
  }
  return code;
}

// ---------------------------------------------------------------- HashTable

HashTable::HashTable(SrpHasher hasher, uint32_t bucketCap)
    : _hasher(std::move(hasher)), _cap(bucketCap) {
  if (bucketCap < 1) {
    throw ContractError("HashTable: bucket cap must be at least 1");
  }
  const std::size_t buckets = std::size_t{1} << _hasher.kBits();
  _sizes.assign(buckets, 0);
  _slots.assign(buckets * _cap, 0);
}

bool HashTable::contains(uint32_t code, uint32_t id) const {
  const auto b = bucket(code);
  return std::find(b.begin(), b.end(), id) != b.end();
}

uint32_t HashTable::numNonEmpty() const {
  return static_cast<uint32_t>(
      std::count_if(_sizes.begin(), _sizes.end(), [](uint32_t s) { return s > 0; }));
}

uint64_t HashTable::totalEntries() const {
  return std::accumulate(_sizes.begin(), _sizes.end(), uint64_t{0});
}

void HashTable::clear() {
  std::fill(_sizes.begin(), _sizes.end(), 0);
  std::fill(_slots.begin(), _slots.end(), 0);
}

void HashTable::insertReservoir(uint32_t code, uint32_t id, uint64_t seen,
                                std::mt19937_64& rng) {
  uint32_t* slots = _slots.data() + static_cast<std::size_t>(code) * _cap;
  uint32_t& size = _sizes[code];
  if (size < _cap) {
    slots[size++] = id;
    return;
  }
  const uint64_t j = std::uniform_int_distribution<uint64_t>(0, seen - 1)(rng);
  if (j < _cap) {
    slots[j] = id;
  }
}

bool HashTable::insertEvicting(uint32_t code, uint32_t id,
                               std::mt19937_64& rng) {
  if (contains(code, id)) {
    return false;
  }
  uint32_t* slots = _slots.data() + static_cast<std::size_t>(code) * _cap;
  uint32_t& size = _sizes[code];
  if (size < _cap) {
    slots[size++] = id;
  } else {
    slots[std::uniform_int_distribution<uint32_t>(0, _cap - 1)(rng)] = id;
  }
  return true;
}

void HashTable::restoreBucket(uint32_t code, std::span<const uint32_t> ids) {
  if (code >= numBuckets() || ids.size() > _cap) {
    throw FormatError("bucket record out of range");
  }
  std::copy(ids.begin(), ids.end(),
            _slots.begin() + static_cast<std::ptrdiff_t>(code) * _cap);
  _sizes[code] = static_cast<uint32_t>(ids.size());
}

// -------------------------------------------------------------- NeuronIndex

namespace {

std::vector<uint64_t> deriveTableSeeds(uint64_t seed, uint32_t numTables) {
  std::vector<uint64_t> seeds;
  seeds.reserve(numTables);
  uint64_t state = seed;
  while (seeds.size() < numTables) {
    state = splitMix64(state);
    if (std::find(seeds.begin(), seeds.end(), state) == seeds.end()) {
      seeds.push_back(state);
    }
  }
  return seeds;
}

}  // namespace

NeuronIndex::NeuronIndex(uint32_t numNeurons, uint32_t inputDim,
                         IndexShape shape, uint64_t seed)
    : NeuronIndex(numNeurons, inputDim, shape, seed,
                  deriveTableSeeds(seed, shape.numTables)) {}

NeuronIndex::NeuronIndex(uint32_t numNeurons, uint32_t inputDim,
                         IndexShape shape, uint64_t seed,
                         std::span<const uint64_t> tableSeeds)
    : _numNeurons(numNeurons), _inputDim(inputDim), _shape(shape), _seed(seed) {
  if (numNeurons < 1 || shape.numTables < 1) {
    throw ContractError("NeuronIndex needs at least one neuron and one table");
  }
  _tables.reserve(shape.numTables);
  for (uint32_t j = 0; j < shape.numTables; j++) {
    _tables.emplace_back(SrpHasher(shape.kBits, inputDim, tableSeeds[j]),
                         shape.bucketCap);
  }

  const std::size_t width =
      static_cast<std::size_t>(shape.kBits) * shape.numTables;
  _fused.resize(width * inputDim);
  for (uint32_t c = 0; c < inputDim; c++) {
    for (uint32_t j = 0; j < shape.numTables; j++) {
      for (uint32_t b = 0; b < shape.kBits; b++) {
        _fused[c * width + j * shape.kBits + b] =
            _tables[j].hasher().projection(b, c);
      }
    }
  }
  resetAlnRng();
}

void NeuronIndex::resetAlnRng() { _alnRng.seed(splitMix64(_seed ^ 0xA1A1A1A1ULL)); }

void NeuronIndex::hashFused(std::span<const uint32_t> idx,
                            std::span<const double> val, std::span<double> acc,
                            std::span<uint32_t> codes) const {
  const std::size_t width = acc.size();
  std::fill(acc.begin(), acc.end(), 0.0);
  for (std::size_t k = 0; k < idx.size(); k++) {
    const double x = val[k];
    const double* p = _fused.data() + static_cast<std::size_t>(idx[k]) * width;
    for (std::size_t c = 0; c < width; c++) {
      acc[c] += x * p[c];
    }
  }
  const uint32_t kBits = _shape.kBits;
  for (uint32_t j = 0; j < _shape.numTables; j++) {
    uint32_t code = 0;
    for (uint32_t b = 0; b < kBits; b++) {
      code |= static_cast<uint32_t>(acc[j * kBits + b] > 0.0) << b;
    }
    codes[j] = code;
  }
}

std::vector<uint32_t> NeuronIndex::hashCodes(const SparseVector& input) const {
  if (input.dim() != _inputDim) {
    throw DimensionError("NeuronIndex: input dim " +
                         std::to_string(input.dim()) + " vs index dim " +
                         std::to_string(_inputDim));
  }
  std::vector<double> acc(static_cast<std::size_t>(_shape.kBits) *
                          _shape.numTables);
  std::vector<uint32_t> codes(_shape.numTables);
  hashFused(input.indices(), input.values(), acc, codes);
  return codes;
}

void NeuronIndex::rebuild(std::span<const double> weights) {
  if (weights.size() != static_cast<std::size_t>(_numNeurons) * _inputDim) {
    throw DimensionError("NeuronIndex::rebuild: weight matrix has wrong size");
  }
  for (auto& t : _tables) {
    t.clear();
  }
  resetAlnRng();

  const uint32_t numTables = _shape.numTables;
  const std::size_t width = static_cast<std::size_t>(_shape.kBits) * numTables;
  std::vector<uint32_t> iota(_inputDim);
  std::iota(iota.begin(), iota.end(), 0u);

  std::vector<std::vector<uint64_t>> seen(numTables);
  std::vector<std::mt19937_64> rngs;
  rngs.reserve(numTables);
  for (uint32_t j = 0; j < numTables; j++) {
    seen[j].assign(_tables[j].numBuckets(), 0);
    rngs.emplace_back(splitMix64(_tables[j].hasher().seed() + 1));
  }

  std::vector<uint32_t> codes(static_cast<std::size_t>(kRebuildBlock) * numTables);
  for (uint32_t start = 0; start < _numNeurons; start += kRebuildBlock) {
    const uint32_t end = std::min(_numNeurons, start + kRebuildBlock);

#pragma omp parallel
    {
      std::vector<double> acc(width);
#pragma omp for schedule(static)
      for (int64_t i = start; i < static_cast<int64_t>(end); i++) {
        const std::span<const double> row =
            weights.subspan(static_cast<std::size_t>(i) * _inputDim, _inputDim);
        hashFused(iota, row, acc,
                  std::span<uint32_t>(codes).subspan(
                      static_cast<std::size_t>(i - start) * numTables, numTables));
      }
    }

    for (uint32_t i = start; i < end; i++) {
      const uint32_t* rowCodes =
          codes.data() + static_cast<std::size_t>(i - start) * numTables;
      for (uint32_t j = 0; j < numTables; j++) {
        const uint64_t n = ++seen[j][rowCodes[j]];
        _tables[j].insertReservoir(rowCodes[j], i, n, rngs[j]);
      }
    }
  }
}

Retrieval NeuronIndex::query(const SparseVector& input, uint32_t minCount) const {
  return queryCodes(hashCodes(input), minCount);
}

Retrieval NeuronIndex::queryCodes(std::vector<uint32_t> codes,
                                  uint32_t minCount) const {
  if (codes.size() != _shape.numTables) {
    throw ContractError("NeuronIndex::queryCodes: need one code per table");
  }
  minCount = std::clamp(minCount, 1u, _numNeurons);
  const std::size_t budget =
      std::min<std::size_t>(std::size_t{4} * minCount, _numNeurons);

  QueryScratch& s = tlsScratch;
  s.begin(_numNeurons);
  for (uint32_t j = 0; j < _shape.numTables; j++) {
    for (uint32_t id : _tables[j].bucket(codes[j])) {
      if (s.stamp[id] != s.epoch) {
        s.stamp[id] = s.epoch;
        s.count[id] = 1;
        s.seen.push_back(id);
      } else {
        s.count[id]++;
      }
    }
  }

  if (s.seen.size() > budget) {
    auto byMultiplicity = [&s](uint32_t a, uint32_t b) {
      return s.count[a] != s.count[b] ? s.count[a] > s.count[b] : a < b;
    };
    std::nth_element(s.seen.begin(),
                     s.seen.begin() + static_cast<std::ptrdiff_t>(budget),
                     s.seen.end(), byMultiplicity);
    s.seen.resize(budget);
  }
  std::sort(s.seen.begin(), s.seen.end());

  Retrieval out;
  out.ids.reserve(std::max<std::size_t>(s.seen.size(), minCount));
  out.ids = s.seen;
  out.padded.assign(out.ids.size(), 0);

  if (out.ids.size() < minCount) {
    std::vector<uint32_t> fill;
    const uint32_t needed = minCount - static_cast<uint32_t>(out.ids.size());
    uint32_t id = static_cast<uint32_t>(foldCodes(codes) % _numNeurons);
    while (fill.size() < needed) {
      if (s.stamp[id] != s.epoch) {
        s.stamp[id] = s.epoch;
        fill.push_back(id);
      }
      id = id + 1 == _numNeurons ? 0 : id + 1;
    }
    std::sort(fill.begin(), fill.end());

    std::vector<uint32_t> merged(out.ids.size() + fill.size());
    std::vector<uint8_t> padded(merged.size());
    std::size_t a = 0;
    std::size_t b = 0;
    for (std::size_t k = 0; k < merged.size(); k++) {
      if (b == fill.size() || (a < out.ids.size() && out.ids[a] < fill[b])) {
        merged[k] = out.ids[a++];
        padded[k] = 0;
      } else {
        merged[k] = fill[b++];
        padded[k] = 1;
      }
    }
    out.ids = std::move(merged);
    out.padded = std::move(padded);
  }
  out.codes = std::move(codes);
  return out;
}

void NeuronIndex::insertLabels(std::span<const uint32_t> labels,
                               std::span<const uint32_t> codes) {
  if (codes.size() != _shape.numTables) {
    throw ContractError("insertLabels: need one code per table");
  }
  for (uint32_t j = 0; j < _shape.numTables; j++) {
    if (codes[j] >= _tables[j].numBuckets()) {
      throw ContractError("insertLabels: code out of range");
    }
  }
  for (uint32_t label : labels) {
    if (label >= _numNeurons) {
      throw ContractError("insertLabels: label " + std::to_string(label) +
                          " out of range");
    }
    for (uint32_t j = 0; j < _shape.numTables; j++) {
      _tables[j].insertEvicting(codes[j], label, _alnRng);
    }
  }
}

void NeuronIndex::serialize(std::ostream& out) const {
  io::writeMagic(out, "BLTI");
  io::writeU32(out, kIndexVersion);
  io::writeU32(out, _shape.kBits);
  io::writeU32(out, _shape.numTables);
  io::writeU32(out, _shape.bucketCap);
  io::writeU32(out, _numNeurons);
  io::writeU32(out, _inputDim);
  io::writeU64(out, _seed);
  for (const auto& t : _tables) {
    io::writeU64(out, t.hasher().seed());
  }
  for (const auto& t : _tables) {
    io::writeU32(out, t.numNonEmpty());
    for (uint32_t code = 0; code < t.numBuckets(); code++) {
      const auto b = t.bucket(code);
      if (b.empty()) {
        continue;
      }
      io::writeU32(out, code);
      io::writeU32(out, static_cast<uint32_t>(b.size()));
      io::writeU32s(out, b);
    }
  }
}

NeuronIndex NeuronIndex::deserialize(std::istream& in) {
  io::expectMagic(in, "BLTI");
  const uint32_t version = io::readU32(in);
  if (version != kIndexVersion) {
    throw FormatError("unsupported index version " + std::to_string(version));
  }
  IndexShape shape;
  shape.kBits = io::readU32(in);
  shape.numTables = io::readU32(in);
  shape.bucketCap = io::readU32(in);
  const uint32_t numNeurons = io::readU32(in);
  const uint32_t inputDim = io::readU32(in);
  if (shape.kBits < 1 || shape.kBits > 32 || shape.numTables < 1 ||
      shape.bucketCap < 1 || numNeurons < 1 || inputDim < 1) {
    throw FormatError("index header out of range");
  }
  const uint64_t seed = io::readU64(in);
  std::vector<uint64_t> tableSeeds(shape.numTables);
  for (auto& s : tableSeeds) {
    s = io::readU64(in);
  }

  NeuronIndex index(numNeurons, inputDim, shape, seed, tableSeeds);
  std::vector<uint32_t> ids;
  for (auto& t : index._tables) {
    const uint32_t nonEmpty = io::readU32(in);
    for (uint32_t n = 0; n < nonEmpty; n++) {
      const uint32_t code = io::readU32(in);
      const uint32_t count = io::readU32(in);
      if (count > shape.bucketCap) {
        throw FormatError("bucket larger than cap");
      }
      ids.resize(count);
      io::readU32s(in, ids);
      for (uint32_t id : ids) {
        if (id >= numNeurons) {
          throw FormatError("bucket id out of range");
        }
      }
      t.restoreBucket(code, ids);
    }
  }
  return index;
}

NeuronIndex buildIndex(std::span<const double> weights, uint32_t numNeurons,
                       uint32_t inputDim, const AutotunePlan& plan,
                       uint64_t seed) {
  NeuronIndex index(numNeurons, inputDim, plan.shape(), seed);
  index.rebuild(weights);
  return index;
}

}  // namespace bolt

#pragma once

#include <bolt/sparse_vector.h>

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <vector>

namespace bolt {

struct Example {
  // Ascending, distinct, nonempty.
  std::vector<uint32_t> labels;
  SparseVector features;

  friend bool operator==(const Example&, const Example&) = default;
};

struct XcDataset {
  uint32_t numFeatures = 0;
  uint32_t numLabels = 0;
  std::vector<Example> examples;

  std::size_t numPoints() const { return examples.size(); }

  // Examples [begin, end) with the same header dimensions.
  XcDataset slice(std::size_t begin, std::size_t end) const;

  friend bool operator==(const XcDataset&, const XcDataset&) = default;
};

// Extreme classification text format:
//
//   num_points num_features num_labels
//   l1,l2,... f1:v1 f2:v2 ...
//
// Ids are 0-based unless `indexBase` is 1, in which case 1 is subtracted on
// read. Features are sorted by index. LF and CRLF endings are equivalent
// and blank lines are skipped. Throws DataError.
XcDataset parseXc(std::istream& in, uint32_t indexBase = 0);

// Throws IoError if the file cannot be opened.
XcDataset loadXcFile(const std::filesystem::path& path, uint32_t indexBase = 0);

// Inverse of parseXc (0-based, LF). Values use the shortest representation
// that reads back to the same double.
void writeXc(const XcDataset& data, std::ostream& out);

// Clustered classification task. Class c has a random unit direction mu_c
// in featureDim dimensions; a sample is mu_c plus isotropic Gaussian noise
// of expected norm `noise` (per-coordinate standard deviation
// noise / sqrt(featureDim)), reduced to its 32 largest-magnitude
// coordinates. Samples are interleaved by class: example r * numClasses + c
// is the r-th sample of class c. Deterministic in `seed`.
XcDataset synthClustered(uint32_t numClasses, uint32_t samplesPerClass,
                         uint32_t featureDim, double noise, uint64_t seed);

}  // namespace bolt

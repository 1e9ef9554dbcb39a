#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace bolt {

// Fixed-length vector of doubles. The length is set at construction and never
// changes; element access goes through spans or operator[].
class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t dim, double fill = 0.0) : _values(dim, fill) {}
  DenseVector(std::initializer_list<double> values) : _values(values) {}
  explicit DenseVector(std::vector<double> values) : _values(std::move(values)) {}

  std::size_t dim() const { return _values.size(); }
  double operator[](std::size_t i) const { return _values[i]; }
  double& operator[](std::size_t i) { return _values[i]; }

  std::span<const double> view() const { return _values; }
  std::span<double> view() { return _values; }
  const std::vector<double>& values() const { return _values; }

  friend bool operator==(const DenseVector&, const DenseVector&) = default;

 private:
  std::vector<double> _values;
};

// Index/value pairs over an ambient space of known dimension. Indices are
// strictly increasing and every index is < dim. An empty entry list is the
// zero vector. Values are not filtered: an explicitly stored 0.0 stays stored.
class SparseVector {
 public:
  SparseVector() = default;

  // The zero vector of the given dimension.
  explicit SparseVector(uint32_t dim);

  // Validates ordering and range; throws ContractError on violation and
  // DimensionError if dim is zero.
  SparseVector(uint32_t dim, std::vector<uint32_t> indices,
               std::vector<double> values);

  SparseVector(uint32_t dim,
               std::initializer_list<std::pair<uint32_t, double>> entries);

  // Skips validation. Callers guarantee the invariants; checked only by
  // assert in debug builds.
  static SparseVector fromSortedUnchecked(uint32_t dim,
                                          std::vector<uint32_t> indices,
                                          std::vector<double> values);

  uint32_t dim() const { return _dim; }
  std::size_t nnz() const { return _indices.size(); }
  bool empty() const { return _indices.empty(); }

  std::span<const uint32_t> indices() const { return _indices; }
  std::span<const double> values() const { return _values; }

  uint32_t index(std::size_t k) const { return _indices[k]; }
  double value(std::size_t k) const { return _values[k]; }

  // Value at coordinate i, 0 if not stored. Binary search.
  double at(uint32_t i) const;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  uint32_t _dim = 0;
  std::vector<uint32_t> _indices;
  std::vector<double> _values;
};

// Sum over the stored entries of value * row[index].
double sparseDenseDot(const SparseVector& v, std::span<const double> row);
double sparseDenseDot(const SparseVector& v, const DenseVector& row);

DenseVector densify(const SparseVector& v);

// Keeps exactly the nonzero entries.
SparseVector sparsify(std::span<const double> row);
SparseVector sparsify(const DenseVector& row);

}  // namespace bolt

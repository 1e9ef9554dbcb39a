#include <bolt/sparse_vector.h>

#include <bolt/error.h>

#include <algorithm>
#include <cassert>
#include <string>

namespace bolt {

namespace {

std::vector<uint32_t> firsts(
    std::initializer_list<std::pair<uint32_t, double>> entries) {
  std::vector<uint32_t> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    out.push_back(e.first);
  }
  return out;
}

std::vector<double> seconds(
    std::initializer_list<std::pair<uint32_t, double>> entries) {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    out.push_back(e.second);
  }
  return out;
}

}  // namespace

SparseVector::SparseVector(uint32_t dim) : _dim(dim) {
  if (dim == 0) {
    throw DimensionError("SparseVector dimension must be positive");
  }
}

SparseVector::SparseVector(uint32_t dim, std::vector<uint32_t> indices,
                           std::vector<double> values)
    : _dim(dim), _indices(std::move(indices)), _values(std::move(values)) {
  if (dim == 0) {
    throw DimensionError("SparseVector dimension must be positive");
  }
  if (_indices.size() != _values.size()) {
    throw ContractError("SparseVector index/value length mismatch");
  }
  for (std::size_t k = 0; k < _indices.size(); k++) {
    if (_indices[k] >= dim) {
      throw ContractError("SparseVector index " + std::to_string(_indices[k]) +
                          " out of range for dim " + std::to_string(dim));
    }
    if (k > 0 && _indices[k] <= _indices[k - 1]) {
      throw ContractError("SparseVector indices must be strictly increasing");
    }
  }
}

SparseVector::SparseVector(
    uint32_t dim, std::initializer_list<std::pair<uint32_t, double>> entries)
    : SparseVector(dim, firsts(entries), seconds(entries)) {}

SparseVector SparseVector::fromSortedUnchecked(uint32_t dim,
                                               std::vector<uint32_t> indices,
                                               std::vector<double> values) {
  assert(indices.size() == values.size());
  assert(std::is_sorted(indices.begin(), indices.end()));
  assert(indices.empty() || indices.back() < dim);
  SparseVector v;
  v._dim = dim;
  v._indices = std::move(indices);
  v._values = std::move(values);
  return v;
}

double SparseVector::at(uint32_t i) const {
  auto it = std::lower_bound(_indices.begin(), _indices.end(), i);
  if (it == _indices.end() || *it != i) {
    return 0.0;
  }
  return _values[it - _indices.begin()];
}

double sparseDenseDot(const SparseVector& v, std::span<const double> row) {
  if (v.dim() != row.size()) {
    throw DimensionError("sparseDenseDot: vector dim " +
                         std::to_string(v.dim()) + " vs row dim " +
                         std::to_string(row.size()));
  }
  double sum = 0.0;
  const auto idx = v.indices();
  const auto val = v.values();
  for (std::size_t k = 0; k < idx.size(); k++) {
    sum += val[k] * row[idx[k]];
  }
  return sum;
}

double sparseDenseDot(const SparseVector& v, const DenseVector& row) {
  return sparseDenseDot(v, row.view());
}

DenseVector densify(const SparseVector& v) {
  DenseVector out(v.dim());
  for (std::size_t k = 0; k < v.nnz(); k++) {
    out[v.index(k)] = v.value(k);
  }
  return out;
}

SparseVector sparsify(std::span<const double> row) {
  std::vector<uint32_t> indices;
  std::vector<double> values;
  for (std::size_t i = 0; i < row.size(); i++) {
    if (row[i] != 0.0) {
      indices.push_back(static_cast<uint32_t>(i));
      values.push_back(row[i]);
    }
  }
  return SparseVector(static_cast<uint32_t>(row.size()), std::move(indices),
                      std::move(values));
}

SparseVector sparsify(const DenseVector& row) { return sparsify(row.view()); }

}  // namespace bolt

#include <bolt/dataset.h>

#include <bolt/error.h>
#include <bolt/lsh_index.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <string_view>

namespace bolt {

namespace {

constexpr uint32_t kSynthNonzeros = 32;

bool isSpace(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::string_view trimRight(std::string_view s) {
  while (!s.empty() && isSpace(s.back())) {
    s.remove_suffix(1);
  }
  return s;
}

// Pops the next whitespace-delimited token from `s`; empty at end.
std::string_view nextToken(std::string_view& s) {
  std::size_t b = 0;
  while (b < s.size() && isSpace(s[b])) {
    b++;
  }
  std::size_t e = b;
  while (e < s.size() && !isSpace(s[e])) {
    e++;
  }
  std::string_view tok = s.substr(b, e - b);
  s.remove_prefix(e);
  return tok;
}

bool parseU32(std::string_view s, uint32_t& out) {
  if (s.empty()) {
    return false;
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parseF64(std::string_view s, double& out) {
  if (s.empty()) {
    return false;
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

[[noreturn]] void fail(DataError::Kind kind, std::size_t line,
                       const std::string& what) {
  throw DataError(kind, line,
                  (line ? "line " + std::to_string(line) + ": " : std::string()) + what);
}

}  // namespace

XcDataset XcDataset::slice(std::size_t begin, std::size_t end) const {
  XcDataset out;
  out.numFeatures = numFeatures;
  out.numLabels = numLabels;
  end = std::min(end, examples.size());
  begin = std::min(begin, end);
  out.examples.assign(examples.begin() + static_cast<std::ptrdiff_t>(begin),
                      examples.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

XcDataset parseXc(std::istream& in, uint32_t indexBase) {
  if (indexBase > 1) {
    throw ContractError("index base must be 0 or 1");
  }
  std::string raw;
  std::size_t lineNo = 0;

  uint32_t numPoints = 0;
  XcDataset data;
  {
    if (!std::getline(in, raw)) {
      fail(DataError::Kind::MalformedHeader, 1, "missing header");
    }
    lineNo = 1;
    std::string_view rest = trimRight(raw);
    const auto a = nextToken(rest);
    const auto b = nextToken(rest);
    const auto c = nextToken(rest);
    if (!parseU32(a, numPoints) || !parseU32(b, data.numFeatures) ||
        !parseU32(c, data.numLabels) || !nextToken(rest).empty()) {
      fail(DataError::Kind::MalformedHeader, 1,
           "header must be \"num_points num_features num_labels\"");
    }
    if (data.numFeatures == 0 || data.numLabels == 0) {
      fail(DataError::Kind::MalformedHeader, 1,
           "feature and label counts must be positive");
    }
  }
  data.examples.reserve(numPoints);

  std::vector<std::pair<uint32_t, double>> feats;
  while (std::getline(in, raw)) {
    lineNo++;
    std::string_view line = trimRight(raw);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      continue;
    }
    if (data.examples.size() == numPoints) {
      fail(DataError::Kind::CountMismatch, lineNo,
           "more example lines than the " + std::to_string(numPoints) +
               " declared in the header");
    }

    Example ex;
    std::size_t cut = 0;
    while (cut < line.size() && !isSpace(line[cut])) {
      cut++;
    }
    const std::string_view labelTok = line.substr(0, cut);
    line.remove_prefix(cut);
    if (labelTok.empty() || labelTok.find(':') != std::string_view::npos) {
      fail(DataError::Kind::EmptyLabelSet, lineNo, "example has no labels");
    }
    std::string_view labels = labelTok;
    while (true) {
      const std::size_t comma = labels.find(',');
      const std::string_view item = labels.substr(0, comma);
      uint32_t id = 0;
      if (!parseU32(item, id)) {
        fail(DataError::Kind::MalformedLine, lineNo,
             "bad label \"" + std::string(item) + "\"");
      }
      if (id < indexBase || id - indexBase >= data.numLabels) {
        fail(DataError::Kind::LabelOutOfRange, lineNo,
             "label " + std::string(item) + " out of range for " +
                 std::to_string(data.numLabels) + " labels");
      }
      ex.labels.push_back(id - indexBase);
      if (comma == std::string_view::npos) {
        break;
      }
      labels.remove_prefix(comma + 1);
    }
    std::sort(ex.labels.begin(), ex.labels.end());
    ex.labels.erase(std::unique(ex.labels.begin(), ex.labels.end()), ex.labels.end());

    feats.clear();
    for (auto tok = nextToken(line); !tok.empty(); tok = nextToken(line)) {
      const std::size_t colon = tok.find(':');
      uint32_t idx = 0;
      double val = 0.0;
      if (colon == std::string_view::npos || !parseU32(tok.substr(0, colon), idx) ||
          !parseF64(tok.substr(colon + 1), val)) {
        fail(DataError::Kind::MalformedLine, lineNo,
             "bad feature \"" + std::string(tok) + "\"");
      }
      if (idx < indexBase || idx - indexBase >= data.numFeatures) {
        fail(DataError::Kind::FeatureOutOfRange, lineNo,
             "feature index " + std::to_string(idx) + " out of range for " +
                 std::to_string(data.numFeatures) + " features");
      }
      feats.emplace_back(idx - indexBase, val);
    }
    std::sort(feats.begin(), feats.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<uint32_t> idx(feats.size());
    std::vector<double> val(feats.size());
    for (std::size_t k = 0; k < feats.size(); k++) {
      if (k > 0 && feats[k].first == feats[k - 1].first) {
        fail(DataError::Kind::MalformedLine, lineNo,
             "duplicate feature index " + std::to_string(feats[k].first));
      }
      idx[k] = feats[k].first;
      val[k] = feats[k].second;
    }
    ex.features = SparseVector::fromSortedUnchecked(data.numFeatures, std::move(idx),
                                                    std::move(val));
    data.examples.push_back(std::move(ex));
  }

  if (data.examples.size() != numPoints) {
    fail(DataError::Kind::CountMismatch, 0,
         "header declares " + std::to_string(numPoints) + " examples, found " +
             std::to_string(data.examples.size()));
  }
  return data;
}

XcDataset loadXcFile(const std::filesystem::path& path, uint32_t indexBase) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open dataset " + path.string());
  }
  return parseXc(in, indexBase);
}

void writeXc(const XcDataset& data, std::ostream& out) {
  out << data.numPoints() << ' ' << data.numFeatures << ' ' << data.numLabels << '\n';
  char buf[64];
  for (const auto& ex : data.examples) {
    for (std::size_t k = 0; k < ex.labels.size(); k++) {
      if (k > 0) {
        out << ',';
      }
      out << ex.labels[k];
    }
    for (std::size_t k = 0; k < ex.features.nnz(); k++) {
      auto res = std::to_chars(buf, buf + sizeof(buf), ex.features.value(k));
      out << ' ' << ex.features.index(k) << ':'
          << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

XcDataset synthClustered(uint32_t numClasses, uint32_t samplesPerClass,
                         uint32_t featureDim, double noise, uint64_t seed) {
  if (numClasses < 1 || featureDim < 1 || noise < 0.0) {
    throw ContractError("synthClustered: need classes >= 1, dim >= 1, noise >= 0");
  }
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> centers(static_cast<std::size_t>(numClasses) * featureDim);
  std::mt19937_64 centerGen(splitMix64(seed));
  for (uint32_t c = 0; c < numClasses; c++) {
    double* mu = centers.data() + static_cast<std::size_t>(c) * featureDim;
    double norm = 0.0;
    for (uint32_t j = 0; j < featureDim; j++) {
      mu[j] = normal(centerGen);
      norm += mu[j] * mu[j];
    }
    norm = std::sqrt(norm);
    for (uint32_t j = 0; j < featureDim; j++) {
      mu[j] /= norm;
    }
  }

  XcDataset data;
  data.numFeatures = featureDim;
  data.numLabels = numClasses;
  data.examples.reserve(static_cast<std::size_t>(numClasses) * samplesPerClass);

  const uint32_t keep = std::min(kSynthNonzeros, featureDim);
  const double sigma = noise / std::sqrt(static_cast<double>(featureDim));
  std::mt19937_64 noiseGen(splitMix64(seed + 1));
  std::vector<double> x(featureDim);
  std::vector<uint32_t> order(featureDim);
  for (uint32_t r = 0; r < samplesPerClass; r++) {
    for (uint32_t c = 0; c < numClasses; c++) {
      const double* mu = centers.data() + static_cast<std::size_t>(c) * featureDim;
      for (uint32_t j = 0; j < featureDim; j++) {
        x[j] = mu[j] + (sigma > 0.0 ? sigma * normal(noiseGen) : 0.0);
      }
      std::iota(order.begin(), order.end(), 0u);
      std::nth_element(order.begin(), order.begin() + keep, order.end(),
                       [&x](uint32_t a, uint32_t b) {
                         const double ma = std::abs(x[a]);
                         const double mb = std::abs(x[b]);
                         return ma != mb ? ma > mb : a < b;
                       });
      std::sort(order.begin(), order.begin() + keep);
      std::vector<uint32_t> idx(order.begin(), order.begin() + keep);
      std::vector<double> val(keep);
      for (uint32_t k = 0; k < keep; k++) {
        val[k] = x[idx[k]];
      }
      data.examples.push_back(
          {{c}, SparseVector::fromSortedUnchecked(featureDim, std::move(idx), std::move(val))});
    }
  }
  return data;
}

}  // namespace bolt

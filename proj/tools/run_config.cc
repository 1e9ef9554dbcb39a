#include "run_config.h"

#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace bolt::cli {

namespace {

constexpr std::array<ConfigKey, 23> kKeys = {{
    {"model.dims", "", "comma-separated layer widths; the last is the label count (required)"},
    {"model.sparsities", "1,...", "per-layer fraction of neurons evaluated, in (0, 1]"},
    {"model.activations", "relu,...,softmax", "per-layer activation: relu, identity, softmax"},
    {"model.c1", "1", "autotuner safety factor c1 > 0"},
    {"model.c2", "0.1", "autotuner cost budget, 0 < c2 < 1"},
    {"model.lmax", "256", "autotuner cap on the number of hash tables"},
    {"train.batch_size", "256", "samples per optimizer step"},
    {"train.epochs", "1", "passes over the training set"},
    {"train.lr", "0.001", "Adam learning rate"},
    {"train.rebuild_interval", "50", "batches between hash index rebuilds"},
    {"train.aln", "true", "insert missed labels into the selected hash buckets"},
    {"train.inference_sparsity", "", "output-layer sparsity for sparse inference (default: training sparsity)"},
    {"train.seed", "0", "seed for initialization, hashing and shuffling"},
    {"train.deterministic", "true", "fixed gradient reduction order"},
    {"train.workers", "1", "worker threads"},
    {"data.train", "", "training set in XC format (required)"},
    {"data.test", "", "held-out set in XC format (bench uses it for p@1)"},
    {"data.index_base", "0", "0 or 1; ids in the data files start here"},
    {"output.model", "", "model file written by train (required for train)"},
    {"output.report", "", "file receiving the per-batch JSON-lines report"},
    {"bench.checkpoints_per_epoch", "2", "p@1 measurements per epoch, at least 2"},
    {"bench.mode", "dense", "inference mode for bench p@1: dense or sparse"},
    {"bench.output", "", "file receiving the bench CSV in addition to stdout"},
}};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> splitList(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(trim(item));
  }
  return out;
}

template <typename T>
T parseNumber(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    throw ConfigError(key + ": cannot parse \"" + value + "\" as a number");
  }
  return out;
}

bool parseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true or false, got \"" + value + "\"");
}

bool isKnown(std::string_view key) {
  for (const auto& k : kKeys) {
    if (k.name == key) return true;
  }
  return false;
}

}  // namespace

std::span<const ConfigKey> configKeys() { return kKeys; }

std::string describeConfigKeys() {
  std::ostringstream out;
  out << "Config keys (key = value, one per line, '#' comments):\n";
  auto row = [&out](const ConfigKey& k) {
    out << "  " << k.name;
    for (std::size_t pad = k.name.size(); pad < 30; pad++) out << ' ';
    out << k.help;
    if (!k.defaultValue.empty()) out << " [" << k.defaultValue << "]";
    out << '\n';
  };
  for (const auto& k : kKeys) row(k);
  return out.str();
}

ModelSpec RunConfig::modelSpec(uint32_t inputDim) const {
  ModelSpec spec;
  spec.inputDim = inputDim;
  spec.layers = layers;
  spec.autotune = autotune;
  spec.seed = train.seed;
  return spec;
}

RunConfig parseRunConfig(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string raw;
  std::size_t lineNo = 0;
  while (std::getline(in, raw)) {
    lineNo++;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineNo) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!isKnown(key)) {
      throw ConfigError("config line " + std::to_string(lineNo) + ": unknown key \"" + key + "\"");
    }
    if (!kv.emplace(key, value).second) {
      throw ConfigError("config line " + std::to_string(lineNo) + ": duplicate key \"" + key + "\"");
    }
  }

  auto get = [&kv](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };

  RunConfig cfg;

  const std::string* dims = get("model.dims");
  if (!dims || dims->empty()) {
    throw ConfigError("model.dims is required");
  }
  for (const auto& d : splitList(*dims)) {
    LayerSpec ls;
    ls.dim = parseNumber<uint32_t>("model.dims", d);
    if (ls.dim == 0) {
      throw ConfigError("model.dims: layer widths must be positive");
    }
    cfg.layers.push_back(ls);
  }
  const std::size_t n = cfg.layers.size();
  for (std::size_t l = 0; l < n; l++) {
    cfg.layers[l].activation = l + 1 == n ? Activation::Softmax : Activation::ReLU;
  }
  if (const auto* v = get("model.sparsities")) {
    const auto items = splitList(*v);
    if (items.size() != n) {
      throw ConfigError("model.sparsities needs one value per layer");
    }
    for (std::size_t l = 0; l < n; l++) {
      const double s = parseNumber<double>("model.sparsities", items[l]);
      if (!(s > 0.0 && s <= 1.0)) {
        throw ConfigError("model.sparsities: values must lie in (0, 1]");
      }
      cfg.layers[l].sparsity = s;
    }
  }
  if (const auto* v = get("model.activations")) {
    const auto items = splitList(*v);
    if (items.size() != n) {
      throw ConfigError("model.activations needs one value per layer");
    }
    for (std::size_t l = 0; l < n; l++) {
      try {
        cfg.layers[l].activation = parseActivation(items[l]);
      } catch (const ContractError& e) {
        throw ConfigError(std::string("model.activations: ") + e.what());
      }
    }
  }
  if (cfg.layers.back().activation != Activation::Softmax) {
    throw ConfigError("model.activations: the output layer must be softmax");
  }

  if (const auto* v = get("model.c1")) cfg.autotune.c1 = parseNumber<double>("model.c1", *v);
  if (const auto* v = get("model.c2")) cfg.autotune.c2 = parseNumber<double>("model.c2", *v);
  if (const auto* v = get("model.lmax")) cfg.autotune.lMax = parseNumber<uint32_t>("model.lmax", *v);
  if (!(cfg.autotune.c1 > 0.0) || !(cfg.autotune.c2 > 0.0 && cfg.autotune.c2 < 1.0) ||
      cfg.autotune.lMax < 1) {
    throw ConfigError("autotuner needs c1 > 0, 0 < c2 < 1, lmax >= 1");
  }
  // Surface infeasible sparsities now rather than after loading data. The
  // previous-layer width does not enter the budget.
  for (const auto& ls : cfg.layers) {
    if (ls.sparsity < 1.0) {
      try {
        (void)autotune(ls.dim, 1, ls.sparsity, cfg.autotune);
      } catch (const InfeasibleSparsity& e) {
        throw ConfigError(e.what());
      } catch (const ContractError& e) {
        throw ConfigError(e.what());
      }
    }
  }

  TrainConfig& t = cfg.train;
  if (const auto* v = get("train.batch_size")) t.batchSize = parseNumber<uint32_t>("train.batch_size", *v);
  if (const auto* v = get("train.epochs")) t.epochs = parseNumber<uint32_t>("train.epochs", *v);
  if (const auto* v = get("train.lr")) t.lr = parseNumber<double>("train.lr", *v);
  if (const auto* v = get("train.rebuild_interval")) {
    t.rebuildInterval = parseNumber<uint32_t>("train.rebuild_interval", *v);
  }
  if (const auto* v = get("train.aln")) t.alnEnabled = parseBool("train.aln", *v);
  if (const auto* v = get("train.inference_sparsity")) {
    const double s = parseNumber<double>("train.inference_sparsity", *v);
    if (!(s > 0.0 && s <= 1.0)) {
      throw ConfigError("train.inference_sparsity must lie in (0, 1]");
    }
    t.inferenceSparsity = s;
  }
  if (const auto* v = get("train.seed")) t.seed = parseNumber<uint64_t>("train.seed", *v);
  if (const auto* v = get("train.deterministic")) t.deterministic = parseBool("train.deterministic", *v);
  if (const auto* v = get("train.workers")) t.workers = parseNumber<uint32_t>("train.workers", *v);
  if (t.batchSize < 1 || t.rebuildInterval < 1 || t.workers < 1 || !(t.lr > 0.0)) {
    throw ConfigError("train.batch_size, train.rebuild_interval and train.workers must be >= 1 and train.lr > 0");
  }

  const std::string* trainPath = get("data.train");
  if (!trainPath || trainPath->empty()) {
    throw ConfigError("data.train is required");
  }
  cfg.trainPath = *trainPath;
  if (const auto* v = get("data.test")) cfg.testPath = *v;
  if (const auto* v = get("data.index_base")) {
    cfg.indexBase = parseNumber<uint32_t>("data.index_base", *v);
    if (cfg.indexBase > 1) {
      throw ConfigError("data.index_base must be 0 or 1");
    }
  }

  if (const auto* v = get("output.model")) cfg.modelPath = *v;
  if (const auto* v = get("output.report")) cfg.reportPath = *v;

  if (const auto* v = get("bench.checkpoints_per_epoch")) {
    cfg.checkpointsPerEpoch = parseNumber<uint32_t>("bench.checkpoints_per_epoch", *v);
    if (cfg.checkpointsPerEpoch < 2) {
      throw ConfigError("bench.checkpoints_per_epoch must be >= 2");
    }
  }
  if (const auto* v = get("bench.mode")) {
    if (*v == "dense") {
      cfg.benchMode = InferenceMode::Dense;
    } else if (*v == "sparse") {
      cfg.benchMode = InferenceMode::Sparse;
    } else {
      throw ConfigError("bench.mode must be dense or sparse");
    }
  }
  if (const auto* v = get("bench.output")) cfg.benchOutput = *v;
  return cfg;
}

RunConfig loadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config " + path);
  }
  return parseRunConfig(in);
}

}  // namespace bolt::cli

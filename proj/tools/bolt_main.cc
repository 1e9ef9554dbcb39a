#include "run_config.h"

#include <bolt/autotune.h>
#include <bolt/dataset.h>
#include <bolt/error.h>
#include <bolt/model.h>
#include <bolt/trainer.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace bolt;
using bolt::cli::ConfigError;
using bolt::cli::RunConfig;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitIo = 4;

// Writes `body` to path via a sibling temp file, so a failure leaves no
// partial file behind.
void writeAtomically(const fs::path& path, const std::string& body) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot write " + tmp.string());
    }
    out << body;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

std::string modeName(InferenceMode m) { return m == InferenceMode::Dense ? "dense" : "sparse"; }

Model buildModel(const RunConfig& cfg, const XcDataset& data) {
  try {
    return Model(cfg.modelSpec(data.numFeatures));
  } catch (const InfeasibleSparsity& e) {
    throw ConfigError(e.what());
  }
}

int cmdTrain(const std::string& configPath) {
  const RunConfig cfg = cli::loadRunConfig(configPath);
  if (cfg.modelPath.empty()) {
    throw ConfigError("output.model is required for train");
  }
  const XcDataset data = loadXcFile(cfg.trainPath, cfg.indexBase);
  Model model = buildModel(cfg, data);
  validateDataset(model, data);

  std::ostringstream report;
  Trainer trainer(model, cfg.train);
  trainer.train(data, [&report](const BatchRecord& r) {
    nlohmann::json j = {{"epoch", r.epoch}, {"batch", r.batch}, {"loss", r.loss},
                        {"p_at_1", r.pAt1}, {"seconds", r.seconds}};
    const std::string line = j.dump();
    std::cout << line << '\n';
    report << line << '\n';
  });
  std::cout.flush();

  model.saveFile(cfg.modelPath);
  if (!cfg.reportPath.empty()) {
    try {
      writeAtomically(cfg.reportPath, report.str());
    } catch (...) {
      std::error_code ec;
      fs::remove(cfg.modelPath, ec);
      throw;
    }
  }
  return 0;
}

int cmdBench(const std::string& configPath) {
  const RunConfig cfg = cli::loadRunConfig(configPath);
  if (cfg.testPath.empty()) {
    throw ConfigError("data.test is required for bench");
  }
  const XcDataset trainData = loadXcFile(cfg.trainPath, cfg.indexBase);
  const XcDataset testData = loadXcFile(cfg.testPath, cfg.indexBase);
  Model model = buildModel(cfg, trainData);
  validateDataset(model, trainData);
  validateDataset(model, testData);

  const auto points = benchmark(model, trainData, testData, cfg.train,
                                cfg.checkpointsPerEpoch, cfg.benchMode);
  std::ostringstream csv;
  csv << "seconds,p_at_1\n";
  for (const auto& p : points) {
    csv << p.seconds << ',' << p.pAt1 << '\n';
  }
  std::cout << csv.str();
  if (!cfg.benchOutput.empty()) {
    writeAtomically(cfg.benchOutput, csv.str());
  }
  return 0;
}

struct EvalArgs {
  std::string modelPath;
  std::string dataPath;
  std::size_t k = 1;
  std::string mode = "dense";
  std::optional<double> inferenceSparsity;
  uint32_t indexBase = 0;
  uint32_t workers = 1;
};

int cmdEval(const EvalArgs& a) {
  const Model model = Model::loadFile(a.modelPath);
  const XcDataset data = loadXcFile(a.dataPath, a.indexBase);
  validateDataset(model, data);
  std::vector<InferenceMode> modes;
  if (a.mode == "dense" || a.mode == "both") modes.push_back(InferenceMode::Dense);
  if (a.mode == "sparse" || a.mode == "both") modes.push_back(InferenceMode::Sparse);
  for (InferenceMode m : modes) {
    const EvalResult r = evaluate(model, data, a.k, m, a.inferenceSparsity, a.workers);
    std::printf("p@%zu=%.6f latency_ms=%.6f mode=%s\n", a.k, r.precisionAtK,
                r.meanLatencyMs, modeName(m).c_str());
  }
  return 0;
}

struct PredictArgs {
  std::string modelPath;
  std::string dataPath;
  std::size_t top = 5;
  std::string mode = "dense";
  std::optional<double> inferenceSparsity;
  uint32_t indexBase = 0;
};

int cmdPredict(const PredictArgs& a) {
  const Model model = Model::loadFile(a.modelPath);
  const XcDataset data = loadXcFile(a.dataPath, a.indexBase);
  validateDataset(model, data);
  const InferenceMode m = a.mode == "sparse" ? InferenceMode::Sparse : InferenceMode::Dense;
  std::string out;
  for (const auto& ex : data.examples) {
    const auto ranking = predict(model, ex.features, m, a.inferenceSparsity, a.top);
    for (std::size_t i = 0; i < ranking.size(); i++) {
      if (i > 0) out += ' ';
      out += std::to_string(ranking[i] + a.indexBase);
    }
    out += '\n';
  }
  std::cout << out;
  return 0;
}

struct AutotuneArgs {
  uint32_t dim = 0;
  uint32_t prevDim = 0;
  double sparsity = 0.0;
  AutotuneConfig cfg;
};

int cmdAutotune(const AutotuneArgs& a) {
  AutotunePlan plan;
  try {
    plan = autotune(a.dim, a.prevDim, a.sparsity, a.cfg);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  std::printf("K=%u\nL=%u\nR=%u\ncost_ratio=%.6f\n", plan.kBits, plan.numTables,
              plan.bucketCap, planCostRatio(plan));
  return 0;
}

struct SynthArgs {
  uint32_t classes = 100;
  uint32_t perClass = 10;
  uint32_t dim = 512;
  double noise = 0.1;
  uint64_t seed = 0;
  std::string out;
};

int cmdSynth(const SynthArgs& a) {
  XcDataset data;
  try {
    data = synthClustered(a.classes, a.perClass, a.dim, a.noise, a.seed);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  std::ostringstream body;
  writeXc(data, body);
  writeAtomically(a.out, body.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hash-sampled sparse training for extreme classification"};
  app.require_subcommand(1);
  app.footer(cli::describeConfigKeys());

  std::string configPath;
  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("config", configPath, "config file")->required();
  train->footer(cli::describeConfigKeys());

  auto* bench = app.add_subcommand("bench", "train while recording (seconds, p@1) as CSV");
  bench->add_option("config", configPath, "config file")->required();
  bench->footer(cli::describeConfigKeys());

  EvalArgs ev;
  double evalInfS = 0.0;
  auto* eval = app.add_subcommand("eval", "precision@k and mean single-sample latency");
  eval->add_option("--model", ev.modelPath, "model file")->required();
  eval->add_option("--data", ev.dataPath, "dataset in XC format")->required();
  eval->add_option("--k", ev.k, "k in precision@k")->check(CLI::PositiveNumber);
  eval->add_option("--mode", ev.mode, "dense, sparse or both")
      ->check(CLI::IsMember({"dense", "sparse", "both"}));
  auto* evalInfOpt = eval->add_option("--inference-sparsity", evalInfS,
                                      "output-layer sparsity for sparse mode")
                         ->check(CLI::Range(0.0, 1.0));
  eval->add_option("--index-base", ev.indexBase, "0 or 1")->check(CLI::Range(0, 1));
  eval->add_option("--workers", ev.workers, "threads for the untimed remainder")
      ->check(CLI::PositiveNumber);

  PredictArgs pr;
  double predInfS = 0.0;
  auto* pred = app.add_subcommand("predict", "top-ranked labels for each example, one line each");
  pred->add_option("--model", pr.modelPath, "model file")->required();
  pred->add_option("--data", pr.dataPath, "dataset in XC format")->required();
  pred->add_option("--top", pr.top, "labels per line");
  pred->add_option("--mode", pr.mode, "dense or sparse")->check(CLI::IsMember({"dense", "sparse"}));
  auto* predInfOpt = pred->add_option("--inference-sparsity", predInfS,
                                      "output-layer sparsity for sparse mode")
                         ->check(CLI::Range(0.0, 1.0));
  pred->add_option("--index-base", pr.indexBase, "0 or 1")->check(CLI::Range(0, 1));

  AutotuneArgs at;
  auto* tune = app.add_subcommand("autotune", "hash index shape for one sparse layer");
  tune->add_option("--dim", at.dim, "layer width")->required();
  tune->add_option("--prev-dim", at.prevDim, "input width")->required();
  tune->add_option("--sparsity", at.sparsity, "fraction of neurons evaluated")->required();
  tune->add_option("--c1", at.cfg.c1, "retrieval safety factor");
  tune->add_option("--c2", at.cfg.c2, "cost budget");
  tune->add_option("--lmax", at.cfg.lMax, "maximum number of tables");

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "write a clustered synthetic dataset");
  synth->add_option("--classes", sy.classes, "number of classes");
  synth->add_option("--per-class", sy.perClass, "samples per class");
  synth->add_option("--dim", sy.dim, "feature dimension");
  synth->add_option("--noise", sy.noise, "expected noise norm");
  synth->add_option("--seed", sy.seed, "seed");
  synth->add_option("--out", sy.out, "output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train) return cmdTrain(configPath);
    if (*bench) return cmdBench(configPath);
    if (*eval) {
      if (*evalInfOpt) ev.inferenceSparsity = evalInfS;
      return cmdEval(ev);
    }
    if (*pred) {
      if (*predInfOpt) pr.inferenceSparsity = predInfS;
      return cmdPredict(pr);
    }
    if (*tune) return cmdAutotune(at);
    if (*synth) return cmdSynth(sy);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InfeasibleSparsity& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

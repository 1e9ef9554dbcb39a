#pragma once

#include <bolt/autotune.h>
#include <bolt/error.h>
#include <bolt/layer.h>
#include <bolt/model.h>
#include <bolt/trainer.h>

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace bolt::cli {

// Bad or unknown configuration key, or a value that fails validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ConfigKey {
  std::string_view name;
  std::string_view defaultValue;  // empty: required or unset
  std::string_view help;
};

// Every accepted key, in documentation order.
std::span<const ConfigKey> configKeys();

// Human-readable listing of configKeys() for --help.
std::string describeConfigKeys();

struct RunConfig {
  std::vector<LayerSpec> layers;
  AutotuneConfig autotune;
  TrainConfig train;

  std::string trainPath;
  std::string testPath;
  uint32_t indexBase = 0;

  std::string modelPath;
  std::string reportPath;

  uint32_t checkpointsPerEpoch = 2;
  InferenceMode benchMode = InferenceMode::Dense;
  std::string benchOutput;

  ModelSpec modelSpec(uint32_t inputDim) const;
};

// Flat "key = value" lines; '#' starts a comment. Unknown keys, duplicate
// keys, malformed values and infeasible sparsities throw ConfigError.
RunConfig parseRunConfig(std::istream& in);
RunConfig loadRunConfig(const std::string& path);

}  // namespace bolt::cli

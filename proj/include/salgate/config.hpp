#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "salgate/data.hpp"
#include "salgate/detector.hpp"
#include "salgate/eval.hpp"
#include "salgate/hybrid.hpp"
#include "salgate/obfuscate.hpp"
#include "salgate/saliency_gate.hpp"
#include "salgate/saliency_model.hpp"
#include "salgate/train.hpp"

namespace salgate {

struct DataSplitConfig {
  double train_fraction = 0.8;
  uint64_t split_seed = 0;
};

/// Every tunable of the pipeline. Precedence: built-in defaults, then the
/// config file, then `section.key=value` overrides.
struct RunConfig {
  DetectorConfig detector;
  SaliencyNetConfig saliency;
  FusionConfig fusion;
  GateConfig gate;
  EvalConfig eval;
  SyntheticSceneConfig synthetic;
  DataSplitConfig split;
  ObfuscationConfig obfuscation;
  TrainOptions train;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

/// Defaults merged with an optional JSON file and dotted overrides such as
/// "detector.input_size=128" (values parse as JSON, falling back to strings).
RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::string>& overrides = {});

nlohmann::json detector_config_json(const DetectorConfig& c);
DetectorConfig detector_config_from_json(const nlohmann::json& j);
nlohmann::json saliency_config_json(const SaliencyNetConfig& c);
SaliencyNetConfig saliency_config_from_json(const nlohmann::json& j);
nlohmann::json fusion_config_json(const FusionConfig& c);
FusionConfig fusion_config_from_json(const nlohmann::json& j);

}  // namespace salgate

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "inkless/dataset/dataset.hpp"
#include "inkless/eval/classifier.hpp"
#include "inkless/eval/gradient.hpp"
#include "inkless/eval/nuclei.hpp"
#include "inkless/model/networks.hpp"
#include "inkless/segment/ink_segmentation.hpp"
#include "inkless/training/trainer.hpp"

namespace inkless::cli {

struct SegmentSettings {
  segment::InkThresholds thresholds;
  int downsample = 8;
};

struct RestoreSettings {
  int tile = 128;
  int stride = 100;
  int batch = 32;
};

struct EvaluationSettings {
  eval::ClassifierConfig classifier;
  eval::NucleiConfig nuclei;
  eval::GradientMode gradient_mode = eval::GradientMode::Luminance;
  double tissue_threshold = 0.05;  // patches below count as background and are skipped
};

struct BlindtestSettings {
  int n = 100;
  int patch_size = 500;
  std::string host = "127.0.0.1";
  int port = 8080;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  int jobs = 1;
  SegmentSettings ink;
  dataset::SamplerConfig sampler;
  model::ModelConfig model;
  training::TrainConfig training;
  RestoreSettings restore;
  EvaluationSettings evaluation;
  BlindtestSettings blindtest;

  // Copies the global seed and jobs into the module configs.
  void propagate();
  void validate() const;  // throws ConfigError
};

nlohmann::json to_json(const PipelineConfig& config);
// Sections and keys not present keep their defaults; unknown keys are a ConfigError.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);
// Pretty-printed defaults, as written by --config-dump.
std::string dump_config(const PipelineConfig& config);

}  // namespace inkless::cli

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "inkless/core/raster.hpp"
#include "inkless/eval/fooling.hpp"

namespace inkless::eval {

struct ClassifierConfig {
  int depth = 18;         // 18, 34 or 50
  int width = 64;         // channels of the stem; stages use width, 2w, 4w, 8w
  int epochs = 100;
  int batch_size = 128;
  double lr = 1e-4;
  int input_size = 128;   // patches are resized to this side
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
  static ClassifierConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

// Residual network with basic blocks (18, 34) or bottleneck blocks (50) and a
// single logit output; positive means clean.
class ResNetImpl : public torch::nn::Module {
 public:
  ResNetImpl(int depth, int width);
  torch::Tensor forward(torch::Tensor x);

 private:
  torch::nn::Sequential stem_{nullptr};
  torch::nn::Sequential stages_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(ResNet);

class TorchPatchClassifier final : public PatchClassifier {
 public:
  TorchPatchClassifier(ClassifierConfig config, ResNet net);
  std::vector<bool> classify_clean(const std::vector<RasterImage>& patches) const override;
  // Sigmoid outputs (probability of clean).
  std::vector<double> clean_probability(const std::vector<RasterImage>& patches) const;

  const ClassifierConfig& config() const noexcept { return config_; }
  ResNet net() const { return net_; }

  void save(const std::filesystem::path& path, double holdout_accuracy) const;
  // Throws CheckpointError on a wrong kind, version or shape.
  static TorchPatchClassifier load(const std::filesystem::path& path);

 private:
  ClassifierConfig config_;
  mutable ResNet net_;
};

struct TrainedClassifier {
  TorchPatchClassifier classifier;
  double holdout_accuracy = 0;
  std::size_t holdout_size = 0;
};

// Trains marker (label 0) vs clean (label 1) with Adam on a stratified split;
// throws DataError when either pool is empty.
TrainedClassifier train_classifier(const std::vector<RasterImage>& marker,
                                   const std::vector<RasterImage>& clean, const ClassifierConfig& config);

}  // namespace inkless::eval

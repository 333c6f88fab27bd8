#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

namespace inkless::model {

// Architecture and loss settings for the marker-removal GAN. Tensors are
// NCHW with values in [-1, 1].
struct ModelConfig {
  int gen_filters = 64;      // maps of the first 7x7 conv; doubled by each downsampling stage
  int residual_blocks = 6;
  int disc_filters = 64;
  int disc_layers = 3;       // stride-2 stages of the patch discriminator
  double lambda_cycle = 10.0;
  bool full_cyclegan = false;  // adds a marker-domain critic and the clean->marker->clean cycle
  double init_std = 0.02;

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(ResidualBlock);

// 7x7 conv -> two stride-2 convs -> residual blocks -> two stride-2
// transposed convs -> 7x7 conv -> tanh, instance-normalized throughout.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const ModelConfig& config);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential net_{nullptr};
};
TORCH_MODULE(Generator);

// Patch discriminator: stride-2 4x4 convs, one stride-1 stage, 1-map output.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const ModelConfig& config);
  torch::Tensor forward(const torch::Tensor& x);
  int stride2_layers() const noexcept { return layers_; }

 private:
  torch::nn::Sequential net_{nullptr};
  int layers_ = 3;
};
TORCH_MODULE(Discriminator);

// Output grid side for an input side, from the stride schedule.
int discriminator_grid_side(int input_side, int disc_layers);
// Smallest input side for which every normalized stage keeps > 1 spatial cell.
int discriminator_min_side(int disc_layers);
// Smallest generator input side (the residual bottleneck needs >= 2 cells).
inline constexpr int kGeneratorMinSide = 8;

// Shape-checked forward passes; throw ShapeError.
torch::Tensor generator_forward(Generator& g, const torch::Tensor& batch);
torch::Tensor discriminator_forward(Discriminator& d, const torch::Tensor& batch);

// Zero-mean Gaussian weights (std) and zero biases for conv layers.
void init_weights(torch::nn::Module& module, double stddev);

// Parameters of the two generators and critic(s).
struct ModelBundle {
  ModelConfig config;
  Generator remover{nullptr};   // marker -> clean
  Generator adder{nullptr};     // clean -> marker
  Discriminator clean_critic{nullptr};
  Discriminator marker_critic{nullptr};  // only with full_cyclegan

  ModelBundle() = default;
  ModelBundle(const ModelConfig& config, std::uint64_t seed);

  std::vector<torch::Tensor> generator_parameters() const;
  std::vector<torch::Tensor> discriminator_parameters() const;
  void to(torch::Dtype dtype);
  void train(bool on);
};

}  // namespace inkless::model

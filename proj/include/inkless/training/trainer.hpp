#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "inkless/core/raster.hpp"
#include "inkless/model/networks.hpp"

namespace inkless::training {

enum class OptimizerKind { Adam, Sgd };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& text);  // throws ConfigError

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 2e-4;
  double beta1 = 0.5;       // Adam only
  double beta2 = 0.999;     // Adam only
  double momentum = 0.0;    // SGD only

  nlohmann::json to_json() const;
  static OptimizerConfig from_json(const nlohmann::json& j);
  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct TrainConfig {
  int epochs = 150;
  int batch_size = 64;
  OptimizerConfig gen_optimizer{OptimizerKind::Adam, 2e-4, 0.5, 0.999, 0.0};
  OptimizerConfig disc_optimizer{OptimizerKind::Sgd, 1e-4, 0.5, 0.999, 0.0};
  std::string lr_decay = "none";  // the only supported schedule
  bool flips = true;
  std::uint64_t seed = 0;
  int checkpoint_every = 10;      // epochs; 0 disables intermediate checkpoints
  int history_size = 0;           // past-fake buffer for critic updates; 0 = off
  bool deterministic = true;      // single intra-op thread

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Equally sized RGB patches held as one N x H x W x 3 byte tensor.
class PatchPool {
 public:
  PatchPool() = default;
  explicit PatchPool(const std::vector<RasterImage>& patches);
  static PatchPool from_directory(const std::filesystem::path& dir);  // *.png, sorted

  std::int64_t size() const noexcept { return bytes_.defined() ? bytes_.size(0) : 0; }
  int side() const noexcept { return bytes_.defined() ? static_cast<int>(bytes_.size(1)) : 0; }
  // Gathers rows, mirrors per the flip codes (bit 0 horizontal, bit 1 vertical)
  // and maps to N x 3 x H x W in [-1, 1].
  torch::Tensor batch(const std::vector<std::int64_t>& rows, const std::vector<int>& flips,
                      torch::Dtype dtype) const;

 private:
  torch::Tensor bytes_;
};

struct LossRecord {
  std::int64_t step = 0;
  double loss_d = 0;
  double loss_g_adv = 0;
  double loss_cyc = 0;
  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

void write_loss_csv(const std::vector<LossRecord>& log, const std::filesystem::path& path);
std::vector<LossRecord> read_loss_csv(const std::filesystem::path& path);

class Trainer {
 public:
  // Throws DataError on an empty pool and ShapeError on mismatched patch sizes.
  Trainer(model::ModelBundle bundle, TrainConfig config, PatchPool marker, PatchPool clean);
  ~Trainer();
  Trainer(Trainer&&) noexcept;
  Trainer& operator=(Trainer&&) noexcept;

  // Restores parameters, optimizer state, step counter and loss log. Throws
  // CheckpointError on a version or architecture mismatch.
  static Trainer resume(const std::filesystem::path& checkpoint, TrainConfig config, PatchPool marker,
                        PatchPool clean, const model::ModelConfig* expected = nullptr);

  std::int64_t steps_per_epoch() const noexcept;
  std::int64_t total_steps() const noexcept;
  std::int64_t step() const noexcept;
  bool finished() const noexcept { return step() >= total_steps(); }

  // One generator update then one critic update. A non-finite loss writes
  // `diagnostic.pt` into the output directory (if set) and throws TrainingDiverged.
  LossRecord train_step();
  // Trains until `stop_step` (or the end of the schedule), writing scheduled
  // checkpoints, final.pt and loss_log.csv into the output directory if set.
  void run(std::optional<std::int64_t> stop_step = std::nullopt);

  void set_output_dir(std::filesystem::path dir);
  void save_checkpoint(const std::filesystem::path& path) const;

  const model::ModelBundle& bundle() const;
  const TrainConfig& config() const;
  const std::vector<LossRecord>& log() const;
  torch::optim::Optimizer& gen_optimizer();
  torch::optim::Optimizer& disc_optimizer();

 private:
  struct State;
  explicit Trainer(std::unique_ptr<State> state);
  std::unique_ptr<State> state_;
};

// Learning rates stored in a training checkpoint: (generators, critics).
std::pair<double, double> checkpoint_learning_rates(const std::filesystem::path& checkpoint);

}  // namespace inkless::training

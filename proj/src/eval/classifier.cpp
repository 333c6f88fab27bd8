#include "inkless/eval/classifier.hpp"

#include <numeric>
#include <sstream>

#include "inkless/core/error.hpp"
#include "inkless/core/log.hpp"
#include "inkless/core/rng.hpp"
#include "inkless/model/checkpoint.hpp"
#include "inkless/model/tensor_io.hpp"

namespace inkless::eval {

namespace nn = torch::nn;
namespace fs = std::filesystem;

namespace {

constexpr const char* kClassifierKind = "classifier";
constexpr std::uint64_t kSplitStream = 0x53504c54ULL;
constexpr std::uint64_t kOrderStream = 0x4f524452ULL;

nn::Conv2d conv(int in, int out, int k, int stride) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(k / 2).bias(false));
}

class BlockImpl : public nn::Module {
 public:
  BlockImpl(int in, int planes, int stride, bool bottleneck) {
    const int out = bottleneck ? planes * 4 : planes;
    if (bottleneck) {
      body_ = nn::Sequential(conv(in, planes, 1, 1), nn::BatchNorm2d(planes), nn::ReLU(),
                             conv(planes, planes, 3, stride), nn::BatchNorm2d(planes), nn::ReLU(),
                             conv(planes, out, 1, 1), nn::BatchNorm2d(out));
    } else {
      body_ = nn::Sequential(conv(in, planes, 3, stride), nn::BatchNorm2d(planes), nn::ReLU(),
                             conv(planes, planes, 3, 1), nn::BatchNorm2d(planes));
    }
    register_module("body", body_);
    if (stride != 1 || in != out) {
      shortcut_ = nn::Sequential(conv(in, out, 1, stride), nn::BatchNorm2d(out));
      register_module("shortcut", shortcut_);
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto skip = shortcut_ ? shortcut_->forward(x) : x;
    return torch::relu(body_->forward(x) + skip);
  }

 private:
  nn::Sequential body_{nullptr};
  nn::Sequential shortcut_{nullptr};
};
TORCH_MODULE(Block);

std::vector<int> blocks_for(int depth) {
  switch (depth) {
    case 18: return {2, 2, 2, 2};
    case 34: return {3, 4, 6, 3};
    case 50: return {3, 4, 6, 3};
    default: throw ConfigError("unsupported classifier depth " + std::to_string(depth) + " (18, 34 or 50)");
  }
}

torch::Tensor prepare(const std::vector<RasterImage>& patches, int input_size) {
  auto batch = model::images_to_tensor(patches);
  if (batch.size(2) != input_size || batch.size(3) != input_size) {
    batch = nn::functional::interpolate(
        batch, nn::functional::InterpolateFuncOptions()
                   .size(std::vector<int64_t>{input_size, input_size})
                   .mode(torch::kArea));
  }
  return batch;
}

}  // namespace

void ClassifierConfig::validate() const {
  blocks_for(depth);
  if (width < 1) throw ConfigError("classifier width must be >= 1");
  if (epochs < 1) throw ConfigError("classifier epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("classifier batch_size must be >= 1");
  if (!(lr > 0)) throw ConfigError("classifier lr must be > 0");
  if (input_size < 32) throw ConfigError("classifier input_size must be >= 32");
  if (!(holdout_fraction > 0 && holdout_fraction < 1)) throw ConfigError("holdout_fraction must lie in (0, 1)");
}

nlohmann::json ClassifierConfig::to_json() const {
  return {{"depth", depth},       {"width", width},           {"epochs", epochs},
          {"batch_size", batch_size}, {"lr", lr},             {"input_size", input_size},
          {"holdout_fraction", holdout_fraction}, {"seed", seed}};
}

ClassifierConfig ClassifierConfig::from_json(const nlohmann::json& j) {
  ClassifierConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k == "depth") c.depth = it->get<int>();
    else if (k == "width") c.width = it->get<int>();
    else if (k == "epochs") c.epochs = it->get<int>();
    else if (k == "batch_size") c.batch_size = it->get<int>();
    else if (k == "lr") c.lr = it->get<double>();
    else if (k == "input_size") c.input_size = it->get<int>();
    else if (k == "holdout_fraction") c.holdout_fraction = it->get<double>();
    else if (k == "seed") c.seed = it->get<std::uint64_t>();
    else throw ConfigError("unknown classifier key '" + k + "'");
  }
  c.validate();
  return c;
}

ResNetImpl::ResNetImpl(int depth, int width) {
  const auto counts = blocks_for(depth);
  const bool bottleneck = depth >= 50;
  stem_ = nn::Sequential(conv(3, width, 7, 2), nn::BatchNorm2d(width), nn::ReLU(),
                         nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1)));
  stages_ = nn::Sequential();
  int in = width;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    const int planes = width << s;
    for (int b = 0; b < counts[s]; ++b) {
      const int stride = (s > 0 && b == 0) ? 2 : 1;
      stages_->push_back(Block(in, planes, stride, bottleneck));
      in = bottleneck ? planes * 4 : planes;
    }
  }
  head_ = nn::Linear(in, 1);
  register_module("stem", stem_);
  register_module("stages", stages_);
  register_module("head", head_);
}

torch::Tensor ResNetImpl::forward(torch::Tensor x) {
  x = stages_->forward(stem_->forward(x));
  x = torch::adaptive_avg_pool2d(x, {1, 1}).flatten(1);
  return head_->forward(x).squeeze(1);
}

TorchPatchClassifier::TorchPatchClassifier(ClassifierConfig config, ResNet net)
    : config_(std::move(config)), net_(std::move(net)) {}

std::vector<double> TorchPatchClassifier::clean_probability(const std::vector<RasterImage>& patches) const {
  torch::NoGradGuard guard;
  net_->eval();
  std::vector<double> out;
  out.reserve(patches.size());
  const auto step = static_cast<std::size_t>(config_.batch_size);
  for (std::size_t start = 0; start < patches.size(); start += step) {
    const auto end = std::min(patches.size(), start + step);
    std::vector<RasterImage> chunk(patches.begin() + static_cast<std::ptrdiff_t>(start),
                                   patches.begin() + static_cast<std::ptrdiff_t>(end));
    auto p = torch::sigmoid(net_->forward(prepare(chunk, config_.input_size))).to(torch::kFloat64);
    for (long i = 0; i < p.size(0); ++i) out.push_back(p[i].item<double>());
  }
  return out;
}

std::vector<bool> TorchPatchClassifier::classify_clean(const std::vector<RasterImage>& patches) const {
  std::vector<bool> out;
  for (double p : clean_probability(patches)) out.push_back(p >= 0.5);
  return out;
}

void TorchPatchClassifier::save(const fs::path& path, double holdout_accuracy) const {
  torch::serialize::OutputArchive archive;
  nlohmann::json meta{{"classifier", config_.to_json()}, {"holdout_accuracy", holdout_accuracy}};
  model::write_meta(archive, meta, kClassifierKind);
  model::write_module(archive, "resnet", *net_);
  try {
    archive.save_to(path.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot write classifier " + path.string() + ": " + e.what_without_backtrace());
  }
}

TorchPatchClassifier TorchPatchClassifier::load(const fs::path& path) {
  torch::serialize::InputArchive archive;
  model::load_archive(archive, path);
  const auto meta = model::read_meta(archive, kClassifierKind);
  ClassifierConfig config;
  try {
    config = ClassifierConfig::from_json(meta.at("classifier"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("classifier config unreadable: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("classifier config invalid: ") + e.what());
  }
  ResNet net(config.depth, config.width);
  model::read_module(archive, "resnet", *net);
  return TorchPatchClassifier(config, net);
}

TrainedClassifier train_classifier(const std::vector<RasterImage>& marker, const std::vector<RasterImage>& clean,
                                   const ClassifierConfig& config) {
  config.validate();
  if (marker.empty()) throw DataError("classifier training needs marker patches");
  if (clean.empty()) throw DataError("classifier training needs clean patches");

  // Stratified split: the same fraction of each class is held out.
  struct Item {
    const RasterImage* image;
    float label;
  };
  std::vector<Item> train, holdout;
  auto split = [&](const std::vector<RasterImage>& pool, float label, std::uint64_t child) {
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    RngStream(config.seed, kSplitStream).derive(child).shuffle(order);
    const auto n_hold = pool.size() < 2 ? 0
                                        : std::max<std::size_t>(1, static_cast<std::size_t>(
                                                                       pool.size() * config.holdout_fraction));
    for (std::size_t i = 0; i < order.size(); ++i) {
      (i < n_hold ? holdout : train).push_back({&pool[order[i]], label});
    }
  };
  split(marker, 0.0f, 0);
  split(clean, 1.0f, 1);

  torch::manual_seed(config.seed);
  ResNet net(config.depth, config.width);
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(config.lr));

  auto gather = [&](const std::vector<Item>& items, std::size_t begin, std::size_t end,
                    const std::vector<std::size_t>& order) {
    std::vector<RasterImage> images;
    std::vector<float> labels;
    for (std::size_t i = begin; i < end; ++i) {
      images.push_back(*items[order[i]].image);
      labels.push_back(items[order[i]].label);
    }
    return std::make_pair(prepare(images, config.input_size), torch::tensor(labels));
  };

  std::vector<std::size_t> order(train.size());
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    RngStream(config.seed, kOrderStream).derive(static_cast<std::uint64_t>(epoch)).shuffle(order);
    net->train();
    double total = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto end = std::min(order.size(), start + batch);
      if (end - start < 2) continue;  // batch norm needs two samples
      auto [x, y] = gather(train, start, end, order);
      opt.zero_grad();
      auto loss = nn::functional::binary_cross_entropy_with_logits(net->forward(x), y);
      loss.backward();
      opt.step();
      total += loss.item<double>() * static_cast<double>(end - start);
    }
    std::ostringstream msg;
    msg << "classifier epoch " << epoch + 1 << "/" << config.epochs << " loss "
        << total / static_cast<double>(std::max<std::size_t>(1, order.size()));
    log::debug(msg.str());
  }

  TorchPatchClassifier classifier(config, net);
  std::size_t correct = 0;
  if (!holdout.empty()) {
    std::vector<RasterImage> images;
    for (const auto& item : holdout) images.push_back(*item.image);
    const auto decisions = classifier.classify_clean(images);
    for (std::size_t i = 0; i < holdout.size(); ++i) {
      if (decisions[i] == (holdout[i].label > 0.5f)) ++correct;
    }
  }
  const double accuracy = holdout.empty() ? 0.0 : static_cast<double>(correct) / holdout.size();
  return {std::move(classifier), accuracy, holdout.size()};
}

}  // namespace inkless::eval

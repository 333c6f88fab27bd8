#include "inkless/model/networks.hpp"

#include "inkless/core/error.hpp"

namespace inkless::model {

namespace nn = torch::nn;

void ModelConfig::validate() const {
  if (gen_filters < 1 || disc_filters < 1) throw ConfigError("filter counts must be >= 1");
  if (residual_blocks < 0) throw ConfigError("residual_blocks must be >= 0");
  if (disc_layers < 1) throw ConfigError("disc_layers must be >= 1");
  if (!(lambda_cycle >= 0.0)) throw ConfigError("lambda_cycle must be >= 0");
  if (!(init_std > 0.0)) throw ConfigError("init_std must be > 0");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"gen_filters", gen_filters},   {"residual_blocks", residual_blocks},
          {"disc_filters", disc_filters}, {"disc_layers", disc_layers},
          {"lambda_cycle", lambda_cycle}, {"full_cyclegan", full_cyclegan},
          {"init_std", init_std}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k == "gen_filters") c.gen_filters = it->get<int>();
    else if (k == "residual_blocks") c.residual_blocks = it->get<int>();
    else if (k == "disc_filters") c.disc_filters = it->get<int>();
    else if (k == "disc_layers") c.disc_layers = it->get<int>();
    else if (k == "lambda_cycle") c.lambda_cycle = it->get<double>();
    else if (k == "full_cyclegan") c.full_cyclegan = it->get<bool>();
    else if (k == "init_std") c.init_std = it->get<double>();
    else throw ConfigError("unknown model key '" + k + "'");
  }
  c.validate();
  return c;
}

namespace {

nn::Conv2dOptions conv(int in, int out, int k, int stride, int pad, bool bias) {
  return nn::Conv2dOptions(in, out, k).stride(stride).padding(pad).bias(bias);
}

nn::InstanceNorm2d norm(int channels) {
  return nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels).affine(false));
}

int conv_out(int n, int k, int s, int p) {
  const int span = n + 2 * p - k;
  return span < 0 ? 0 : span / s + 1;
}

}  // namespace

ResidualBlockImpl::ResidualBlockImpl(int channels) {
  body_ = register_module(
      "body", nn::Sequential(nn::ReflectionPad2d(1), nn::Conv2d(conv(channels, channels, 3, 1, 0, false)),
                             norm(channels), nn::ReLU(),
                             nn::ReflectionPad2d(1), nn::Conv2d(conv(channels, channels, 3, 1, 0, false)),
                             norm(channels)));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return x + body_->forward(x); }

GeneratorImpl::GeneratorImpl(const ModelConfig& config) {
  const int f = config.gen_filters;
  nn::Sequential net;
  net->push_back(nn::ReflectionPad2d(3));
  net->push_back(nn::Conv2d(conv(3, f, 7, 1, 0, false)));
  net->push_back(norm(f));
  net->push_back(nn::ReLU());
  net->push_back(nn::Conv2d(conv(f, 2 * f, 3, 2, 1, false)));
  net->push_back(norm(2 * f));
  net->push_back(nn::ReLU());
  net->push_back(nn::Conv2d(conv(2 * f, 4 * f, 3, 2, 1, false)));
  net->push_back(norm(4 * f));
  net->push_back(nn::ReLU());
  for (int i = 0; i < config.residual_blocks; ++i) net->push_back(ResidualBlock(4 * f));
  net->push_back(nn::ConvTranspose2d(
      nn::ConvTranspose2dOptions(4 * f, 2 * f, 3).stride(2).padding(1).output_padding(1).bias(false)));
  net->push_back(norm(2 * f));
  net->push_back(nn::ReLU());
  net->push_back(nn::ConvTranspose2d(
      nn::ConvTranspose2dOptions(2 * f, f, 3).stride(2).padding(1).output_padding(1).bias(false)));
  net->push_back(norm(f));
  net->push_back(nn::ReLU());
  net->push_back(nn::ReflectionPad2d(3));
  net->push_back(nn::Conv2d(conv(f, 3, 7, 1, 0, true)));
  net->push_back(nn::Tanh());
  net_ = register_module("net", net);
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x) { return net_->forward(x); }

DiscriminatorImpl::DiscriminatorImpl(const ModelConfig& config) : layers_(config.disc_layers) {
  const int f = config.disc_filters;
  nn::Sequential net;
  net->push_back(nn::Conv2d(conv(3, f, 4, 2, 1, true)));
  net->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
  int mult = 1;
  for (int n = 1; n < config.disc_layers; ++n) {
    const int prev = mult;
    mult = std::min(1 << n, 8);
    net->push_back(nn::Conv2d(conv(f * prev, f * mult, 4, 2, 1, false)));
    net->push_back(norm(f * mult));
    net->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
  }
  const int prev = mult;
  mult = std::min(1 << config.disc_layers, 8);
  net->push_back(nn::Conv2d(conv(f * prev, f * mult, 4, 1, 1, false)));
  net->push_back(norm(f * mult));
  net->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
  net->push_back(nn::Conv2d(conv(f * mult, 1, 4, 1, 1, true)));
  net_ = register_module("net", net);
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& x) { return net_->forward(x); }

int discriminator_grid_side(int input_side, int disc_layers) {
  int n = input_side;
  for (int i = 0; i < disc_layers; ++i) n = conv_out(n, 4, 2, 1);
  n = conv_out(n, 4, 1, 1);
  return conv_out(n, 4, 1, 1);
}

int discriminator_min_side(int disc_layers) {
  for (int side = 1;; ++side) {
    int n = side;
    bool ok = true;
    for (int i = 0; i < disc_layers && ok; ++i) {
      n = conv_out(n, 4, 2, 1);
      // Stages after the first are instance-normalized.
      ok = i == 0 ? n >= 1 : n >= 2;
    }
    if (!ok) continue;
    n = conv_out(n, 4, 1, 1);
    if (n < 2) continue;
    if (conv_out(n, 4, 1, 1) >= 1) return side;
  }
}

namespace {

void check_batch(const torch::Tensor& batch) {
  if (batch.dim() != 4 || batch.size(1) != 3) {
    throw ShapeError("expected an N x 3 x H x W batch");
  }
}

}  // namespace

torch::Tensor generator_forward(Generator& g, const torch::Tensor& batch) {
  check_batch(batch);
  const auto h = batch.size(2), w = batch.size(3);
  if (h % 4 != 0 || w % 4 != 0) throw ShapeError("generator input sides must be divisible by 4");
  if (h < kGeneratorMinSide || w < kGeneratorMinSide) throw ShapeError("generator input too small");
  return g->forward(batch);
}

torch::Tensor discriminator_forward(Discriminator& d, const torch::Tensor& batch) {
  check_batch(batch);
  const int min_side = discriminator_min_side(d->stride2_layers());
  if (batch.size(2) < min_side || batch.size(3) < min_side) {
    throw ShapeError("discriminator input smaller than " + std::to_string(min_side) + " pixels");
  }
  return d->forward(batch);
}

void init_weights(nn::Module& module, double stddev) {
  torch::NoGradGuard guard;
  for (auto& m : module.modules()) {
    if (auto* c = m->as<nn::Conv2d>()) {
      nn::init::normal_(c->weight, 0.0, stddev);
      if (c->bias.defined()) nn::init::zeros_(c->bias);
    } else if (auto* t = m->as<nn::ConvTranspose2d>()) {
      nn::init::normal_(t->weight, 0.0, stddev);
      if (t->bias.defined()) nn::init::zeros_(t->bias);
    }
  }
}

ModelBundle::ModelBundle(const ModelConfig& cfg, std::uint64_t seed) : config(cfg) {
  config.validate();
  torch::manual_seed(seed);
  remover = Generator(config);
  adder = Generator(config);
  clean_critic = Discriminator(config);
  init_weights(*remover, config.init_std);
  init_weights(*adder, config.init_std);
  init_weights(*clean_critic, config.init_std);
  if (config.full_cyclegan) {
    marker_critic = Discriminator(config);
    init_weights(*marker_critic, config.init_std);
  }
}

std::vector<torch::Tensor> ModelBundle::generator_parameters() const {
  auto p = remover->parameters();
  auto q = adder->parameters();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

std::vector<torch::Tensor> ModelBundle::discriminator_parameters() const {
  auto p = clean_critic->parameters();
  if (marker_critic) {
    auto q = marker_critic->parameters();
    p.insert(p.end(), q.begin(), q.end());
  }
  return p;
}

void ModelBundle::to(torch::Dtype dtype) {
  remover->to(dtype);
  adder->to(dtype);
  clean_critic->to(dtype);
  if (marker_critic) marker_critic->to(dtype);
}

void ModelBundle::train(bool on) {
  remover->train(on);
  adder->train(on);
  clean_critic->train(on);
  if (marker_critic) marker_critic->train(on);
}

}  // namespace inkless::model

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <torch/torch.h>

#include "inkless/model/losses.hpp"
#include "inkless/model/networks.hpp"

namespace inkless::test {

struct GradCheckResult {
  int checked = 0;
  double max_rel_error = 0.0;
};

// Central finite differences of the total generator loss (adversarial +
// cycle) against autograd, in float64 on an 8x8 tiny configuration.
inline GradCheckResult generator_gradcheck(std::uint64_t seed, int samples, double h = 1e-6) {
  model::ModelConfig mc;
  mc.gen_filters = 4;
  mc.residual_blocks = 1;
  mc.disc_filters = 4;
  mc.disc_layers = 1;
  model::ModelBundle b(mc, seed);
  b.to(torch::kFloat64);
  b.train(true);
  torch::manual_seed(seed);
  const auto marker = torch::rand({2, 3, 8, 8}, torch::kFloat64) * 2 - 1;

  auto loss = [&] {
    auto fake = model::generator_forward(b.remover, marker);
    auto rec = model::generator_forward(b.adder, fake);
    return model::generator_adversarial_loss(model::discriminator_forward(b.clean_critic, fake)) +
           model::cycle_loss(marker, rec, mc.lambda_cycle);
  };

  auto params = b.generator_parameters();
  for (auto& p : params) p.mutable_grad() = torch::Tensor();
  loss().backward();

  std::mt19937_64 gen(seed);
  GradCheckResult r;
  torch::NoGradGuard guard;
  for (int k = 0; k < samples; ++k) {
    auto& p = params[std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(gen)];
    auto flat = p.view(-1);
    const auto i = std::uniform_int_distribution<std::int64_t>(0, flat.numel() - 1)(gen);
    const double analytic = p.grad().view(-1)[i].item<double>();
    const double orig = flat[i].item<double>();
    flat[i] = orig + h;
    const double up = loss().item<double>();
    flat[i] = orig - h;
    const double down = loss().item<double>();
    flat[i] = orig;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic - numeric) / scale);
    ++r.checked;
  }
  return r;
}

}  // namespace inkless::test

#pragma once

#include <torch/torch.h>

namespace inkless::model {

// Least-squares adversarial terms:
//   disc = 1/2 mean((D(real) - 1)^2) + 1/2 mean(D(fake)^2)
//   gen  = mean((D(fake) - 1)^2)
struct AdversarialLosses {
  torch::Tensor disc;
  torch::Tensor gen;
};

AdversarialLosses adversarial_losses(const torch::Tensor& d_real, const torch::Tensor& d_fake);
torch::Tensor discriminator_loss(const torch::Tensor& d_real, const torch::Tensor& d_fake);
torch::Tensor generator_adversarial_loss(const torch::Tensor& d_fake);

// lambda * mean |x - reconstructed|; throws ShapeError on mismatch.
torch::Tensor cycle_loss(const torch::Tensor& x, const torch::Tensor& reconstructed, double lambda);

}  // namespace inkless::model

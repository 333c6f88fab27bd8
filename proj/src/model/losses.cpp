#include "inkless/model/losses.hpp"

#include "inkless/core/error.hpp"

namespace inkless::model {

torch::Tensor discriminator_loss(const torch::Tensor& d_real, const torch::Tensor& d_fake) {
  return 0.5 * (d_real - 1.0).pow(2).mean() + 0.5 * d_fake.pow(2).mean();
}

torch::Tensor generator_adversarial_loss(const torch::Tensor& d_fake) {
  return (d_fake - 1.0).pow(2).mean();
}

AdversarialLosses adversarial_losses(const torch::Tensor& d_real, const torch::Tensor& d_fake) {
  if (d_real.sizes() != d_fake.sizes()) throw ShapeError("realness grids differ in shape");
  return {discriminator_loss(d_real, d_fake), generator_adversarial_loss(d_fake)};
}

torch::Tensor cycle_loss(const torch::Tensor& x, const torch::Tensor& reconstructed, double lambda) {
  if (x.sizes() != reconstructed.sizes()) throw ShapeError("cycle loss inputs differ in shape");
  return lambda * (x - reconstructed).abs().mean();
}

}  // namespace inkless::model

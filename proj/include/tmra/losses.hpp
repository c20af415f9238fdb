#pragma once

#include <vector>

#include "tmra/metrics.hpp"
#include "tmra/nn/modules.hpp"
#include "tmra/nn/tensor.hpp"
#include "tmra/sampling.hpp"

namespace tmra {

/// Weights of the total objective: gamma*cycle + wgan + alpha*identity + beta*freq.
struct LossWeights {
  double gamma = 2.0;   // cycle
  double alpha = 1.0;   // identity
  double beta = 2.0;    // frequency
  double gp_coeff = 10.0;

  void validate() const;
};

struct LossReport {
  double cycle = 0.0;
  double wgan_g = 0.0;
  double wgan_d = 0.0;
  double identity = 0.0;
  double freq = 0.0;
  double total_g = 0.0;
  double total_d = 0.0;

  /// The canonical recombination; total_g is always computed by exactly
  /// this expression so the identity holds bit-for-bit.
  static double recombine(const LossWeights& w, double cycle, double wgan_g, double identity,
                          double freq) {
    return ((w.gamma * cycle + wgan_g) + w.alpha * identity) + w.beta * freq;
  }
  bool recombination_ok(const LossWeights& w) const {
    return total_g == recombine(w, cycle, wgan_g, identity, freq);
  }
};

/// One training sample with the sampling mask attached to it.
struct DomainSample {
  nn::Tensor img;  // [2C,H,W]
  SamplingMask mask;
};

/// Differentiable image metric between two [2C,H,W] stacks.
nn::Tensor d_image_t(const nn::Tensor& a, const nn::Tensor& b, NormKind norm);

/// Differentiable k-space metric between two projected k-space stacks.
nn::Tensor d_freq_t(const nn::Tensor& ka, const nn::Tensor& kb);

/// Scalar critic value: spatial mean of the patch score map of an SSoS image.
nn::Tensor critic_value(const nn::Module& d, const nn::Tensor& ssos_img);

/// d_I(Y, F^-1 P F G(Y)) averaged over ys plus d_I(X, G(F^-1 P F X)) averaged
/// over xs; each sample uses its own attached mask.
nn::Tensor cycle_loss(const nn::Module& g, const std::vector<DomainSample>& xs,
                      const std::vector<DomainSample>& ys, NormKind norm = NormKind::L1);

/// (wgan_g, wgan_d-without-penalty): the generator sees only its own term.
std::pair<nn::Tensor, nn::Tensor> wgan_losses(const nn::Module& d,
                                              const std::vector<nn::Tensor>& ssos_x,
                                              const std::vector<nn::Tensor>& ssos_gy);

/// Two-sided penalty mean((||grad_D at interpolates|| - 1)^2); eps holds one
/// interpolation coefficient per sample, drawn by the caller.
nn::Tensor gradient_penalty(const nn::Module& d, const std::vector<nn::Tensor>& ssos_x,
                            const std::vector<nn::Tensor>& ssos_gy,
                            const std::vector<double>& eps);

nn::Tensor identity_loss(const nn::Module& g, const std::vector<DomainSample>& xs,
                         NormKind norm = NormKind::L1);

nn::Tensor freq_loss(const nn::Module& g, const std::vector<DomainSample>& xs);

struct TotalLosses {
  nn::Tensor g_loss;  // backprop target for the generator
  nn::Tensor d_loss;  // backprop target for the discriminator
  LossReport report;
};

/// All loss terms of the total objective for one unpaired batch.
/// eps supplies the gradient-penalty interpolation draws (one per x sample).
TotalLosses total_losses(const nn::Module& g, const nn::Module& d,
                         const std::vector<DomainSample>& xs,
                         const std::vector<DomainSample>& ys, const LossWeights& weights,
                         const std::vector<double>& eps, NormKind norm = NormKind::L1);

}  // namespace tmra

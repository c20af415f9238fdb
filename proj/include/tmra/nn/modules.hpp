#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tmra/image.hpp"
#include "tmra/nn/tensor.hpp"
#include "tmra/rng.hpp"

namespace tmra::nn {

/// Differentiable map with trainable parameters.
class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor apply(const Tensor& x) const = 0;
  virtual std::string kind() const = 0;

  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }
  const std::vector<std::string>& parameter_names() const { return param_names_; }
  size_t parameter_count() const;

 protected:
  Tensor register_param(const std::string& name, Tensor t) {
    params_.push_back(t);
    param_names_.push_back(name);
    return t;
  }

 private:
  std::vector<Tensor> params_;
  std::vector<std::string> param_names_;
};

struct GeneratorConfig {
  int coils = 4;        // C; channels in/out are 2C (real/imag stacked)
  int depth = 3;        // resolution stages; widths base, 2*base, ..., base*2^(depth-1)
  int base_filters = 16;
  bool residual = false;  // optional global input->output skip
  double init_std = 0.02;
  double in_eps = 1e-5;
};

struct DiscriminatorConfig {
  int width1 = 64;
  int width2 = 128;
  double leaky_slope = 0.2;
  double init_std = 0.02;
  double in_eps = 1e-5;
};

/// U-Net: per stage three (3x3 conv, instance norm, ReLU) blocks, 2x2 average
/// pooling between encoder stages, nearest-neighbor upsampling + 3x3 conv and
/// skip concatenation on the way up, and a final 1x1 convolution.
class UNetGenerator : public Module {
 public:
  UNetGenerator(const GeneratorConfig& cfg, uint64_t seed);
  Tensor apply(const Tensor& x) const override;
  std::string kind() const override { return "unet_generator"; }
  const GeneratorConfig& config() const { return cfg_; }

 private:
  struct ConvBlock {
    Tensor w, b, gamma, beta;
    int pad = 1;
    bool norm_relu = true;
  };
  ConvBlock make_block(const std::string& name, int cin, int cout, int k, RngStream& rng,
                       bool norm_relu = true);
  Tensor run_block(const ConvBlock& blk, const Tensor& x) const;

  GeneratorConfig cfg_;
  std::vector<std::vector<ConvBlock>> enc_;   // depth stages, 3 blocks each
  std::vector<ConvBlock> up_;                 // depth-1 up-convs
  std::vector<std::vector<ConvBlock>> dec_;   // depth-1 stages, 3 blocks each
  ConvBlock final_;                           // 1x1, linear
};

/// 1x1 PatchGAN critic on single-channel SSoS images:
/// conv(64) -> IN -> LeakyReLU -> conv(128) -> IN -> LeakyReLU -> conv(1).
class PatchDiscriminator : public Module {
 public:
  PatchDiscriminator(const DiscriminatorConfig& cfg, uint64_t seed);
  Tensor apply(const Tensor& x) const override;
  std::string kind() const override { return "patch_discriminator"; }
  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  Tensor w1_, b1_, g1_, be1_;
  Tensor w2_, b2_, g2_, be2_;
  Tensor w3_, b3_;
};

/// Closed-form parameter counts, kept independent of the module wiring so
/// tests catch drift between the two.
size_t unet_expected_parameter_count(int coils, int depth, int base_filters);
size_t discriminator_expected_parameter_count(int width1 = 64, int width2 = 128);

// ---- image <-> tensor ----

/// [2C,H,W] real stack, channels [re_0..re_{C-1}, im_0..im_{C-1}].
Tensor tensor_from_image(const MultiCoilImage& img, bool requires_grad = false);
MultiCoilImage image_from_tensor(const Tensor& t, int frame_index, ImageRole role);

/// Run the generator on a multi-coil image (shape-checked complex round trip).
MultiCoilImage generator_apply(const Module& g, const MultiCoilImage& y);

// ---- checkpoints ----

struct CheckpointExtra {
  std::vector<std::pair<std::string, std::vector<double>>> arrays;
  int epoch = -1;
  long step = -1;
  std::vector<int> vs_choices;
};

void save_checkpoint(const Module& module, const std::string& arch_json, const std::string& path,
                     const CheckpointExtra* extra = nullptr);

/// Reads back the architecture JSON and fills `module` parameters in place.
/// Returns the stored arch descriptor string.
std::string load_checkpoint_into(Module& module, const std::string& path,
                                 CheckpointExtra* extra = nullptr);

/// Peek at a checkpoint's arch descriptor without loading parameters.
std::string checkpoint_arch(const std::string& path);

}  // namespace tmra::nn

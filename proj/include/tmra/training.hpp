#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tmra/losses.hpp"
#include "tmra/nn/modules.hpp"
#include "tmra/rng.hpp"
#include "tmra/sampling.hpp"

namespace tmra {

struct TrainConfig {
  int epochs = 50;
  int phase1_epochs = 10;
  double lr = 0.001;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int g_steps_per_d_step = 5;
  int batch_size = 1;
  std::vector<int> vs_choices = {2, 3, 5};
  LossWeights weights;
  NormKind image_metric = NormKind::L1;
  uint64_t seed = 0;

  nn::GeneratorConfig generator;
  nn::DiscriminatorConfig discriminator;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

/// Scale = standard deviation of the SSoS magnitude; all coil channels are
/// divided by it. Denormalization multiplies the scale back.
std::pair<MultiCoilImage, double> normalize(const MultiCoilImage& y);
MultiCoilImage denormalize(const MultiCoilImage& y, double scale);

/// Learning rate schedule: constant for the first phase1_epochs, then a
/// linear ramp hitting zero at epoch == epochs.
double lr_at(int epoch, const TrainConfig& cfg);

/// Adam over a parameter list; moments persist across steps.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<nn::Tensor> params, double beta1, double beta2, double eps = 1e-8);
  void step(const std::vector<nn::Tensor>& grads, double lr);
  long step_count() const { return t_; }

  std::vector<double> serialize_state() const;
  void restore_state(const std::vector<double>& state);

 private:
  std::vector<nn::Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

/// Normalized training sample with its provenance within a dataset.
struct TrainItem {
  MultiCoilImage img;   // normalized
  double scale = 1.0;
  int instance = 0;
  int frame = 0;
  int vs = 0;  // 0 for domain-X items
};

/// Draws y in shuffled epoch order and x uniformly from an independent
/// stream; x and y indices are never co-indexed.
class UnpairedSampler {
 public:
  UnpairedSampler(size_t num_x, size_t num_y, uint64_t seed);
  std::pair<size_t, size_t> next();
  void start_epoch();

 private:
  size_t num_x_, num_y_;
  std::vector<size_t> y_order_;
  size_t y_pos_ = 0;
  RngStream x_rng_, y_rng_;
};

struct StepLog {
  long step = 0;
  int epoch = 0;
  double lr = 0.0;
  LossReport report;
};

using StepCallback = std::function<void(const StepLog&)>;

/// The full unsupervised training loop over unpaired X/Y datasets.
class Trainer {
 public:
  Trainer(std::shared_ptr<nn::Module> generator, std::shared_ptr<nn::Module> discriminator,
          const TrainConfig& cfg, const SamplingSchedule& schedule);

  /// One generator update (and every g_steps_per_d_step-th call one
  /// discriminator update) at the given learning rate.
  LossReport train_step(const std::vector<DomainSample>& xs, const std::vector<DomainSample>& ys,
                        long step_index, double lr);

  /// Epoch/step schedule over the datasets; returns the per-step logs.
  std::vector<StepLog> train(const std::vector<TrainItem>& xs, const std::vector<TrainItem>& ys,
                             const std::string& checkpoint_dir = "",
                             const StepCallback& on_step = nullptr, int start_epoch = 0);

  nn::Module& generator() { return *g_; }
  nn::Module& discriminator() { return *d_; }
  AdamOptimizer& generator_opt() { return opt_g_; }
  AdamOptimizer& discriminator_opt() { return opt_d_; }

  /// Fresh (vs, frame) mask draw for domain-X loss terms.
  SamplingMask draw_mask();
  double draw_gp_eps() { return gp_rng_.uniform(); }

  void save_training_checkpoint(const std::string& path, int epoch, long step) const;
  /// Returns the stored epoch so a resumed run continues numbering.
  int load_training_checkpoint(const std::string& path);

 private:
  std::shared_ptr<nn::Module> g_, d_;
  TrainConfig cfg_;
  SamplingSchedule schedule_;
  AdamOptimizer opt_g_, opt_d_;
  RngStream mask_rng_, gp_rng_;
  long global_step_ = 0;
};

std::string loss_report_json(const StepLog& log);

}  // namespace tmra

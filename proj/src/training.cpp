#include "tmra/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tmra/errors.hpp"
#include "tmra/metrics.hpp"

namespace tmra {

using json = nlohmann::json;
using nn::Tensor;

void TrainConfig::validate() const {
  if (epochs < 1) throw parameter_error("TrainConfig: epochs must be >= 1");
  if (phase1_epochs < 0 || phase1_epochs > epochs)
    throw parameter_error("TrainConfig: phase1_epochs out of range");
  if (lr < 0) throw parameter_error("TrainConfig: lr must be >= 0");
  if (g_steps_per_d_step < 1) throw parameter_error("TrainConfig: g_steps_per_d_step must be >= 1");
  if (batch_size < 1) throw parameter_error("TrainConfig: batch_size must be >= 1");
  if (vs_choices.empty()) throw parameter_error("TrainConfig: vs_choices must not be empty");
  weights.validate();
}

std::string TrainConfig::to_json() const {
  json j;
  j["epochs"] = epochs;
  j["phase1_epochs"] = phase1_epochs;
  j["lr"] = lr;
  j["adam_beta1"] = adam_beta1;
  j["adam_beta2"] = adam_beta2;
  j["g_steps_per_d_step"] = g_steps_per_d_step;
  j["batch_size"] = batch_size;
  j["vs_choices"] = vs_choices;
  j["weights"] = {{"gamma", weights.gamma},
                  {"alpha", weights.alpha},
                  {"beta", weights.beta},
                  {"gp_coeff", weights.gp_coeff}};
  j["image_metric"] = to_string(image_metric);
  j["seed"] = seed;
  j["generator"] = {{"coils", generator.coils},
                    {"depth", generator.depth},
                    {"base_filters", generator.base_filters},
                    {"residual", generator.residual},
                    {"init_std", generator.init_std},
                    {"in_eps", generator.in_eps}};
  j["discriminator"] = {{"width1", discriminator.width1},
                        {"width2", discriminator.width2},
                        {"leaky_slope", discriminator.leaky_slope},
                        {"init_std", discriminator.init_std},
                        {"in_eps", discriminator.in_eps}};
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.phase1_epochs = j.value("phase1_epochs", c.phase1_epochs);
  c.lr = j.value("lr", c.lr);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.g_steps_per_d_step = j.value("g_steps_per_d_step", c.g_steps_per_d_step);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.vs_choices = j.value("vs_choices", c.vs_choices);
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    c.weights.gamma = w.value("gamma", c.weights.gamma);
    c.weights.alpha = w.value("alpha", c.weights.alpha);
    c.weights.beta = w.value("beta", c.weights.beta);
    c.weights.gp_coeff = w.value("gp_coeff", c.weights.gp_coeff);
  }
  c.image_metric = norm_from_string(j.value("image_metric", std::string("l1")));
  c.seed = j.value("seed", c.seed);
  if (j.contains("generator")) {
    const auto& g = j["generator"];
    c.generator.coils = g.value("coils", c.generator.coils);
    c.generator.depth = g.value("depth", c.generator.depth);
    c.generator.base_filters = g.value("base_filters", c.generator.base_filters);
    c.generator.residual = g.value("residual", c.generator.residual);
    c.generator.init_std = g.value("init_std", c.generator.init_std);
    c.generator.in_eps = g.value("in_eps", c.generator.in_eps);
  }
  if (j.contains("discriminator")) {
    const auto& d = j["discriminator"];
    c.discriminator.width1 = d.value("width1", c.discriminator.width1);
    c.discriminator.width2 = d.value("width2", c.discriminator.width2);
    c.discriminator.leaky_slope = d.value("leaky_slope", c.discriminator.leaky_slope);
    c.discriminator.init_std = d.value("init_std", c.discriminator.init_std);
    c.discriminator.in_eps = d.value("in_eps", c.discriminator.in_eps);
  }
  c.validate();
  return c;
}

std::pair<MultiCoilImage, double> normalize(const MultiCoilImage& y) {
  const SSoSImage z = ssos(y);
  double mean = 0.0;
  for (double v : z.data) mean += v;
  mean /= static_cast<double>(z.data.size());
  double var = 0.0;
  for (double v : z.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(z.data.size());
  const double scale = std::sqrt(var);
  if (scale <= 0.0 || !std::isfinite(scale))
    throw degenerate_input_error("normalize: SSoS standard deviation is zero");
  MultiCoilImage out = y;
  for (auto& v : out.data) v /= scale;
  return {std::move(out), scale};
}

MultiCoilImage denormalize(const MultiCoilImage& y, double scale) {
  MultiCoilImage out = y;
  for (auto& v : out.data) v *= scale;
  return out;
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch > cfg.epochs) throw parameter_error("lr_at: epoch out of range");
  if (epoch < cfg.phase1_epochs) return cfg.lr;
  if (cfg.epochs == cfg.phase1_epochs) return cfg.lr;
  return cfg.lr * static_cast<double>(cfg.epochs - epoch) /
         static_cast<double>(cfg.epochs - cfg.phase1_epochs);
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamOptimizer::step(const std::vector<Tensor>& grads, double lr) {
  if (grads.size() != params_.size()) throw contract_error("AdamOptimizer: gradient list mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].mutable_values();
    const auto& g = grads[i].values();
    if (g.size() != p.size()) throw contract_error("AdamOptimizer: gradient size mismatch");
    for (size_t k = 0; k < p.size(); ++k) {
      m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g[k];
      v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g[k] * g[k];
      const double mhat = m_[i][k] / bc1;
      const double vhat = v_[i][k] / bc2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

std::vector<double> AdamOptimizer::serialize_state() const {
  std::vector<double> s;
  s.push_back(static_cast<double>(t_));
  for (const auto& m : m_) s.insert(s.end(), m.begin(), m.end());
  for (const auto& v : v_) s.insert(s.end(), v.begin(), v.end());
  return s;
}

void AdamOptimizer::restore_state(const std::vector<double>& s) {
  size_t need = 1;
  for (const auto& m : m_) need += 2 * m.size();
  if (s.size() != need) throw contract_error("AdamOptimizer: bad state size");
  t_ = static_cast<long>(s[0]);
  size_t pos = 1;
  for (auto& m : m_) {
    std::copy(s.begin() + pos, s.begin() + pos + m.size(), m.begin());
    pos += m.size();
  }
  for (auto& v : v_) {
    std::copy(s.begin() + pos, s.begin() + pos + v.size(), v.begin());
    pos += v.size();
  }
}

UnpairedSampler::UnpairedSampler(size_t num_x, size_t num_y, uint64_t seed)
    : num_x_(num_x), num_y_(num_y),
      x_rng_(RngStream::derive_seed(seed, 0xA11C)),
      y_rng_(RngStream::derive_seed(seed, 0xB22D)) {
  if (num_x == 0 || num_y == 0) throw parameter_error("UnpairedSampler: empty dataset");
  start_epoch();
}

void UnpairedSampler::start_epoch() {
  y_order_.resize(num_y_);
  for (size_t i = 0; i < num_y_; ++i) y_order_[i] = i;
  y_rng_.shuffle(y_order_);
  y_pos_ = 0;
}

std::pair<size_t, size_t> UnpairedSampler::next() {
  if (y_pos_ >= y_order_.size()) start_epoch();
  const size_t iy = y_order_[y_pos_++];
  const size_t ix = static_cast<size_t>(x_rng_.uniform_index(num_x_));
  return {ix, iy};
}

Trainer::Trainer(std::shared_ptr<nn::Module> generator, std::shared_ptr<nn::Module> discriminator,
                 const TrainConfig& cfg, const SamplingSchedule& schedule)
    : g_(std::move(generator)), d_(std::move(discriminator)), cfg_(cfg), schedule_(schedule),
      opt_g_(g_->parameters(), cfg.adam_beta1, cfg.adam_beta2),
      opt_d_(d_->parameters(), cfg.adam_beta1, cfg.adam_beta2),
      mask_rng_(RngStream::derive_seed(cfg.seed, 0x3A5F)),
      gp_rng_(RngStream::derive_seed(cfg.seed, 0x6B21)) {
  cfg_.validate();
}

SamplingMask Trainer::draw_mask() {
  const int vs = cfg_.vs_choices[mask_rng_.uniform_index(cfg_.vs_choices.size())];
  const int frame = static_cast<int>(mask_rng_.uniform_index(schedule_.num_frames));
  return mask_for_frame(schedule_, frame, vs);
}

LossReport Trainer::train_step(const std::vector<DomainSample>& xs,
                               const std::vector<DomainSample>& ys, long step_index, double lr) {
  std::vector<double> eps(xs.size());
  for (auto& e : eps) e = gp_rng_.uniform();

  TotalLosses losses = total_losses(*g_, *d_, xs, ys, cfg_.weights, eps, cfg_.image_metric);
  if (!std::isfinite(losses.report.total_g) || !std::isfinite(losses.report.total_d)) {
    throw divergence_error("train_step: non-finite loss: " +
                           loss_report_json({step_index, 0, lr, losses.report}));
  }

  const std::vector<Tensor> g_grads = nn::grad(losses.g_loss, g_->parameters());
  opt_g_.step(g_grads, lr);

  if ((step_index + 1) % cfg_.g_steps_per_d_step == 0) {
    const std::vector<Tensor> d_grads = nn::grad(losses.d_loss, d_->parameters());
    opt_d_.step(d_grads, lr);
  }
  return losses.report;
}

std::vector<StepLog> Trainer::train(const std::vector<TrainItem>& xs,
                                    const std::vector<TrainItem>& ys,
                                    const std::string& checkpoint_dir, const StepCallback& on_step,
                                    int start_epoch) {
  if (xs.empty() || ys.empty()) throw parameter_error("train: empty dataset");
  UnpairedSampler sampler(xs.size(), ys.size(),
                          RngStream::derive_seed(cfg_.seed, 0x5A3B));

  std::vector<StepLog> logs;
  const long steps_per_epoch = static_cast<long>(ys.size() / cfg_.batch_size);
  for (int epoch = start_epoch; epoch < cfg_.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg_);
    sampler.start_epoch();
    for (long s = 0; s < steps_per_epoch; ++s) {
      std::vector<DomainSample> x_batch, y_batch;
      for (int b = 0; b < cfg_.batch_size; ++b) {
        auto [ix, iy] = sampler.next();
        const TrainItem& yi = ys[iy];
        const TrainItem& xi = xs[ix];
        y_batch.push_back({nn::tensor_from_image(yi.img),
                           mask_for_frame(schedule_, yi.frame, yi.vs)});
        x_batch.push_back({nn::tensor_from_image(xi.img), draw_mask()});
      }
      StepLog log;
      log.step = global_step_;
      log.epoch = epoch;
      log.lr = lr;
      log.report = train_step(x_batch, y_batch, global_step_, lr);
      ++global_step_;
      logs.push_back(log);
      if (on_step) on_step(log);
    }
    if (!checkpoint_dir.empty()) {
      std::filesystem::create_directories(checkpoint_dir);
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%03d.json", epoch);
      save_training_checkpoint((std::filesystem::path(checkpoint_dir) / name).string(), epoch,
                               global_step_);
    }
  }
  return logs;
}

void Trainer::save_training_checkpoint(const std::string& path, int epoch, long step) const {
  nn::CheckpointExtra extra;
  extra.epoch = epoch;
  extra.step = step;
  extra.vs_choices = cfg_.vs_choices;
  extra.arrays.emplace_back("adam_g", opt_g_.serialize_state());
  extra.arrays.emplace_back("adam_d", opt_d_.serialize_state());
  // discriminator parameters ride along as one flat extra array
  std::vector<double> d_flat;
  for (const auto& p : d_->parameters())
    d_flat.insert(d_flat.end(), p.values().begin(), p.values().end());
  extra.arrays.emplace_back("discriminator", std::move(d_flat));
  nn::save_checkpoint(*g_, cfg_.to_json(), path, &extra);
}

int Trainer::load_training_checkpoint(const std::string& path) {
  nn::CheckpointExtra extra;
  nn::load_checkpoint_into(*g_, path, &extra);
  for (const auto& [name, vals] : extra.arrays) {
    if (name == "adam_g") {
      opt_g_.restore_state(vals);
    } else if (name == "adam_d") {
      opt_d_.restore_state(vals);
    } else if (name == "discriminator") {
      size_t pos = 0;
      for (auto& p : d_->parameters()) {
        if (pos + p.numel() > vals.size())
          throw contract_error("load_training_checkpoint: discriminator blob too small");
        std::copy(vals.begin() + pos, vals.begin() + pos + p.numel(),
                  p.mutable_values().begin());
        pos += p.numel();
      }
    }
  }
  return extra.epoch;
}

std::string loss_report_json(const StepLog& log) {
  json j;
  j["step"] = log.step;
  j["epoch"] = log.epoch;
  j["lr"] = log.lr;
  j["cycle"] = log.report.cycle;
  j["wgan_g"] = log.report.wgan_g;
  j["wgan_d"] = log.report.wgan_d;
  j["identity"] = log.report.identity;
  j["freq"] = log.report.freq;
  j["total_g"] = log.report.total_g;
  j["total_d"] = log.report.total_d;
  return j.dump();
}

}  // namespace tmra

#include "tmra/losses.hpp"

#include "tmra/errors.hpp"

namespace tmra {

using nn::Tensor;

void LossWeights::validate() const {
  if (gamma < 0 || alpha < 0 || beta < 0 || gp_coeff < 0)
    throw parameter_error("LossWeights: weights must be nonnegative");
}

Tensor d_image_t(const Tensor& a, const Tensor& b, NormKind norm) {
  Tensor diff = nn::sub(nn::ssos_t(a), nn::ssos_t(b));
  if (norm == NormKind::L1) return nn::sum_all(nn::abs_val(diff));
  return nn::pow_floor(nn::sum_all(nn::mul(diff, diff)), 0.5);
}

Tensor d_freq_t(const Tensor& ka, const Tensor& kb) {
  if (ka.dims() != kb.dims()) throw contract_error("d_freq_t: dims mismatch");
  const int coils = ka.dims()[0] / 2;
  Tensor diff = nn::sub(ka, kb);
  Tensor per_channel = nn::channel_sum(nn::mul(diff, diff));  // [2C]
  Tensor per_coil = nn::add(nn::slice_ch(per_channel, 0, coils),
                            nn::slice_ch(per_channel, coils, 2 * coils));
  return nn::sum_all(nn::pow_floor(per_coil, 0.5));
}

Tensor critic_value(const nn::Module& d, const Tensor& ssos_img) {
  return nn::mean_all(d.apply(ssos_img));
}

namespace {

Tensor batch_mean(std::vector<Tensor> terms) {
  if (terms.empty()) throw parameter_error("loss: empty batch");
  Tensor acc = terms[0];
  for (size_t i = 1; i < terms.size(); ++i) acc = nn::add(acc, terms[i]);
  return nn::scale(acc, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

Tensor cycle_loss(const nn::Module& g, const std::vector<DomainSample>& xs,
                  const std::vector<DomainSample>& ys, NormKind norm) {
  std::vector<Tensor> y_terms, x_terms;
  for (const auto& s : ys) {
    Tensor gy = g.apply(s.img);
    y_terms.push_back(d_image_t(s.img, nn::aliased_t(gy, s.mask), norm));
  }
  for (const auto& s : xs) {
    Tensor gax = g.apply(nn::aliased_t(s.img, s.mask));
    x_terms.push_back(d_image_t(s.img, gax, norm));
  }
  return nn::add(batch_mean(std::move(y_terms)), batch_mean(std::move(x_terms)));
}

std::pair<Tensor, Tensor> wgan_losses(const nn::Module& d, const std::vector<Tensor>& ssos_x,
                                      const std::vector<Tensor>& ssos_gy) {
  std::vector<Tensor> dx_terms, dgy_terms;
  for (const auto& u : ssos_x) dx_terms.push_back(critic_value(d, u));
  for (const auto& u : ssos_gy) dgy_terms.push_back(critic_value(d, u));
  Tensor mean_dx = batch_mean(std::move(dx_terms));
  Tensor mean_dgy = batch_mean(std::move(dgy_terms));
  Tensor wgan_g = nn::neg(mean_dgy);
  Tensor bracket = nn::sub(mean_dx, mean_dgy);
  return {wgan_g, nn::neg(bracket)};
}

Tensor gradient_penalty(const nn::Module& d, const std::vector<Tensor>& ssos_x,
                        const std::vector<Tensor>& ssos_gy, const std::vector<double>& eps) {
  if (ssos_x.size() != ssos_gy.size() || ssos_x.size() != eps.size())
    throw contract_error("gradient_penalty: batch size mismatch");
  std::vector<Tensor> terms;
  for (size_t i = 0; i < ssos_x.size(); ++i) {
    if (ssos_x[i].dims() != ssos_gy[i].dims())
      throw contract_error("gradient_penalty: sample shape mismatch");
    // interpolate in the critic's input space; the interpolate is a fresh
    // leaf so the penalty differentiates through D only
    const double e = eps[i];
    std::vector<double> v(ssos_x[i].numel());
    for (size_t k = 0; k < v.size(); ++k)
      v[k] = e * ssos_x[i].values()[k] + (1.0 - e) * ssos_gy[i].values()[k];
    Tensor u = Tensor::from(ssos_x[i].dims(), std::move(v), /*requires_grad=*/true);
    Tensor value = critic_value(d, u);
    Tensor gu = nn::grad(value, {u})[0];
    Tensor norm = nn::pow_floor(nn::sum_all(nn::mul(gu, gu)), 0.5);
    Tensor nm1 = nn::add_scalar(norm, -1.0);
    terms.push_back(nn::mul(nm1, nm1));
  }
  return batch_mean(std::move(terms));
}

Tensor identity_loss(const nn::Module& g, const std::vector<DomainSample>& xs, NormKind norm) {
  std::vector<Tensor> terms;
  for (const auto& s : xs) terms.push_back(d_image_t(s.img, g.apply(s.img), norm));
  return batch_mean(std::move(terms));
}

Tensor freq_loss(const nn::Module& g, const std::vector<DomainSample>& xs) {
  std::vector<Tensor> terms;
  for (const auto& s : xs) {
    Tensor kx = nn::kspace_project(s.img, s.mask);
    Tensor g_of_aliased = g.apply(nn::image_from_kspace(kx, s.mask));
    Tensor kg = nn::kspace_project(g_of_aliased, s.mask);
    terms.push_back(d_freq_t(kx, kg));
  }
  return batch_mean(std::move(terms));
}

TotalLosses total_losses(const nn::Module& g, const nn::Module& d,
                         const std::vector<DomainSample>& xs, const std::vector<DomainSample>& ys,
                         const LossWeights& weights, const std::vector<double>& eps,
                         NormKind norm) {
  weights.validate();
  if (xs.empty() || ys.empty()) throw parameter_error("total_losses: empty batch");

  // generator applications shared between terms
  std::vector<Tensor> gys, ssos_x, ssos_gy;
  std::vector<Tensor> y_cycle_terms;
  for (const auto& s : ys) {
    Tensor gy = g.apply(s.img);
    gys.push_back(gy);
    y_cycle_terms.push_back(d_image_t(s.img, nn::aliased_t(gy, s.mask), norm));
    ssos_gy.push_back(nn::ssos_t(gy));
  }
  std::vector<Tensor> x_cycle_terms, freq_terms, id_terms;
  for (const auto& s : xs) {
    ssos_x.push_back(nn::ssos_t(s.img));
    Tensor kx = nn::kspace_project(s.img, s.mask);
    Tensor aliased = nn::image_from_kspace(kx, s.mask);
    Tensor gax = g.apply(aliased);
    x_cycle_terms.push_back(d_image_t(s.img, gax, norm));
    freq_terms.push_back(d_freq_t(kx, nn::kspace_project(gax, s.mask)));
    id_terms.push_back(d_image_t(s.img, g.apply(s.img), norm));
  }

  Tensor cycle = nn::add(batch_mean(std::move(y_cycle_terms)),
                         batch_mean(std::move(x_cycle_terms)));
  Tensor identity = batch_mean(std::move(id_terms));
  Tensor freq = batch_mean(std::move(freq_terms));

  std::vector<Tensor> dx_terms, dgy_terms;
  for (const auto& u : ssos_x) dx_terms.push_back(critic_value(d, u));
  for (const auto& u : ssos_gy) dgy_terms.push_back(critic_value(d, u));
  Tensor mean_dx = batch_mean(std::move(dx_terms));
  Tensor mean_dgy = batch_mean(std::move(dgy_terms));
  Tensor wgan_g = nn::neg(mean_dgy);
  Tensor bracket = nn::sub(mean_dx, mean_dgy);

  // detached SSoS copies for the penalty interpolates
  std::vector<Tensor> sx_det, sgy_det;
  for (size_t i = 0; i < xs.size(); ++i) {
    sx_det.push_back(Tensor::from(ssos_x[i].dims(), ssos_x[i].values()));
    sgy_det.push_back(Tensor::from(ssos_gy[i % ssos_gy.size()].dims(),
                                   ssos_gy[i % ssos_gy.size()].values()));
  }
  Tensor penalty = gradient_penalty(d, sx_det, sgy_det, eps);
  Tensor d_loss = nn::add(nn::neg(bracket), nn::scale(penalty, weights.gp_coeff));

  TotalLosses out;
  out.g_loss = nn::add(
      nn::add(nn::add(nn::scale(cycle, weights.gamma), wgan_g),
              nn::scale(identity, weights.alpha)),
      nn::scale(freq, weights.beta));
  out.d_loss = d_loss;
  out.report.cycle = cycle.item();
  out.report.wgan_g = wgan_g.item();
  out.report.identity = identity.item();
  out.report.freq = freq.item();
  out.report.wgan_d = d_loss.item();
  out.report.total_g = LossReport::recombine(weights, out.report.cycle, out.report.wgan_g,
                                             out.report.identity, out.report.freq);
  out.report.total_d = out.report.wgan_d;
  return out;
}

}  // namespace tmra

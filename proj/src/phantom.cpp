#include "tmra/phantom.hpp"

#include <cmath>

#include "tmra/errors.hpp"
#include "tmra/rng.hpp"

namespace tmra {

void PhantomSpec::validate() const {
  if (grid_height < 16 || grid_width < 16)
    throw parameter_error("PhantomSpec: grid dims must be >= 16");
  if (num_frames < 1) throw parameter_error("PhantomSpec: num_frames must be >= 1");
  if (num_coils < 1) throw parameter_error("PhantomSpec: num_coils must be >= 1");
  if (noise_std < 0) throw parameter_error("PhantomSpec: noise_std must be >= 0");
  for (const auto& s : structures) {
    if (s.axis_y <= 0 || s.axis_x <= 0) throw parameter_error("PhantomSpec: axes must be > 0");
    if (s.bolus.amplitude < 0) throw parameter_error("PhantomSpec: bolus amplitude must be >= 0");
    if (s.bolus.shape_a <= 0 || s.bolus.scale_b <= 0)
      throw parameter_error("PhantomSpec: bolus shape/scale must be > 0");
  }
}

double bolus_curve(const BolusParams& p, double t) {
  if (p.shape_a <= 0 || p.scale_b <= 0)
    throw parameter_error("bolus_curve: shape and scale must be > 0");
  if (t < p.t0 || p.amplitude == 0.0) return 0.0;
  const double u = (t - p.t0) / (p.shape_a * p.scale_b);
  // peak-normalized gamma variate: value at u = 1 (t = t0 + a*b) is amplitude
  return p.amplitude * std::pow(u, p.shape_a) *
         std::exp(p.shape_a - (t - p.t0) / p.scale_b);
}

CoilSensitivities make_coil_sensitivities(int h, int w, int coils, double smoothness,
                                          uint64_t seed) {
  if (coils < 1) throw parameter_error("make_coil_sensitivities: coils must be >= 1");
  if (h < 1 || w < 1) throw parameter_error("make_coil_sensitivities: bad grid");
  RngStream rng(RngStream::derive_seed(seed, 0xC011));

  CoilSensitivities sens(coils, h, w);
  const double sigma = std::max(0.05, smoothness) * std::max(h, w);
  for (int c = 0; c < coils; ++c) {
    // lobe center on a circle just outside the FOV
    const double ang = 2.0 * M_PI * c / coils + rng.uniform(-0.15, 0.15);
    const double cy = h / 2.0 + 0.62 * h * std::sin(ang);
    const double cx = w / 2.0 + 0.62 * w * std::cos(ang);
    // smooth linear phase, different per coil
    const double py = rng.uniform(-0.5, 0.5) * 2.0 * M_PI / h;
    const double px = rng.uniform(-0.5, 0.5) * 2.0 * M_PI / w;
    const double p0 = rng.uniform(0.0, 2.0 * M_PI);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double r2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        const double mag = std::exp(-r2 / (2.0 * sigma * sigma)) + 0.05;
        const double ph = p0 + py * y + px * x;
        sens.at(c, y, x) = cplx(mag * std::cos(ph), mag * std::sin(ph));
      }
    }
  }
  // normalize: sum over coils of |s|^2 is 1 at every voxel
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double ss = 0.0;
      for (int c = 0; c < coils; ++c) ss += std::norm(sens.at(c, y, x));
      const double inv = 1.0 / std::sqrt(ss);
      for (int c = 0; c < coils; ++c) sens.at(c, y, x) *= inv;
    }
  }
  sens.normalized = true;
  return sens;
}

std::vector<uint8_t> structure_mask(const Structure& s, int h, int w) {
  std::vector<uint8_t> m(static_cast<size_t>(h) * w, 0);
  const double ca = std::cos(s.orientation), sa = std::sin(s.orientation);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dy = y - s.center_y, dx = x - s.center_x;
      const double ry = (ca * dy + sa * dx) / s.axis_y;
      const double rx = (-sa * dy + ca * dx) / s.axis_x;
      if (ry * ry + rx * rx <= 1.0) m[static_cast<size_t>(y) * w + x] = 1;
    }
  }
  return m;
}

PhantomSequence make_phantom_sequence(const PhantomSpec& spec, const CoilSensitivities* sens) {
  spec.validate();
  const int h = spec.grid_height, w = spec.grid_width;
  const size_t plane = static_cast<size_t>(h) * w;

  PhantomSequence seq;
  if (sens) {
    if (sens->coils != spec.num_coils || sens->height != h || sens->width != w)
      throw contract_error("make_phantom_sequence: sensitivity shape mismatch");
    seq.sensitivities = *sens;
  } else {
    seq.sensitivities =
        make_coil_sensitivities(h, w, spec.num_coils, spec.coil_smoothness, spec.seed);
  }

  std::vector<std::vector<uint8_t>> masks;
  masks.reserve(spec.structures.size());
  for (const auto& s : spec.structures) masks.push_back(structure_mask(s, h, w));

  RngStream noise_rng(RngStream::derive_seed(spec.seed, 0x4015E));
  const double comp_std = spec.noise_std / std::sqrt(2.0);

  seq.frames.reserve(spec.num_frames);
  seq.scalar_frames.reserve(spec.num_frames);
  for (int t = 0; t < spec.num_frames; ++t) {
    std::vector<double> scalar(plane, 0.0);
    for (size_t si = 0; si < spec.structures.size(); ++si) {
      const auto& s = spec.structures[si];
      const double level = s.baseline * (1.0 + bolus_curve(s.bolus, t));
      for (size_t i = 0; i < plane; ++i)
        if (masks[si][i]) scalar[i] += level;
    }
    seq.scalar_frames.push_back(scalar);

    MultiCoilImage img(spec.num_coils, h, w, ImageRole::ground_truth, t);
    for (int c = 0; c < spec.num_coils; ++c) {
      for (size_t i = 0; i < plane; ++i) {
        cplx v = seq.sensitivities.maps[c * plane + i] * scalar[i];
        if (spec.noise_std > 0)
          v += cplx(noise_rng.normal(0.0, comp_std), noise_rng.normal(0.0, comp_std));
        img.data[c * plane + i] = v;
      }
    }
    seq.frames.push_back(std::move(img));
  }
  return seq;
}

}  // namespace tmra

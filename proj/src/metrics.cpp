#include "tmra/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tmra/errors.hpp"

namespace tmra {

NormKind norm_from_string(const std::string& s) {
  if (s == "l1" || s == "L1") return NormKind::L1;
  if (s == "l2" || s == "L2") return NormKind::L2;
  throw parameter_error("unknown norm kind: " + s);
}

std::string to_string(NormKind k) { return k == NormKind::L1 ? "l1" : "l2"; }

std::string to_string(ImageRole role) {
  switch (role) {
    case ImageRole::ground_truth: return "ground_truth";
    case ImageRole::aliased: return "aliased";
    case ImageRole::reconstruction: return "reconstruction";
  }
  return "ground_truth";
}

ImageRole role_from_string(const std::string& s) {
  if (s == "ground_truth") return ImageRole::ground_truth;
  if (s == "aliased") return ImageRole::aliased;
  if (s == "reconstruction") return ImageRole::reconstruction;
  throw parameter_error("unknown image role: " + s);
}

SSoSImage ssos(const MultiCoilImage& x) {
  SSoSImage z(x.height, x.width);
  const size_t plane = static_cast<size_t>(x.height) * x.width;
  for (int c = 0; c < x.coils; ++c)
    for (size_t i = 0; i < plane; ++i) z.data[i] += std::norm(x.data[c * plane + i]);
  for (auto& v : z.data) v = std::sqrt(v);
  return z;
}

double d_image(const MultiCoilImage& a, const MultiCoilImage& b, NormKind norm) {
  if (!a.same_shape(b)) throw contract_error("d_image: shape mismatch");
  const SSoSImage za = ssos(a), zb = ssos(b);
  double acc = 0.0;
  if (norm == NormKind::L1) {
    for (size_t i = 0; i < za.data.size(); ++i) acc += std::abs(za.data[i] - zb.data[i]);
    return acc;
  }
  for (size_t i = 0; i < za.data.size(); ++i) {
    const double d = za.data[i] - zb.data[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double d_freq(const KSpaceFrame& a, const KSpaceFrame& b) {
  if (a.coils != b.coils || a.height != b.height || a.width != b.width)
    throw contract_error("d_freq: shape mismatch");
  if (!a.mask.same_pattern(b.mask)) throw contract_error("d_freq: mask mismatch");
  const size_t plane = static_cast<size_t>(a.height) * a.width;
  double total = 0.0;
  for (int c = 0; c < a.coils; ++c) {
    double ss = 0.0;
    for (size_t i = 0; i < plane; ++i)
      if (a.mask.mask[i]) ss += std::norm(a.data[c * plane + i] - b.data[c * plane + i]);
    total += std::sqrt(ss);
  }
  return total;
}

double psnr(const SSoSImage& recon, const SSoSImage& ref) {
  if (recon.height != ref.height || recon.width != ref.width)
    throw contract_error("psnr: shape mismatch");
  double mse = 0.0, maxv = 0.0;
  for (size_t i = 0; i < ref.data.size(); ++i) {
    const double d = recon.data[i] - ref.data[i];
    mse += d * d;
    maxv = std::max(maxv, ref.data[i]);
  }
  mse /= static_cast<double>(ref.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(maxv / std::sqrt(mse));
}

double ssim(const SSoSImage& recon, const SSoSImage& ref, double k1, double k2, int window) {
  if (recon.height != ref.height || recon.width != ref.width)
    throw contract_error("ssim: shape mismatch");
  if (window < 1 || window > ref.height || window > ref.width)
    throw parameter_error("ssim: window larger than image");

  double lo = ref.data[0], hi = ref.data[0];
  for (double v : ref.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double range = hi - lo;
  if (range == 0.0) range = std::max(std::abs(hi), 1.0);  // degenerate constant reference
  const double c1 = (k1 * range) * (k1 * range);
  const double c2 = (k2 * range) * (k2 * range);

  const int n = window * window;
  double acc = 0.0;
  long count = 0;
  for (int y = 0; y + window <= ref.height; ++y) {
    for (int x = 0; x + window <= ref.width; ++x) {
      double mx = 0, my = 0;
      for (int dy = 0; dy < window; ++dy)
        for (int dx = 0; dx < window; ++dx) {
          mx += recon.at(y + dy, x + dx);
          my += ref.at(y + dy, x + dx);
        }
      mx /= n;
      my /= n;
      double vx = 0, vy = 0, cov = 0;
      for (int dy = 0; dy < window; ++dy)
        for (int dx = 0; dx < window; ++dx) {
          const double ax = recon.at(y + dy, x + dx) - mx;
          const double ay = ref.at(y + dy, x + dx) - my;
          vx += ax * ax;
          vy += ay * ay;
          cov += ax * ay;
        }
      vx /= n;
      vy /= n;
      cov /= n;
      acc += ((2 * mx * my + c1) * (2 * cov + c2)) /
             ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

int start_to_peak(const std::vector<double>& series, double threshold_frac) {
  if (series.size() < 2) throw parameter_error("start_to_peak: series too short");
  if (threshold_frac < 0 || threshold_frac >= 1)
    throw parameter_error("start_to_peak: threshold_frac must be in [0, 1)");

  const size_t peak =
      std::distance(series.begin(), std::max_element(series.begin(), series.end()));
  if (peak == 0)
    throw undefined_dynamics_error("start_to_peak: no pre-peak baseline frames");

  // Onset: first frame exceeding baseline + frac*(peak - baseline), with the
  // baseline taken as the mean of the frames before it.
  double running = series[0];
  for (size_t t = 1; t <= peak; ++t) {
    const double baseline = running / static_cast<double>(t);
    if (series[peak] > baseline &&
        series[t] > baseline + threshold_frac * (series[peak] - baseline)) {
      return static_cast<int>(peak - t);
    }
    running += series[t];
  }
  throw undefined_dynamics_error("start_to_peak: series has no usable dynamics");
}

}  // namespace tmra

#pragma once

#include <string>
#include <vector>

#include "tmra/image.hpp"
#include "tmra/sampling.hpp"

namespace tmra {

/// Square root of the per-pixel sum of squared coil magnitudes.
struct SSoSImage {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // [H, W], nonnegative

  SSoSImage() = default;
  SSoSImage(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w, 0.0) {}
  double& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  double at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
};

enum class NormKind { L1, L2 };

NormKind norm_from_string(const std::string& s);
std::string to_string(NormKind k);

SSoSImage ssos(const MultiCoilImage& x);

/// Image metric d_I: norm of the difference of the SSoS images
/// (entrywise L1 by default, L2 switchable).
double d_image(const MultiCoilImage& a, const MultiCoilImage& b, NormKind norm = NormKind::L1);

/// k-space metric d_F: per-coil Frobenius norm of the complex difference
/// restricted to the sampling mask, summed over coils. Masks must match.
double d_freq(const KSpaceFrame& a, const KSpaceFrame& b);

/// 20*log10(max(ref) / sqrt(MSE)). Identical images give +infinity.
double psnr(const SSoSImage& recon, const SSoSImage& ref);

/// Mean local SSIM over sliding uniform windows; c1=(k1*R)^2, c2=(k2*R)^2
/// with R the dynamic range of the reference.
double ssim(const SSoSImage& recon, const SSoSImage& ref, double k1 = 0.01, double k2 = 0.03,
            int window = 7);

/// Frames between contrast onset and peak. Onset is the first frame whose
/// value exceeds baseline + threshold_frac*(peak - baseline), where baseline
/// is the mean of the frames before it.
int start_to_peak(const std::vector<double>& series, double threshold_frac = 0.1);

}  // namespace tmra

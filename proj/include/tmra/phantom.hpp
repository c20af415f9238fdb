#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tmra/image.hpp"

namespace tmra {

/// Gamma-variate contrast enhancement, normalized so the peak equals amplitude.
struct BolusParams {
  double t0 = 0.0;        // arrival frame
  double shape_a = 2.0;   // gamma shape, > 0
  double scale_b = 2.0;   // gamma scale (frames), > 0
  double amplitude = 0.0; // peak enhancement factor, >= 0
};

/// One elliptical structure with a baseline intensity and its bolus dynamics.
struct Structure {
  double center_y = 0.0, center_x = 0.0;  // pixels
  double axis_y = 1.0, axis_x = 1.0;      // semi-axes, pixels
  double orientation = 0.0;               // radians
  double baseline = 1.0;
  BolusParams bolus;
  std::string name;
};

struct PhantomSpec {
  int grid_height = 64;
  int grid_width = 64;
  int num_frames = 1;
  int num_coils = 1;
  double noise_std = 0.0;       // complex noise std per coil image
  double coil_smoothness = 0.6; // Gaussian lobe width relative to grid
  uint64_t seed = 0;
  std::vector<Structure> structures;

  void validate() const;
};

struct PhantomSequence {
  std::vector<MultiCoilImage> frames;  // role = ground_truth
  CoilSensitivities sensitivities;
  std::vector<std::vector<double>> scalar_frames;  // noise-free [T][H*W], for ROI oracles
};

/// Enhancement factor at frame t: 0 before arrival, peaking at t0 + a*b with
/// value `amplitude`, decaying exponentially after.
double bolus_curve(const BolusParams& p, double t);

/// Smooth normalized coil maps: Gaussian magnitude lobes around the FOV with a
/// smooth phase ramp, scaled so sum_i |s_i(r)|^2 = 1 everywhere.
CoilSensitivities make_coil_sensitivities(int h, int w, int coils, double smoothness,
                                          uint64_t seed);

/// Dynamic multi-coil sequence: structure intensities baseline*(1 + bolus(t)),
/// coil-weighted, plus complex Gaussian noise. Reproducible from spec.seed.
/// Pass `sens` to override the generated coil maps (shape must match).
PhantomSequence make_phantom_sequence(const PhantomSpec& spec,
                                      const CoilSensitivities* sens = nullptr);

/// Pixel membership mask of one structure (used for ROI statistics).
std::vector<uint8_t> structure_mask(const Structure& s, int h, int w);

}  // namespace tmra

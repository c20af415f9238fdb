#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tmra/sampling.hpp"

namespace tmra {

/// Central fully sampled rectangle [y0, y1) x [x0, x1) used for calibration.
struct AcsRegion {
  int y0 = 0, y1 = 0, x0 = 0, x1 = 0;
  int rows() const { return y1 - y0; }
  int cols() const { return x1 - x0; }
};

AcsRegion acs_region(const SamplingSchedule& sched);

/// GRAPPA interpolation weights for one lattice geometry.
///
/// One weight matrix per missing-point offset class (ry*rz - 1 classes); each
/// maps the kh x kw sampled-lattice neighborhood over all coils to the missing
/// sample of every target coil.
struct GrappaKernel {
  int coils = 0;
  int kernel_h = 5, kernel_w = 5;
  int lattice_ry = 1, lattice_rz = 1;
  int phase_y = 0, phase_z = 0;
  int grid_h = 0, grid_w = 0;
  AcsRegion acs;
  double lambda_rel = 0.0;
  // weights[class]: (coils*kh*kw) x coils, class = dy*rz + dz - 1
  std::vector<Eigen::MatrixXcd> weights;

  int num_classes() const { return lattice_ry * lattice_rz - 1; }
  /// The lattice+ACS mask this kernel was calibrated for.
  SamplingMask expected_mask() const;
};

/// Fit kernel weights by regularized least squares over all ACS sliding
/// windows. lambda_rel scales the Tikhonov term relative to the mean diagonal
/// of the normal matrix; with lambda_rel = 0 a singular system raises
/// numeric_error instead of being silently regularized.
GrappaKernel calibrate(const KSpaceFrame& acs_frame, const AcsRegion& acs, int lattice_ry,
                       int lattice_rz, int kernel_h = 5, int kernel_w = 5,
                       double lambda_rel = 1e-4);

/// Fill every missing lattice-cell point from its sampled neighborhood.
/// Acquired samples (including ACS) pass through unchanged.
KSpaceFrame interpolate(const KSpaceFrame& undersampled, const GrappaKernel& kernel);

/// Full pipeline for one frame: view-share combine at maximum vs, calibrate
/// on the ACS, interpolate, inverse FFT. Output is domain-X material.
MultiCoilImage grappa_reconstruct(const std::vector<KSpaceFrame>& frames,
                                  const SamplingSchedule& sched, int target_frame,
                                  double lambda_rel = 1e-4);

void save_kernel(const GrappaKernel& kernel, const std::string& path);
GrappaKernel load_kernel(const std::string& path);

}  // namespace tmra

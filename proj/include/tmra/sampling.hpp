#pragma once

#include <cstdint>
#include <vector>

#include "tmra/image.hpp"

namespace tmra {

/// Boolean k-space sampling pattern over an H x W phase-encode grid.
struct SamplingMask {
  int height = 0;
  int width = 0;
  int vs = 0;                 // view-sharing count used to build it (0 = n/a)
  double acceleration = 0.0;  // R = H*W / |mask|
  std::vector<uint8_t> mask;  // [H, W], 1 = sampled

  SamplingMask() = default;
  SamplingMask(int h, int w) : height(h), width(w), mask(static_cast<size_t>(h) * w, 0) {}

  bool at(int y, int x) const { return mask[static_cast<size_t>(y) * width + x] != 0; }
  void set(int y, int x, bool v) { mask[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
  size_t count() const;
  void update_acceleration();
  bool same_pattern(const SamplingMask& o) const {
    return height == o.height && width == o.width && mask == o.mask;
  }
  /// True if every sampled point of this mask is sampled in o.
  bool subset_of(const SamplingMask& o) const;
};

/// Complex k-space stack [C, H, W] together with the mask that produced it.
/// Invariant: data is zero wherever the mask is false.
struct KSpaceFrame {
  int coils = 0;
  int height = 0;
  int width = 0;
  int frame_index = 0;
  SamplingMask mask;
  std::vector<cplx> data;

  KSpaceFrame() = default;
  KSpaceFrame(int c, int h, int w, int frame = 0)
      : coils(c), height(h), width(w), frame_index(frame),
        data(static_cast<size_t>(c) * h * w) {}

  cplx& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * height + y) * width + x]; }
  const cplx& at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
};

/// TWIST A/B frame schedule: a fully sampled central block (ACS) plus a
/// uniform lattice over the periphery, the latter partitioned into
/// b_interleaves disjoint subsets that rotate across B frames.
struct SamplingSchedule {
  int height = 0;
  int width = 0;
  int acs_half = 0;  // half-width of the central block in each direction
  int lattice_ry = 1;
  int lattice_rz = 1;
  int b_interleaves = 1;
  int num_frames = 0;

  /// Per frame: -1 for A frames, subset index in [0, b_interleaves) for B frames.
  std::vector<int> frame_subset;
  /// Periphery lattice points per subset, as linear indices y*width+x.
  std::vector<std::vector<int>> periphery_subsets;

  bool is_a_frame(int t) const { return frame_subset.at(t) < 0; }
  int phase_y() const { return (height / 2) % lattice_ry; }
  int phase_z() const { return (width / 2) % lattice_rz; }
  bool in_acs(int y, int x) const {
    return y >= height / 2 - acs_half && y < height / 2 + acs_half &&
           x >= width / 2 - acs_half && x < width / 2 + acs_half;
  }
  bool on_lattice(int y, int x) const {
    return y % lattice_ry == phase_y() && x % lattice_rz == phase_z();
  }
};

SamplingSchedule build_schedule(int h, int w, int acs_half, int lattice_ry, int lattice_rz,
                                int num_frames, int b_interleaves = 5);

/// The vs periphery subsets temporally nearest to `frame`, ties toward
/// earlier frames. Returned in selection order.
std::vector<int> nearest_subsets(const SamplingSchedule& sched, int frame, int vs);

/// Reduced view-sharing mask for one frame: ACS block plus the vs nearest
/// periphery subsets. Masks at the same frame are nested in vs.
SamplingMask mask_for_frame(const SamplingSchedule& sched, int frame, int vs);

/// What the scanner acquires at one frame: the ACS block at A frames, the
/// frame's periphery subset at B frames.
SamplingMask acquisition_mask(const SamplingSchedule& sched, int frame);

/// Uniform lattice + ACS pattern (the fully view-shared mask GRAPPA needs).
SamplingMask lattice_acs_mask(const SamplingSchedule& sched);

SamplingMask full_mask(int h, int w);

/// Per-coil centered unitary FFT followed by projection onto the mask.
KSpaceFrame forward_project(const MultiCoilImage& x, const SamplingMask& mask);

/// Aliased image Y: inverse FFT of the masked k-space, per coil.
MultiCoilImage aliased_recon(const MultiCoilImage& x, const SamplingMask& mask);

/// Per-coil inverse FFT of a k-space frame (no additional masking).
MultiCoilImage inverse_fft(const KSpaceFrame& k);

/// Merge the acquired k-space of neighboring frames into frame
/// `target_frame`'s k-space, using the vs temporally nearest distinct
/// periphery subsets plus the nearest ACS acquisition. Where sources
/// overlap (ACS), the temporally nearest frame wins, ties toward earlier.
KSpaceFrame view_share_combine(const std::vector<KSpaceFrame>& frames,
                               const SamplingSchedule& sched, int target_frame, int vs);

}  // namespace tmra

#include "tmra/sampling.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "tmra/errors.hpp"
#include "tmra/fft.hpp"

namespace tmra {

size_t SamplingMask::count() const {
  return static_cast<size_t>(std::count(mask.begin(), mask.end(), uint8_t{1}));
}

void SamplingMask::update_acceleration() {
  const size_t n = count();
  acceleration = n == 0 ? 0.0 : static_cast<double>(height) * width / static_cast<double>(n);
}

bool SamplingMask::subset_of(const SamplingMask& o) const {
  if (height != o.height || width != o.width) return false;
  for (size_t i = 0; i < mask.size(); ++i)
    if (mask[i] && !o.mask[i]) return false;
  return true;
}

SamplingSchedule build_schedule(int h, int w, int acs_half, int lattice_ry, int lattice_rz,
                                int num_frames, int b_interleaves) {
  if (h < 16 || w < 16) throw parameter_error("build_schedule: grid must be at least 16x16");
  if (acs_half < 1 || 2 * acs_half >= std::min(h, w))
    throw parameter_error("build_schedule: acs_half out of range");
  if (lattice_ry < 1 || lattice_rz < 1)
    throw parameter_error("build_schedule: lattice factors must be positive");
  if (b_interleaves < 1) throw parameter_error("build_schedule: b_interleaves must be >= 1");
  if (num_frames < 1) throw parameter_error("build_schedule: num_frames must be >= 1");

  SamplingSchedule s;
  s.height = h;
  s.width = w;
  s.acs_half = acs_half;
  s.lattice_ry = lattice_ry;
  s.lattice_rz = lattice_rz;
  s.b_interleaves = b_interleaves;
  s.num_frames = num_frames;

  // Periphery = lattice points outside the ACS block, split into
  // b_interleaves subsets by modular interleaving in raster order.
  s.periphery_subsets.assign(b_interleaves, {});
  int j = 0;
  for (int y = s.phase_y(); y < h; y += lattice_ry) {
    for (int x = s.phase_z(); x < w; x += lattice_rz) {
      if (s.in_acs(y, x)) continue;
      s.periphery_subsets[j % b_interleaves].push_back(y * w + x);
      ++j;
    }
  }
  if (j < b_interleaves)
    throw parameter_error("build_schedule: periphery too small for the requested interleaves");

  // Alternating A, B_0, A, B_1, ... with the B subset index cycling.
  s.frame_subset.resize(num_frames);
  for (int t = 0; t < num_frames; ++t)
    s.frame_subset[t] = (t % 2 == 0) ? -1 : ((t - 1) / 2) % b_interleaves;
  return s;
}

std::vector<int> nearest_subsets(const SamplingSchedule& sched, int frame, int vs) {
  if (frame < 0 || frame >= sched.num_frames)
    throw parameter_error("nearest_subsets: frame out of range");
  if (vs < 1 || vs > sched.b_interleaves)
    throw parameter_error("nearest_subsets: vs out of range [1, b_interleaves]");

  // Frames in nearest-first order, ties toward the earlier frame.
  std::vector<int> order{frame};
  for (int d = 1; d < sched.num_frames; ++d) {
    if (frame - d >= 0) order.push_back(frame - d);
    if (frame + d < sched.num_frames) order.push_back(frame + d);
  }

  std::vector<int> chosen;
  std::vector<bool> seen(sched.b_interleaves, false);
  for (int t : order) {
    const int sub = sched.frame_subset[t];
    if (sub >= 0 && !seen[sub]) {
      seen[sub] = true;
      chosen.push_back(sub);
      if (static_cast<int>(chosen.size()) == vs) return chosen;
    }
  }
  throw parameter_error("nearest_subsets: schedule too short to supply vs distinct subsets");
}

SamplingMask mask_for_frame(const SamplingSchedule& sched, int frame, int vs) {
  SamplingMask m(sched.height, sched.width);
  m.vs = vs;
  for (int y = sched.height / 2 - sched.acs_half; y < sched.height / 2 + sched.acs_half; ++y)
    for (int x = sched.width / 2 - sched.acs_half; x < sched.width / 2 + sched.acs_half; ++x)
      m.set(y, x, true);
  for (int sub : nearest_subsets(sched, frame, vs))
    for (int idx : sched.periphery_subsets[sub]) m.mask[idx] = 1;
  m.update_acceleration();
  return m;
}

SamplingMask acquisition_mask(const SamplingSchedule& sched, int frame) {
  if (frame < 0 || frame >= sched.num_frames)
    throw parameter_error("acquisition_mask: frame out of range");
  SamplingMask m(sched.height, sched.width);
  const int sub = sched.frame_subset[frame];
  if (sub < 0) {
    for (int y = sched.height / 2 - sched.acs_half; y < sched.height / 2 + sched.acs_half; ++y)
      for (int x = sched.width / 2 - sched.acs_half; x < sched.width / 2 + sched.acs_half; ++x)
        m.set(y, x, true);
  } else {
    for (int idx : sched.periphery_subsets[sub]) m.mask[idx] = 1;
  }
  m.update_acceleration();
  return m;
}

SamplingMask lattice_acs_mask(const SamplingSchedule& sched) {
  SamplingMask m(sched.height, sched.width);
  m.vs = sched.b_interleaves;
  for (int y = 0; y < sched.height; ++y)
    for (int x = 0; x < sched.width; ++x)
      if (sched.in_acs(y, x) || sched.on_lattice(y, x)) m.set(y, x, true);
  m.update_acceleration();
  return m;
}

SamplingMask full_mask(int h, int w) {
  SamplingMask m(h, w);
  std::fill(m.mask.begin(), m.mask.end(), uint8_t{1});
  m.vs = 0;
  m.update_acceleration();
  return m;
}

KSpaceFrame forward_project(const MultiCoilImage& x, const SamplingMask& mask) {
  if (x.height != mask.height || x.width != mask.width)
    throw contract_error("forward_project: image/mask shape mismatch");
  KSpaceFrame k(x.coils, x.height, x.width, x.frame_index);
  k.mask = mask;
  const size_t plane = static_cast<size_t>(x.height) * x.width;
  for (int c = 0; c < x.coils; ++c) {
    fft2_centered(x.data.data() + c * plane, k.data.data() + c * plane, x.height, x.width, false);
    for (size_t i = 0; i < plane; ++i)
      if (!mask.mask[i]) k.data[c * plane + i] = 0.0;
  }
  return k;
}

MultiCoilImage inverse_fft(const KSpaceFrame& k) {
  MultiCoilImage y(k.coils, k.height, k.width, ImageRole::aliased, k.frame_index);
  const size_t plane = static_cast<size_t>(k.height) * k.width;
  for (int c = 0; c < k.coils; ++c)
    fft2_centered(k.data.data() + c * plane, y.data.data() + c * plane, k.height, k.width, true);
  return y;
}

MultiCoilImage aliased_recon(const MultiCoilImage& x, const SamplingMask& mask) {
  MultiCoilImage y = inverse_fft(forward_project(x, mask));
  y.frame_index = x.frame_index;
  y.role = ImageRole::aliased;
  return y;
}

KSpaceFrame view_share_combine(const std::vector<KSpaceFrame>& frames,
                               const SamplingSchedule& sched, int target_frame, int vs) {
  if (vs < 1 || vs > sched.b_interleaves)
    throw parameter_error("view_share_combine: vs out of range");
  std::map<int, const KSpaceFrame*> by_index;
  for (const auto& f : frames) by_index[f.frame_index] = &f;
  auto frame_at = [&](int t) -> const KSpaceFrame& {
    auto it = by_index.find(t);
    if (it == by_index.end()) throw parameter_error("view_share_combine: missing frame");
    return *it->second;
  };
  const KSpaceFrame& target = frame_at(target_frame);
  if (vs == 1) return target;

  // Source frames in nearest-first order, ties toward the earlier frame.
  std::vector<int> order;
  for (int d = 0; d < sched.num_frames; ++d) {
    if (target_frame - d >= 0) order.push_back(target_frame - d);
    if (d > 0 && target_frame + d < sched.num_frames) order.push_back(target_frame + d);
  }

  std::vector<const KSpaceFrame*> selected;
  std::vector<bool> sub_taken(sched.b_interleaves, false);
  int subs = 0;
  bool acs_taken = false;
  for (int t : order) {
    if (by_index.find(t) == by_index.end()) continue;
    const int sub = sched.frame_subset[t];
    if (sub < 0) {
      if (!acs_taken) {
        selected.push_back(&frame_at(t));
        acs_taken = true;
      }
    } else if (!sub_taken[sub] && subs < vs) {
      sub_taken[sub] = true;
      ++subs;
      selected.push_back(&frame_at(t));
    }
    if (acs_taken && subs == vs) break;
  }
  if (subs < vs || !acs_taken)
    throw parameter_error("view_share_combine: not enough frames for the requested view sharing");

  const KSpaceFrame& first = *selected.front();
  KSpaceFrame out(first.coils, first.height, first.width, target_frame);
  out.mask = SamplingMask(first.height, first.width);
  out.mask.vs = vs;
  const size_t plane = static_cast<size_t>(first.height) * first.width;

  // Disjointness outside the ACS block is a contract: each selected frame may
  // only overlap previously written samples inside the central block.
  std::vector<uint8_t> filled(plane, 0);
  for (const KSpaceFrame* f : selected) {
    if (f->coils != first.coils || f->height != first.height || f->width != first.width)
      throw contract_error("view_share_combine: frame shape mismatch");
    for (int y = 0; y < first.height; ++y) {
      for (int x = 0; x < first.width; ++x) {
        const size_t i = static_cast<size_t>(y) * first.width + x;
        if (!f->mask.mask[i]) continue;
        if (filled[i]) {
          if (!sched.in_acs(y, x))
            throw contract_error("view_share_combine: overlapping periphery subsets");
          continue;  // nearest frame already wrote this sample
        }
        filled[i] = 1;
        out.mask.mask[i] = 1;
        for (int c = 0; c < first.coils; ++c) out.data[c * plane + i] = f->data[c * plane + i];
      }
    }
  }
  out.mask.update_acceleration();
  return out;
}

}  // namespace tmra

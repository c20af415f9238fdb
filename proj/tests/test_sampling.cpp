#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "tmra/errors.hpp"
#include "tmra/rng.hpp"
#include "tmra/sampling.hpp"

using namespace tmra;

namespace {

MultiCoilImage random_image(int c, int h, int w, uint64_t seed) {
  RngStream rng(seed);
  MultiCoilImage img(c, h, w);
  for (auto& v : img.data) v = cplx(rng.normal(), rng.normal());
  return img;
}

cplx vdot(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  cplx acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

}  // namespace

TEST_CASE("schedule partitions the periphery lattice into disjoint near-equal subsets") {
  const auto s = build_schedule(96, 96, 12, 3, 2, 20, 5);

  // brute-force count of lattice + ACS points by the congruence conditions
  size_t lattice_acs = 0, periphery = 0;
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x) {
      const bool on_lat = (y % 3 == s.phase_y()) && (x % 2 == s.phase_z());
      if (on_lat || s.in_acs(y, x)) ++lattice_acs;
      if (on_lat && !s.in_acs(y, x)) ++periphery;
    }

  std::set<int> all;
  size_t total = 0, min_size = SIZE_MAX, max_size = 0;
  for (const auto& sub : s.periphery_subsets) {
    total += sub.size();
    min_size = std::min(min_size, sub.size());
    max_size = std::max(max_size, sub.size());
    for (int idx : sub) CHECK(all.insert(idx).second);  // pairwise disjoint
  }
  CHECK(total == periphery);
  CHECK(max_size - min_size <= 1);  // near-equal split

  // union of all B subsets + A block has exactly the lattice+ACS point count
  const auto full_vs = lattice_acs_mask(s);
  CHECK(full_vs.count() == lattice_acs);

  // single interleave swallows the whole periphery
  const auto s1 = build_schedule(96, 96, 12, 3, 2, 20, 1);
  CHECK(s1.periphery_subsets.size() == 1);
  CHECK(s1.periphery_subsets[0].size() == periphery);
}

TEST_CASE("masks are nested in vs and hit the uniform pattern at max vs") {
  const auto s = build_schedule(64, 64, 12, 3, 2, 24, 5);
  for (int frame : {0, 1, 7, 23}) {
    const auto m2 = mask_for_frame(s, frame, 2);
    const auto m3 = mask_for_frame(s, frame, 3);
    const auto m5 = mask_for_frame(s, frame, 5);
    CHECK(m2.subset_of(m3));
    CHECK(m3.subset_of(m5));
    CHECK(m5.same_pattern(lattice_acs_mask(s)));
    CHECK(m2.count() < m3.count());
    CHECK(m3.count() < m5.count());
    CHECK(m2.acceleration > m5.acceleration);
  }
  CHECK_THROWS_AS(mask_for_frame(s, 0, 0), parameter_error);
  CHECK_THROWS_AS(mask_for_frame(s, 0, 6), parameter_error);
  CHECK_THROWS_AS(build_schedule(64, 64, 40, 3, 2, 24, 5), parameter_error);
}

TEST_CASE("masks are idempotent projections") {
  const auto s = build_schedule(64, 64, 8, 3, 2, 12, 3);
  const auto m = mask_for_frame(s, 3, 2);
  const auto x = random_image(2, 64, 64, 11);
  const auto y1 = aliased_recon(x, m);
  const auto y2 = aliased_recon(y1, m);
  double err = 0, ref = 0;
  for (size_t i = 0; i < y1.data.size(); ++i) {
    err += std::norm(y1.data[i] - y2.data[i]);
    ref += std::norm(y1.data[i]);
  }
  CHECK(std::sqrt(err / ref) < 1e-12);
}

TEST_CASE("forward_project satisfies the adjoint identity") {
  RngStream rng(99);
  const auto s = build_schedule(32, 32, 6, 3, 2, 10, 3);
  const auto m = mask_for_frame(s, 2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_image(3, 32, 32, 1000 + trial);
    KSpaceFrame k(3, 32, 32);
    k.mask = m;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y)
        for (int xx = 0; xx < 32; ++xx)
          k.at(c, y, xx) = m.at(y, xx) ? cplx(rng.normal(), rng.normal()) : 0.0;

    const auto fx = forward_project(x, m);
    const auto adj = inverse_fft(k);  // k already lives on the mask
    const cplx lhs = vdot(fx.data, k.data);
    const cplx rhs = vdot(x.data, adj.data);
    CHECK(std::abs(lhs - rhs) / std::abs(rhs) < 1e-10);
  }
}

TEST_CASE("full-mask aliasing is the identity and constant images map to DC") {
  const auto x = random_image(2, 24, 24, 3);
  const auto y = aliased_recon(x, full_mask(24, 24));
  double err = 0, ref = 0;
  for (size_t i = 0; i < x.data.size(); ++i) {
    err += std::norm(x.data[i] - y.data[i]);
    ref += std::norm(x.data[i]);
  }
  CHECK(std::sqrt(err / ref) < 1e-12);

  MultiCoilImage ones(1, 16, 16);
  for (auto& v : ones.data) v = 1.0;
  const auto k = forward_project(ones, full_mask(16, 16));
  CHECK(std::abs(k.at(0, 8, 8)) == doctest::Approx(16.0));
  CHECK(std::abs(k.at(0, 8, 9)) < 1e-12);
}

TEST_CASE("pure lattice mask replicates a point source at the alias spacing") {
  const int h = 32, w = 32, ry = 4, rz = 2;
  SamplingMask lat(h, w);
  for (int y = (h / 2) % ry; y < h; y += ry)
    for (int x = (w / 2) % rz; x < w; x += rz) lat.set(y, x, true);
  lat.update_acceleration();

  MultiCoilImage x(1, h, w);
  const int sy = 13, sx = 9;
  x.at(0, sy, sx) = 1.0;
  const auto y = aliased_recon(x, lat);

  // independent oracle: direct DFT of the sampled comb
  std::vector<cplx> expect(static_cast<size_t>(h) * w, 0.0);
  for (int yy = 0; yy < h; ++yy)
    for (int xx = 0; xx < w; ++xx) {
      cplx acc = 0.0;
      for (int ky = 0; ky < h; ++ky)
        for (int kx = 0; kx < w; ++kx) {
          if (!lat.at(ky, kx)) continue;
          const double fy = ky - h / 2, fx = kx - w / 2;
          const double ph = 2.0 * M_PI * (fy * (yy - sy) / h + fx * (xx - sx) / w);
          acc += cplx(std::cos(ph), std::sin(ph));
        }
      expect[yy * w + xx] = acc / static_cast<double>(h * w);
    }
  for (int yy = 0; yy < h; ++yy)
    for (int xx = 0; xx < w; ++xx)
      CHECK(std::abs(y.at(0, yy, xx) - expect[yy * w + xx]) < 1e-10);

  // replicas at spacing h/ry, w/rz
  for (int ay = 0; ay < ry; ++ay)
    for (int ax = 0; ax < rz; ++ax) {
      const int py = (sy + ay * h / ry) % h, px = (sx + ax * w / rz) % w;
      CHECK(std::abs(y.at(0, py, px)) > 0.1 / (ry * rz));
    }
}

TEST_CASE("view_share_combine merges neighbors; static data gives the lattice k-space") {
  const auto s = build_schedule(48, 48, 6, 3, 2, 16, 3);
  const auto base = random_image(2, 48, 48, 77);

  std::vector<KSpaceFrame> frames;
  for (int t = 0; t < s.num_frames; ++t) {
    MultiCoilImage xt = base;
    xt.frame_index = t;
    frames.push_back(forward_project(xt, acquisition_mask(s, t)));
  }

  const auto combined = view_share_combine(frames, s, 8, 3);
  CHECK(combined.mask.same_pattern(lattice_acs_mask(s)));
  const auto oracle = forward_project(base, lattice_acs_mask(s));
  double err = 0, ref = 0;
  for (size_t i = 0; i < oracle.data.size(); ++i) {
    err += std::norm(combined.data[i] - oracle.data[i]);
    ref += std::norm(oracle.data[i]);
  }
  CHECK(std::sqrt(err / ref) < 1e-12);

  // vs=1 returns the target frame unchanged
  const auto same = view_share_combine(frames, s, 5, 1);
  CHECK(same.mask.same_pattern(frames[5].mask));
  CHECK(same.data == frames[5].data);
}

TEST_CASE("view_share_combine on dynamic data differs from single-frame sampling") {
  const auto s = build_schedule(48, 48, 6, 3, 2, 16, 3);
  // step change between frame 7 and 8
  std::vector<KSpaceFrame> frames;
  for (int t = 0; t < s.num_frames; ++t) {
    MultiCoilImage xt = random_image(1, 48, 48, 42);  // same base
    if (t >= 8)
      for (auto& v : xt.data) v *= 2.0;
    xt.frame_index = t;
    frames.push_back(forward_project(xt, acquisition_mask(s, t)));
  }
  const auto combined = view_share_combine(frames, s, 8, 3);

  MultiCoilImage x8 = random_image(1, 48, 48, 42);
  for (auto& v : x8.data) v *= 2.0;
  const auto single = forward_project(x8, lattice_acs_mask(s));
  double diff = 0;
  for (size_t i = 0; i < single.data.size(); ++i) diff += std::norm(combined.data[i] - single.data[i]);
  CHECK(diff > 1e-6);
}

TEST_CASE("combine rejects overlapping periphery masks") {
  const auto s = build_schedule(48, 48, 6, 3, 2, 16, 3);
  const auto base = random_image(1, 48, 48, 5);
  std::vector<KSpaceFrame> frames;
  for (int t = 0; t < 4; ++t) {
    MultiCoilImage xt = base;
    xt.frame_index = t;
    // malformed: every frame claims the full lattice pattern
    frames.push_back(forward_project(xt, lattice_acs_mask(s)));
  }
  CHECK_THROWS_AS(view_share_combine(frames, s, 1, 2), contract_error);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "tmra/errors.hpp"
#include "tmra/grappa.hpp"
#include "tmra/metrics.hpp"
#include "tmra/phantom.hpp"
#include "tmra/rng.hpp"

using namespace tmra;

namespace {

// k-space where every off-lattice point is exactly the planted combination of
// its 5x5 sampled-lattice neighborhood (where the stencil fits the grid).
struct Planted {
  KSpaceFrame full;         // complete synthetic k-space
  KSpaceFrame undersampled; // restricted to lattice + ACS
  std::vector<Eigen::MatrixXcd> weights;  // per offset class
  SamplingSchedule sched;
};

Planted make_planted(int h, int w, int C, int acs_half, int ry, int rz, uint64_t seed) {
  const auto sched = build_schedule(h, w, acs_half, ry, rz, 4, 2);
  RngStream rng(seed);
  const int taps = C * 25;

  std::vector<Eigen::MatrixXcd> weights;
  for (int cls = 0; cls < ry * rz - 1; ++cls) {
    Eigen::MatrixXcd W(taps, C);
    for (int r = 0; r < taps; ++r)
      for (int c = 0; c < C; ++c) W(r, c) = cplx(rng.normal(), rng.normal()) / taps;
    weights.push_back(W);
  }

  KSpaceFrame full(C, h, w);
  full.mask = full_mask(h, w);
  const size_t plane = static_cast<size_t>(h) * w;
  const int py = sched.phase_y(), pz = sched.phase_z();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((y % ry == py) && (x % rz == pz))
        for (int c = 0; c < C; ++c)
          full.data[c * plane + static_cast<size_t>(y) * w + x] = cplx(rng.normal(), rng.normal());

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int dy = ((y - py) % ry + ry) % ry, dz = ((x - pz) % rz + rz) % rz;
      if (dy == 0 && dz == 0) continue;
      Eigen::RowVectorXcd src(taps);
      bool inside = true;
      int col = 0;
      for (int c = 0; c < C && inside; ++c)
        for (int p = 0; p < 5 && inside; ++p)
          for (int q = 0; q < 5; ++q) {
            const int sy = y + (p - 2) * ry - dy, sx = x + (q - 2) * rz - dz;
            if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
              inside = false;
              break;
            }
            src(col++) = full.data[c * plane + static_cast<size_t>(sy) * w + sx];
          }
      if (!inside) continue;
      const Eigen::RowVectorXcd vals = src * weights[dy * rz + dz - 1];
      for (int c = 0; c < C; ++c)
        full.data[c * plane + static_cast<size_t>(y) * w + x] = vals(c);
    }
  }

  Planted out;
  out.sched = sched;
  out.full = full;
  out.undersampled = full;
  out.undersampled.mask = lattice_acs_mask(sched);
  for (int c = 0; c < C; ++c)
    for (size_t i = 0; i < plane; ++i)
      if (!out.undersampled.mask.mask[i]) out.undersampled.data[c * plane + i] = 0.0;
  out.weights = std::move(weights);
  return out;
}

}  // namespace

TEST_CASE("calibration recovers a planted kernel and interpolation is exact") {
  // geometry chosen so the per-class system is overdetermined
  const int h = 96, w = 96, C = 2, acs_half = 16;
  const auto planted = make_planted(h, w, C, acs_half, 3, 2, 21);

  const auto kernel =
      calibrate(planted.undersampled, acs_region(planted.sched), 3, 2, 5, 5, /*lambda=*/0.0);
  REQUIRE(kernel.weights.size() == planted.weights.size());
  for (size_t cls = 0; cls < kernel.weights.size(); ++cls) {
    const double err = (kernel.weights[cls] - planted.weights[cls]).norm();
    const double ref = planted.weights[cls].norm();
    CHECK(err / ref < 1e-4);
  }

  const auto filled = interpolate(planted.undersampled, kernel);
  const size_t plane = static_cast<size_t>(h) * w;
  double num = 0, den = 0;
  const int margin = 12;  // stencil must stay inside the grid for exactness
  for (int c = 0; c < C; ++c)
    for (int y = margin; y < h - margin; ++y)
      for (int x = margin; x < w - margin; ++x) {
        const size_t i = static_cast<size_t>(y) * w + x;
        num += std::norm(filled.data[c * plane + i] - planted.full.data[c * plane + i]);
        den += std::norm(planted.full.data[c * plane + i]);
      }
  CHECK(std::sqrt(num / den) < 1e-4);
}

TEST_CASE("acquired samples pass through bit-exact and interpolation is linear") {
  const auto planted = make_planted(64, 64, 2, 12, 3, 2, 4);
  const auto kernel =
      calibrate(planted.undersampled, acs_region(planted.sched), 3, 2, 5, 5, 1e-6);
  const auto filled = interpolate(planted.undersampled, kernel);
  const size_t plane = 64 * 64;
  for (int c = 0; c < 2; ++c)
    for (size_t i = 0; i < plane; ++i)
      if (planted.undersampled.mask.mask[i])
        CHECK(filled.data[c * plane + i] == planted.undersampled.data[c * plane + i]);

  KSpaceFrame scaled = planted.undersampled;
  const cplx a(2.0, -1.0);
  for (auto& v : scaled.data) v *= a;
  const auto filled2 = interpolate(scaled, kernel);
  for (size_t i = 0; i < filled2.data.size(); ++i)
    CHECK(std::abs(filled2.data[i] - a * filled.data[i]) < 1e-9 * (1.0 + std::abs(filled.data[i])));
}

TEST_CASE("ridge limit drives weights to zero and tiny ACS fails") {
  const auto planted = make_planted(64, 64, 2, 12, 3, 2, 7);
  const auto kernel =
      calibrate(planted.undersampled, acs_region(planted.sched), 3, 2, 5, 5, 1e12);
  for (const auto& W : kernel.weights) CHECK(W.norm() < 1e-6);

  // ACS smaller than the kernel footprint
  AcsRegion tiny{30, 36, 30, 36};
  CHECK_THROWS_AS(calibrate(planted.undersampled, tiny, 3, 2, 5, 5, 1e-4), calibration_error);
}

TEST_CASE("lambda 0 on an underdetermined system surfaces a numeric error") {
  // C=4 with a 24x24 ACS gives fewer equations than the 100 taps per class
  const auto planted = make_planted(64, 64, 4, 12, 3, 2, 3);
  CHECK_THROWS_AS(
      calibrate(planted.undersampled, acs_region(planted.sched), 3, 2, 5, 5, 0.0),
      numeric_error);
}

TEST_CASE("mask/kernel mismatch is rejected") {
  const auto planted = make_planted(64, 64, 2, 12, 3, 2, 8);
  const auto kernel =
      calibrate(planted.undersampled, acs_region(planted.sched), 3, 2, 5, 5, 1e-4);
  KSpaceFrame wrong = planted.undersampled;
  wrong.mask = full_mask(64, 64);
  CHECK_THROWS_AS(interpolate(wrong, kernel), contract_error);
}

TEST_CASE("kernels serialize and reload exactly") {
  const auto planted = make_planted(64, 64, 2, 12, 3, 2, 10);
  const auto kernel =
      calibrate(planted.undersampled, acs_region(planted.sched), 3, 2, 5, 5, 1e-4);
  const auto path = std::filesystem::temp_directory_path() / "tmra_kernel_test.json";
  save_kernel(kernel, path.string());
  const auto back = load_kernel(path.string());
  REQUIRE(back.weights.size() == kernel.weights.size());
  for (size_t i = 0; i < kernel.weights.size(); ++i)
    CHECK((back.weights[i] - kernel.weights[i]).norm() == 0.0);
  CHECK(back.expected_mask().same_pattern(kernel.expected_mask()));
  std::filesystem::remove(path);
}

TEST_CASE("grappa reconstructs a static smooth phantom above 30 dB") {
  PhantomSpec spec;
  spec.grid_height = 64;
  spec.grid_width = 64;
  spec.num_frames = 12;
  spec.num_coils = 4;
  spec.noise_std = 0.0;
  spec.seed = 33;
  Structure body;
  body.center_y = 32;
  body.center_x = 32;
  body.axis_y = 24;
  body.axis_x = 20;
  body.baseline = 1.0;
  spec.structures.push_back(body);
  Structure blob;
  blob.center_y = 24;
  blob.center_x = 38;
  blob.axis_y = 6;
  blob.axis_x = 5;
  blob.baseline = 0.6;
  spec.structures.push_back(blob);

  const auto seq = make_phantom_sequence(spec);
  const auto sched = build_schedule(64, 64, 12, 3, 2, 12, 5);
  std::vector<KSpaceFrame> frames;
  for (int t = 0; t < sched.num_frames; ++t)
    frames.push_back(forward_project(seq.frames[t], acquisition_mask(sched, t)));

  const auto recon = grappa_reconstruct(frames, sched, 6);
  CHECK(recon.role == ImageRole::ground_truth);
  const double p = psnr(ssos(recon), ssos(seq.frames[6]));
  MESSAGE("grappa static phantom psnr = ", p, " dB");
  CHECK(p >= 30.0);

  // dynamic step-change phantom blurs: error at the change frame exceeds the
  // static error
  PhantomSpec dyn = spec;
  dyn.structures[1].bolus = {5.0, 1.2, 1.0, 2.0};  // sharp enhancement
  const auto dseq = make_phantom_sequence(dyn);
  std::vector<KSpaceFrame> dframes;
  for (int t = 0; t < sched.num_frames; ++t)
    dframes.push_back(forward_project(dseq.frames[t], acquisition_mask(sched, t)));
  const auto drecon = grappa_reconstruct(dframes, sched, 6);
  const double dp = psnr(ssos(drecon), ssos(dseq.frames[6]));
  MESSAGE("grappa dynamic phantom psnr = ", dp, " dB");
  CHECK(dp < p);
}

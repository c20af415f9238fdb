#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "tmra/errors.hpp"
#include "tmra/metrics.hpp"
#include "tmra/phantom.hpp"
#include "tmra/rng.hpp"

using namespace tmra;

namespace {

MultiCoilImage random_image(int c, int h, int w, uint64_t seed) {
  RngStream rng(seed);
  MultiCoilImage img(c, h, w);
  for (auto& v : img.data) v = cplx(rng.normal(), rng.normal());
  return img;
}

}  // namespace

TEST_CASE("ssos basics") {
  MultiCoilImage one(1, 2, 2);
  one.at(0, 0, 0) = cplx(3.0, -4.0);
  CHECK(ssos(one).at(0, 0) == doctest::Approx(5.0));

  MultiCoilImage two(2, 1, 1);
  two.at(0, 0, 0) = 3.0;
  two.at(1, 0, 0) = 4.0;
  CHECK(ssos(two).at(0, 0) == doctest::Approx(5.0));

  // global phase invariance
  auto x = random_image(3, 6, 6, 1);
  auto y = x;
  const cplx phase = std::polar(1.0, 0.83);
  for (auto& v : y.data) v *= phase;
  const auto zx = ssos(x), zy = ssos(y);
  for (size_t i = 0; i < zx.data.size(); ++i) CHECK(zx.data[i] == doctest::Approx(zy.data[i]));
}

TEST_CASE("d_image matches the hand case and is a pseudometric") {
  MultiCoilImage a(1, 1, 2), b(1, 1, 2);
  a.at(0, 0, 0) = 1.0;
  a.at(0, 0, 1) = 2.0;
  b.at(0, 0, 0) = 0.0;
  b.at(0, 0, 1) = 2.0;
  CHECK(d_image(a, b) == doctest::Approx(1.0));
  CHECK(d_image(a, a) == 0.0);
  CHECK(d_image(a, b) == d_image(b, a));

  for (int trial = 0; trial < 30; ++trial) {
    const auto x = random_image(2, 5, 5, 100 + trial);
    const auto y = random_image(2, 5, 5, 200 + trial);
    const auto z = random_image(2, 5, 5, 300 + trial);
    for (NormKind nk : {NormKind::L1, NormKind::L2}) {
      CHECK(d_image(x, y, nk) >= 0.0);
      CHECK(d_image(x, y, nk) == doctest::Approx(d_image(y, x, nk)));
      CHECK(d_image(x, z, nk) <= d_image(x, y, nk) + d_image(y, z, nk) + 1e-9);
    }
  }

  MultiCoilImage c(1, 2, 2);
  CHECK_THROWS_AS(d_image(a, c), contract_error);
}

TEST_CASE("d_freq restricts to the mask and handles single bins") {
  KSpaceFrame a(1, 4, 4), b(1, 4, 4);
  SamplingMask m(4, 4);
  m.set(1, 2, true);
  a.mask = m;
  b.mask = m;
  a.at(0, 1, 2) = cplx(3.0, 4.0);
  b.at(0, 1, 2) = 0.0;
  CHECK(d_freq(a, b) == doctest::Approx(5.0));
  CHECK(d_freq(a, a) == 0.0);

  // off-mask differences are ignored (mask invariant violated on purpose)
  KSpaceFrame c = a, d = b;
  c.data[0] = cplx(9.0, 9.0);
  CHECK(d_freq(c, d) == doctest::Approx(5.0));

  KSpaceFrame e(1, 4, 4);
  e.mask = SamplingMask(4, 4);
  CHECK_THROWS_AS(d_freq(a, e), contract_error);

  // multi-coil: per-coil Frobenius norms add
  KSpaceFrame f(2, 4, 4), g(2, 4, 4);
  f.mask = m;
  g.mask = m;
  f.at(0, 1, 2) = cplx(3.0, 4.0);
  f.at(1, 1, 2) = cplx(0.0, 2.0);
  CHECK(d_freq(f, g) == doctest::Approx(7.0));
}

TEST_CASE("psnr formula, sentinel, and scale invariance") {
  SSoSImage ref(1, 2), recon(1, 2);
  ref.data = {1.0, 0.0};
  recon.data = {0.0, 0.0};
  CHECK(psnr(recon, ref) == doctest::Approx(10.0 * std::log10(2.0)));

  CHECK(std::isinf(psnr(ref, ref)));

  SSoSImage ref2 = ref, recon2 = recon;
  for (auto& v : ref2.data) v *= 7.3;
  for (auto& v : recon2.data) v *= 7.3;
  CHECK(psnr(recon2, ref2) == doctest::Approx(psnr(recon, ref)));
}

TEST_CASE("ssim basics") {
  SSoSImage img(10, 10);
  RngStream rng(4);
  for (auto& v : img.data) v = std::abs(rng.normal()) + 0.1;
  CHECK(ssim(img, img) == doctest::Approx(1.0));

  SSoSImage flat(10, 10);
  for (auto& v : flat.data) v = 2.5;
  CHECK(ssim(flat, flat) == doctest::Approx(1.0));

  SSoSImage other(10, 10);
  for (size_t i = 0; i < other.data.size(); ++i) other.data[i] = img.data[i] + 0.5 * rng.normal();
  CHECK(ssim(other, img) < 1.0);
  CHECK(ssim(other, img) >= -1.0);

  CHECK_THROWS_AS(ssim(img, img, 0.01, 0.03, 11), parameter_error);
}

TEST_CASE("start_to_peak matches a brute-force scan of the bolus curve") {
  BolusParams p{4.0, 2.0, 1.8, 2.5};
  std::vector<double> series;
  for (int t = 0; t < 32; ++t) series.push_back(1.0 + bolus_curve(p, t));

  const int got = start_to_peak(series, 0.1);

  // independent brute force: argmax and first threshold crossing
  size_t peak = 0;
  for (size_t t = 1; t < series.size(); ++t)
    if (series[t] > series[peak]) peak = t;
  int onset = -1;
  double run = series[0];
  for (size_t t = 1; t <= peak; ++t) {
    const double base = run / t;
    if (series[t] > base + 0.1 * (series[peak] - base)) {
      onset = static_cast<int>(t);
      break;
    }
    run += series[t];
  }
  REQUIRE(onset >= 0);
  CHECK(got == static_cast<int>(peak) - onset);

  // shifting the whole series in time leaves the distance unchanged
  BolusParams shifted = p;
  shifted.t0 = p.t0 + 6.0;
  std::vector<double> series2;
  for (int t = 0; t < 38; ++t) series2.push_back(1.0 + bolus_curve(shifted, t));
  CHECK(start_to_peak(series2, 0.1) == got);

  std::vector<double> constant(16, 3.0);
  CHECK_THROWS_AS(start_to_peak(constant, 0.1), undefined_dynamics_error);
}

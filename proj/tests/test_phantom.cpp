#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tmra/errors.hpp"
#include "tmra/phantom.hpp"

using namespace tmra;

namespace {

PhantomSpec small_spec() {
  PhantomSpec spec;
  spec.grid_height = 32;
  spec.grid_width = 32;
  spec.num_frames = 16;
  spec.num_coils = 3;
  spec.noise_std = 0.0;
  spec.seed = 9;
  Structure s;
  s.center_y = 16;
  s.center_x = 14;
  s.axis_y = 6;
  s.axis_x = 9;
  s.baseline = 0.8;
  s.bolus = {3.0, 2.0, 1.5, 1.2};
  spec.structures.push_back(s);
  return spec;
}

}  // namespace

TEST_CASE("bolus curve is zero before arrival and peaks at t0 + a*b") {
  BolusParams p{4.0, 2.5, 1.7, 3.0};
  CHECK(bolus_curve(p, 0.0) == 0.0);
  CHECK(bolus_curve(p, 3.999) == 0.0);
  CHECK(bolus_curve(p, p.t0 + p.shape_a * p.scale_b) == doctest::Approx(p.amplitude));

  // dense grid search confirms the analytic argmax
  double best_t = 0, best_v = -1;
  for (double t = 0; t < 40.0; t += 1e-3) {
    const double v = bolus_curve(p, t);
    if (v > best_v) {
      best_v = v;
      best_t = t;
    }
  }
  CHECK(best_t == doctest::Approx(p.t0 + p.shape_a * p.scale_b).epsilon(1e-3));
  CHECK(best_v == doctest::Approx(p.amplitude).epsilon(1e-6));

  BolusParams zero{4.0, 2.5, 1.7, 0.0};
  CHECK(bolus_curve(zero, 10.0) == 0.0);
  BolusParams bad{4.0, -1.0, 1.7, 1.0};
  CHECK_THROWS_AS(bolus_curve(bad, 5.0), parameter_error);
}

TEST_CASE("coil sensitivities are normalized and reproducible") {
  const auto s = make_coil_sensitivities(24, 24, 4, 0.6, 123);
  CHECK(s.normalized);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) {
      double ss = 0;
      for (int c = 0; c < 4; ++c) ss += std::norm(s.at(c, y, x));
      CHECK(std::abs(ss - 1.0) < 1e-6);
    }

  const auto s2 = make_coil_sensitivities(24, 24, 4, 0.6, 123);
  CHECK(s.maps == s2.maps);
  const auto s3 = make_coil_sensitivities(24, 24, 4, 0.6, 124);
  CHECK(s.maps != s3.maps);

  const auto one = make_coil_sensitivities(16, 16, 1, 0.6, 5);
  for (const auto& v : one.maps) CHECK(std::abs(std::abs(v) - 1.0) < 1e-9);
}

TEST_CASE("phantom sequences are deterministic and dynamics follow the bolus") {
  const auto spec = small_spec();
  const auto a = make_phantom_sequence(spec);
  const auto b = make_phantom_sequence(spec);
  REQUIRE(a.frames.size() == 16);
  for (size_t t = 0; t < a.frames.size(); ++t) CHECK(a.frames[t].data == b.frames[t].data);

  // structure-mean time series peaks at round(t0 + a*b)
  const auto roi = structure_mask(spec.structures[0], 32, 32);
  std::vector<double> series;
  for (const auto& f : a.scalar_frames) {
    double m = 0;
    size_t n = 0;
    for (size_t i = 0; i < f.size(); ++i)
      if (roi[i]) {
        m += f[i];
        ++n;
      }
    series.push_back(m / n);
  }
  size_t best = 0;
  for (size_t t = 1; t < series.size(); ++t)
    if (series[t] > series[best]) best = t;
  const double analytic = spec.structures[0].bolus.t0 +
                          spec.structures[0].bolus.shape_a * spec.structures[0].bolus.scale_b;
  CHECK(std::abs(static_cast<double>(best) - analytic) <= 0.5 + 1e-9);
}

TEST_CASE("zero-amplitude boluses give a static phantom") {
  auto spec = small_spec();
  spec.structures[0].bolus.amplitude = 0.0;
  const auto seq = make_phantom_sequence(spec);
  for (size_t t = 1; t < seq.frames.size(); ++t) CHECK(seq.frames[t].data == seq.frames[0].data);
}

TEST_CASE("all-ones sensitivities reproduce the scalar image on one coil") {
  auto spec = small_spec();
  spec.num_coils = 1;
  CoilSensitivities ones(1, 32, 32);
  for (auto& v : ones.maps) v = 1.0;
  ones.normalized = true;
  const auto seq = make_phantom_sequence(spec, &ones);
  for (size_t t = 0; t < seq.frames.size(); ++t)
    for (size_t i = 0; i < seq.scalar_frames[t].size(); ++i) {
      CHECK(seq.frames[t].data[i].real() == doctest::Approx(seq.scalar_frames[t][i]));
      CHECK(seq.frames[t].data[i].imag() == 0.0);
    }
}

TEST_CASE("invalid specs are rejected") {
  auto spec = small_spec();
  spec.grid_height = 8;
  CHECK_THROWS_AS(make_phantom_sequence(spec), parameter_error);
  spec = small_spec();
  spec.structures[0].axis_x = 0.0;
  CHECK_THROWS_AS(make_phantom_sequence(spec), parameter_error);
}

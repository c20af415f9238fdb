#include "tmra/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <vector>

#include "tmra/errors.hpp"

namespace tmra {
namespace {

// FFTW plans are cached per (h, w, direction). Planning is not thread safe,
// execution via fftw_execute_dft on caller-owned buffers is.
struct PlanCache {
  std::mutex mu;
  std::map<std::tuple<int, int, int>, fftw_plan> plans;

  fftw_plan get(int h, int w, int sign) {
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_tuple(h, w, sign);
    auto it = plans.find(key);
    if (it != plans.end()) return it->second;
    std::vector<fftw_complex> tmp(static_cast<size_t>(h) * w);
    fftw_plan p = fftw_plan_dft_2d(h, w, tmp.data(), tmp.data(), sign, FFTW_ESTIMATE);
    plans.emplace(key, p);
    return p;
  }
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

}  // namespace

void fft2_centered(const std::complex<double>* in, std::complex<double>* out, int h, int w,
                   bool inverse) {
  if (h < 1 || w < 1) throw parameter_error("fft2_centered: non-positive shape");
  const size_t n = static_cast<size_t>(h) * w;
  std::vector<std::complex<double>> buf(n);

  // ifftshift on input, transform, fftshift on output; for even dims the two
  // shifts coincide, for odd dims they are distinct inverses.
  const int sy = (h + 1) / 2, sx = (w + 1) / 2;  // ifftshift offsets
  for (int y = 0; y < h; ++y) {
    const int ys = (y + sy) % h;
    for (int x = 0; x < w; ++x) {
      buf[static_cast<size_t>(y) * w + x] = in[static_cast<size_t>(ys) * w + (x + sx) % w];
    }
  }

  fftw_plan plan = cache().get(h, w, inverse ? FFTW_BACKWARD : FFTW_FORWARD);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(buf.data()),
                   reinterpret_cast<fftw_complex*>(buf.data()));

  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const int ty = h / 2, tx = w / 2;  // fftshift offsets
  for (int y = 0; y < h; ++y) {
    const int yd = (y + ty) % h;
    for (int x = 0; x < w; ++x) {
      out[static_cast<size_t>(yd) * w + (x + tx) % w] = buf[static_cast<size_t>(y) * w + x] * scale;
    }
  }
}

}  // namespace tmra

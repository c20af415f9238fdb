#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "tmra/errors.hpp"

namespace tmra {

using cplx = std::complex<double>;

enum class ImageRole : uint8_t { ground_truth, aliased, reconstruction };

std::string to_string(ImageRole role);
ImageRole role_from_string(const std::string& s);

/// Complex image stack over C receiver coils for one temporal frame.
/// data is row-major [C, H, W].
struct MultiCoilImage {
  int coils = 0;
  int height = 0;
  int width = 0;
  int frame_index = 0;
  ImageRole role = ImageRole::ground_truth;
  std::vector<cplx> data;

  MultiCoilImage() = default;
  MultiCoilImage(int c, int h, int w, ImageRole r = ImageRole::ground_truth, int frame = 0)
      : coils(c), height(h), width(w), frame_index(frame), role(r),
        data(static_cast<size_t>(c) * h * w) {
    if (c < 1 || h < 1 || w < 1) throw parameter_error("MultiCoilImage: non-positive shape");
  }

  size_t size() const { return data.size(); }
  cplx& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * height + y) * width + x]; }
  const cplx& at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }

  bool same_shape(const MultiCoilImage& o) const {
    return coils == o.coils && height == o.height && width == o.width;
  }

  bool all_finite() const {
    for (const auto& v : data)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }
};

/// Complex coil sensitivity maps [C, H, W].
struct CoilSensitivities {
  int coils = 0;
  int height = 0;
  int width = 0;
  bool normalized = false;
  std::vector<cplx> maps;

  CoilSensitivities() = default;
  CoilSensitivities(int c, int h, int w)
      : coils(c), height(h), width(w), maps(static_cast<size_t>(c) * h * w) {}

  cplx& at(int c, int y, int x) { return maps[(static_cast<size_t>(c) * height + y) * width + x]; }
  const cplx& at(int c, int y, int x) const {
    return maps[(static_cast<size_t>(c) * height + y) * width + x];
  }
};

}  // namespace tmra

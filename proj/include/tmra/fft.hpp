#pragma once

#include <complex>

namespace tmra {

/// Centered unitary 2-D DFT of one H x W plane.
///
/// Forward maps the image to k-space with the DC bin at (h/2, w/2); inverse
/// undoes it exactly. Both directions carry a 1/sqrt(h*w) factor so the
/// transform is unitary and the adjoint equals the inverse.
void fft2_centered(const std::complex<double>* in, std::complex<double>* out, int h, int w,
                   bool inverse);

}  // namespace tmra

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "fcs/tensor.hpp"

// Image-quality and spectral measures. Images are single planes (1×1×H×W)
// with intensities nominally in [0, 1].

namespace fcs {

inline constexpr double kPsnrCap = 99.0;

/// 10·log10(1 / MSE) with peak 1.0; kPsnrCap when MSE < 1e-10.
double psnr(const Tensor& x, const Tensor& y);

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean local SSIM over every fully contained Gaussian window.
double ssim(const Tensor& x, const Tensor& y, const SsimParams& params = {});

/// Mean |first difference| over adjacent pixel pairs straddling the grid
/// lines, divided by the mean over all other adjacent pairs. A flat image
/// yields 1; a flat interior with grid discontinuities yields num / 1e-12.
double blockiness_index(const Tensor& image, std::size_t grid = 33);

/// Unshifted 2-D DFT, row-major H×W bins. Computed as separable direct
/// transforms along rows then columns.
std::vector<std::complex<double>> dft2(const Tensor& image);

/// |DFT| with DC moved to (H/2, W/2).
Tensor dft2_magnitude(const Tensor& image);
/// log(1 + |DFT|), DC centered, min-max normalized to [0, 1].
Tensor dft2_log_magnitude(const Tensor& image);

/// Moves index (0, 0) to (H/2, W/2), rounding down.
Tensor fftshift(const Tensor& image);
/// Affine map of the values onto [0, 1]; constant input maps to 0.
Tensor minmax_normalize(const Tensor& image);

/// Share of non-DC spectral energy lying outside the centered box
/// |ku| <= cutoff·H, |kv| <= cutoff·W. Zero for constant images.
double highfreq_energy_ratio(const Tensor& image, double cutoff = 0.25);

}  // namespace fcs

#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include "fcs/autodiff.hpp"
#include "fcs/tensor.hpp"

namespace fcs {

inline constexpr std::size_t kDefaultBlockSize = 33;

/// Strided measurement convolution geometry. Padding is derived so an
/// H×W input with H, W multiples of the stride maps to (H/s)×(W/s).
struct ConvGeometry {
  std::size_t kernel = 32;
  std::size_t stride = 16;

  std::size_t pad() const { return (kernel - stride) / 2; }
  /// Requires kernel > stride (overlapping windows) and kernel − stride even.
  void validate() const;
  bool operator==(const ConvGeometry&) const = default;
};

/// m = max(1, round(rate · n)), rounding half away from zero.
std::size_t rows_for_rate(double rate, std::size_t n);
/// c = max(1, round(rate · stride²)).
std::size_t channels_for_rate(double rate, std::size_t stride);
void validate_rate(double rate);

/// m×n matrix (shape 1×1×m×n) of i.i.d. N(0, 1/m) entries.
Tensor gaussian_matrix(std::size_t m, std::size_t n, std::uint64_t seed);

/// Derives an independent stream seed from a base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Fixed random Gaussian block sensing matrix; never trained.
class GaussianBlockMeasurer {
 public:
  GaussianBlockMeasurer(double rate, std::uint64_t seed, std::size_t block_size = kDefaultBlockSize);

  const Parameter& phi() const { return phi_; }
  Parameter& phi() { return phi_; }
  std::size_t block_size() const { return block_size_; }
  std::size_t rows() const { return phi_.value.shape().h; }
  double nominal_rate() const { return rate_; }
  std::uint64_t seed() const { return seed_; }

 private:
  Parameter phi_;
  std::size_t block_size_;
  double rate_;
  std::uint64_t seed_;
};

/// Block sensing matrix learned jointly with the reconstruction.
class LearnedFCBlockMeasurer {
 public:
  LearnedFCBlockMeasurer(double rate, Rng& rng, std::size_t block_size = kDefaultBlockSize);

  const Parameter& phi() const { return phi_; }
  Parameter& phi() { return phi_; }
  std::size_t block_size() const { return block_size_; }
  std::size_t rows() const { return phi_.value.shape().h; }
  double nominal_rate() const { return rate_; }

 private:
  Parameter phi_;
  std::size_t block_size_;
  double rate_;
};

/// Whole-image measurement by a bias-free strided convolution with
/// overlapping k×k kernels (k > s).
class LearnedConvMeasurer {
 public:
  LearnedConvMeasurer(double rate, ConvGeometry geometry, Rng& rng);

  const Parameter& kernel() const { return kernel_; }
  Parameter& kernel() { return kernel_; }
  const ConvGeometry& geometry() const { return geometry_; }
  std::size_t channels() const { return kernel_.value.shape().n; }
  double nominal_rate() const { return rate_; }

 private:
  Parameter kernel_;
  ConvGeometry geometry_;
  double rate_;
};

using Measurer = std::variant<GaussianBlockMeasurer, LearnedFCBlockMeasurer, LearnedConvMeasurer>;

bool is_block_measurer(const Measurer& m);
/// Sensing matrix of a block measurer. Throws ContractError for conv measurers.
const Parameter& block_phi(const Measurer& m);
Parameter& block_phi(Measurer& m);
std::size_t block_size_of(const Measurer& m);
double nominal_rate_of(const Measurer& m);

/// Measures every block×block tile of a 1×1×H×W image (raster order, each
/// tile vectorized row-major). Returns a B×m matrix (shape 1×1×B×m).
Tensor measure_blocks(const Tensor& image, const Tensor& phi,
                      std::size_t block_size = kDefaultBlockSize);

/// 1×c×(H/s)×(W/s) measurement map of a 1×1×H×W image.
Tensor conv_measure(const Tensor& image, const LearnedConvMeasurer& measurer);

/// Measurement scalars emitted for an H×W image (after padding to the
/// measurer's tiling) divided by H·W.
double achieved_rate(const Measurer& measurer, std::size_t height, std::size_t width);
std::size_t measurement_count(const Measurer& measurer, std::size_t height, std::size_t width);

/// Spatial kernels (min-max normalized to [0, 1]) and their centered
/// log(1 + |DFT|) maps, one tile per measurement row/channel.
struct KernelAtlas {
  std::size_t tile = 0;
  std::vector<Tensor> spatial;
  std::vector<Tensor> frequency;
};

KernelAtlas export_kernels(const Measurer& measurer);

/// Lays tiles (all 1×1×t×t) on a near-square grid separated by `gap` pixels of `background`.
Tensor tile_grid(const std::vector<Tensor>& tiles, std::size_t gap = 1, double background = 0.0);

}  // namespace fcs

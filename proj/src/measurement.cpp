#include "fcs/measurement.hpp"

#include <cmath>
#include <string>

#include "fcs/errors.hpp"
#include "fcs/kernels.hpp"
#include "fcs/metrics.hpp"

namespace fcs {

void ConvGeometry::validate() const {
  if (stride == 0) throw ConfigError("measurement stride must be positive");
  if (kernel <= stride) {
    throw ConfigError("measurement kernel " + std::to_string(kernel) +
                      " must exceed stride " + std::to_string(stride) + " so windows overlap");
  }
  if ((kernel - stride) % 2 != 0) {
    throw ConfigError("measurement kernel minus stride must be even for symmetric padding");
  }
}

void validate_rate(double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw ConfigError("rate out of range: " + std::to_string(rate) + " (expected 0 < rate <= 1)");
  }
}

std::size_t rows_for_rate(double rate, std::size_t n) {
  validate_rate(rate);
  const auto m = static_cast<std::size_t>(std::round(rate * static_cast<double>(n)));
  return std::max<std::size_t>(1, m);
}

std::size_t channels_for_rate(double rate, std::size_t stride) {
  return rows_for_rate(rate, stride * stride);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Tensor gaussian_matrix(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (m == 0 || n == 0) throw ConfigError("gaussian_matrix: dimensions must be positive");
  Rng rng(seed);
  return randn(Shape{1, 1, m, n}, rng, 1.0 / std::sqrt(static_cast<double>(m)));
}

GaussianBlockMeasurer::GaussianBlockMeasurer(double rate, std::uint64_t seed,
                                             std::size_t block_size)
    : block_size_(block_size), rate_(rate), seed_(seed) {
  const std::size_t n = block_size * block_size;
  phi_ = Parameter("measure.phi", gaussian_matrix(rows_for_rate(rate, n), n, seed), false);
}

LearnedFCBlockMeasurer::LearnedFCBlockMeasurer(double rate, Rng& rng, std::size_t block_size)
    : block_size_(block_size), rate_(rate) {
  const std::size_t n = block_size * block_size;
  const std::size_t m = rows_for_rate(rate, n);
  phi_ = Parameter("measure.phi",
                   randn(Shape{1, 1, m, n}, rng, std::sqrt(2.0 / static_cast<double>(n))));
}

LearnedConvMeasurer::LearnedConvMeasurer(double rate, ConvGeometry geometry, Rng& rng)
    : geometry_(geometry), rate_(rate) {
  geometry.validate();
  const std::size_t c = channels_for_rate(rate, geometry.stride);
  const std::size_t k = geometry.kernel;
  kernel_ = Parameter("measure.kernel", randn(Shape{c, 1, k, k}, rng,
                                              std::sqrt(2.0 / static_cast<double>(k * k))));
}

bool is_block_measurer(const Measurer& m) {
  return !std::holds_alternative<LearnedConvMeasurer>(m);
}

const Parameter& block_phi(const Measurer& m) {
  if (const auto* g = std::get_if<GaussianBlockMeasurer>(&m)) return g->phi();
  if (const auto* f = std::get_if<LearnedFCBlockMeasurer>(&m)) return f->phi();
  throw ContractError("block_phi: convolutional measurer has no block matrix");
}

Parameter& block_phi(Measurer& m) {
  return const_cast<Parameter&>(block_phi(static_cast<const Measurer&>(m)));
}

std::size_t block_size_of(const Measurer& m) {
  if (const auto* g = std::get_if<GaussianBlockMeasurer>(&m)) return g->block_size();
  if (const auto* f = std::get_if<LearnedFCBlockMeasurer>(&m)) return f->block_size();
  throw ContractError("block_size_of: convolutional measurer has no block size");
}

double nominal_rate_of(const Measurer& m) {
  return std::visit([](const auto& x) { return x.nominal_rate(); }, m);
}

Tensor measure_blocks(const Tensor& image, const Tensor& phi, std::size_t block_size) {
  const Shape s = image.shape();
  if (s.n != 1 || s.c != 1) throw DimensionError("measure_blocks: expected 1x1xHxW, got " + s.str());
  const std::size_t n = block_size * block_size;
  if (phi.shape().n != 1 || phi.shape().c != 1 || phi.shape().w != n) {
    throw DimensionError("measure_blocks: sensing matrix " + phi.shape().str() +
                         " does not have " + std::to_string(n) + " columns");
  }
  if (s.h % block_size != 0 || s.w % block_size != 0) {
    throw GeometryError("measure_blocks: image " + std::to_string(s.h) + "x" +
                        std::to_string(s.w) + " is not a multiple of " +
                        std::to_string(block_size) + "; reflect-pad it first");
  }
  const std::size_t m = phi.shape().h;
  const std::size_t by = s.h / block_size, bx = s.w / block_size;
  Tensor out(Shape{1, 1, by * bx, m});
  std::vector<double> v(n);
  for (std::size_t r = 0; r < by; ++r)
    for (std::size_t c = 0; c < bx; ++c) {
      for (std::size_t i = 0; i < block_size; ++i)
        for (std::size_t j = 0; j < block_size; ++j)
          v[i * block_size + j] = image.at(0, 0, r * block_size + i, c * block_size + j);
      const std::size_t b = r * bx + c;
      for (std::size_t row = 0; row < m; ++row) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += phi[row * n + k] * v[k];
        out[b * m + row] = acc;
      }
    }
  return out;
}

Tensor conv_measure(const Tensor& image, const LearnedConvMeasurer& measurer) {
  const ConvGeometry& g = measurer.geometry();
  const Shape s = image.shape();
  if (s.h % g.stride != 0 || s.w % g.stride != 0) {
    throw GeometryError("conv_measure: image " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                        " is not a multiple of stride " + std::to_string(g.stride));
  }
  return conv2d_forward(image, measurer.kernel().value, nullptr, ConvParams{g.stride, g.pad()});
}

std::size_t measurement_count(const Measurer& measurer, std::size_t height, std::size_t width) {
  if (const auto* conv = std::get_if<LearnedConvMeasurer>(&measurer)) {
    const std::size_t s = conv->geometry().stride;
    return conv->channels() * (round_up(height, s) / s) * (round_up(width, s) / s);
  }
  const std::size_t bs = block_size_of(measurer);
  const std::size_t m = block_phi(measurer).value.shape().h;
  return m * (round_up(height, bs) / bs) * (round_up(width, bs) / bs);
}

double achieved_rate(const Measurer& measurer, std::size_t height, std::size_t width) {
  return static_cast<double>(measurement_count(measurer, height, width)) /
         static_cast<double>(height * width);
}

KernelAtlas export_kernels(const Measurer& measurer) {
  KernelAtlas atlas;
  std::vector<Tensor> raw;
  if (const auto* conv = std::get_if<LearnedConvMeasurer>(&measurer)) {
    const Tensor& k = conv->kernel().value;
    atlas.tile = k.shape().h;
    for (std::size_t c = 0; c < k.shape().n; ++c) raw.push_back(k.sample(c));
  } else {
    const Tensor& phi = block_phi(measurer).value;
    const std::size_t bs = block_size_of(measurer);
    atlas.tile = bs;
    const std::size_t n = bs * bs;
    for (std::size_t r = 0; r < phi.shape().h; ++r) {
      std::vector<double> row(phi.data().begin() + static_cast<std::ptrdiff_t>(r * n),
                              phi.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * n));
      raw.emplace_back(Shape{1, 1, bs, bs}, std::move(row));
    }
  }
  for (const Tensor& t : raw) {
    atlas.spatial.push_back(minmax_normalize(t));
    atlas.frequency.push_back(dft2_log_magnitude(t));
  }
  return atlas;
}

Tensor tile_grid(const std::vector<Tensor>& tiles, std::size_t gap, double background) {
  if (tiles.empty()) return Tensor(Shape{1, 1, 0, 0});
  const std::size_t th = tiles.front().shape().h, tw = tiles.front().shape().w;
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(tiles.size()))));
  const std::size_t rows = (tiles.size() + cols - 1) / cols;
  const std::size_t height = rows * th + (rows + 1) * gap;
  const std::size_t width = cols * tw + (cols + 1) * gap;
  Tensor grid(Shape{1, 1, height, width}, background);
  for (std::size_t k = 0; k < tiles.size(); ++k) {
    const Tensor& t = tiles[k];
    if (t.shape().h != th || t.shape().w != tw) throw DimensionError("tile_grid: ragged tiles");
    const std::size_t oy = gap + (k / cols) * (th + gap);
    const std::size_t ox = gap + (k % cols) * (tw + gap);
    for (std::size_t i = 0; i < th; ++i)
      for (std::size_t j = 0; j < tw; ++j) grid.at(0, 0, oy + i, ox + j) = t.at(0, 0, i, j);
  }
  return grid;
}

}  // namespace fcs

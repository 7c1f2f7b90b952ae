#include "fcs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fcs/errors.hpp"

namespace fcs {

namespace {

using cd = std::complex<double>;

void require_plane(const Tensor& t, const char* op) {
  if (t.shape().n != 1 || t.shape().c != 1) {
    throw DimensionError(std::string(op) + ": expected a 1x1xHxW image, got " + t.shape().str());
  }
}

void require_same_plane(const Tensor& x, const Tensor& y, const char* op) {
  require_plane(x, op);
  if (x.shape() != y.shape()) {
    throw DimensionError(std::string(op) + ": shape " + x.shape().str() + " vs " +
                         y.shape().str());
  }
}

std::vector<cd> twiddles(std::size_t n) {
  std::vector<cd> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    w[k] = cd(std::cos(a), std::sin(a));
  }
  return w;
}

// Direct DFT of `len` samples spaced `stride` apart, in place via scratch.
void dft_line(cd* data, std::size_t len, std::size_t stride, const std::vector<cd>& w,
              std::vector<cd>& scratch) {
  scratch.assign(len, cd{});
  for (std::size_t k = 0; k < len; ++k) {
    cd acc{};
    std::size_t idx = 0;
    for (std::size_t j = 0; j < len; ++j) {
      acc += data[j * stride] * w[idx];
      idx += k;
      if (idx >= len) idx -= len;
    }
    scratch[k] = acc;
  }
  for (std::size_t k = 0; k < len; ++k) data[k * stride] = scratch[k];
}

}  // namespace

double psnr(const Tensor& x, const Tensor& y) {
  require_same_plane(x, y, "psnr");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(x.numel());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor& x, const Tensor& y, const SsimParams& params) {
  require_same_plane(x, y, "ssim");
  const std::size_t h = x.shape().h, w = x.shape().w, win = params.window;
  if (h < win || w < win) {
    throw GeometryError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                        " is smaller than the " + std::to_string(win) + "x" +
                        std::to_string(win) + " window");
  }
  std::vector<double> g(win);
  const double centre = static_cast<double>(win - 1) / 2.0;
  double gsum = 0.0;
  for (std::size_t i = 0; i < win; ++i) {
    const double d = static_cast<double>(i) - centre;
    g[i] = std::exp(-d * d / (2.0 * params.sigma * params.sigma));
    gsum += g[i];
  }
  for (double& v : g) v /= gsum;

  const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
  const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
  const std::size_t oh = h - win + 1, ow = w - win + 1;
  double total = 0.0;
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::size_t a = 0; a < win; ++a)
        for (std::size_t b = 0; b < win; ++b) {
          const double wt = g[a] * g[b];
          const double xv = x.at(0, 0, i + a, j + b);
          const double yv = y.at(0, 0, i + a, j + b);
          mx += wt * xv;
          my += wt * yv;
          sxx += wt * xv * xv;
          syy += wt * yv * yv;
          sxy += wt * xv * yv;
        }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cov = sxy - mx * my;
      total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  return total / static_cast<double>(oh * ow);
}

double blockiness_index(const Tensor& image, std::size_t grid) {
  require_plane(image, "blockiness_index");
  const std::size_t h = image.shape().h, w = image.shape().w;
  double edge_sum = 0.0, inner_sum = 0.0;
  std::size_t edge_n = 0, inner_n = 0;
  auto tally = [&](double d, bool straddles) {
    if (straddles) {
      edge_sum += d;
      ++edge_n;
    } else {
      inner_sum += d;
      ++inner_n;
    }
  };
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j + 1 < w; ++j)
      tally(std::abs(image.at(0, 0, i, j + 1) - image.at(0, 0, i, j)), (j + 1) % grid == 0);
  for (std::size_t i = 0; i + 1 < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      tally(std::abs(image.at(0, 0, i + 1, j) - image.at(0, 0, i, j)), (i + 1) % grid == 0);

  const double edge = edge_n ? edge_sum / static_cast<double>(edge_n) : 0.0;
  const double inner = inner_n ? inner_sum / static_cast<double>(inner_n) : 0.0;
  if (inner < 1e-12) return edge < 1e-12 ? 1.0 : edge / 1e-12;
  return edge / inner;
}

std::vector<std::complex<double>> dft2(const Tensor& image) {
  require_plane(image, "dft2");
  const std::size_t h = image.shape().h, w = image.shape().w;
  std::vector<cd> f(h * w);
  for (std::size_t i = 0; i < h * w; ++i) f[i] = cd(image[i], 0.0);
  std::vector<cd> scratch;
  const auto wr = twiddles(w);
  for (std::size_t i = 0; i < h; ++i) dft_line(f.data() + i * w, w, 1, wr, scratch);
  const auto wc = twiddles(h);
  for (std::size_t j = 0; j < w; ++j) dft_line(f.data() + j, h, w, wc, scratch);
  return f;
}

Tensor fftshift(const Tensor& image) {
  require_plane(image, "fftshift");
  const std::size_t h = image.shape().h, w = image.shape().w;
  Tensor out(image.shape());
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      out.at(0, 0, (i + h / 2) % h, (j + w / 2) % w) = image.at(0, 0, i, j);
  return out;
}

Tensor minmax_normalize(const Tensor& image) {
  Tensor out(image.shape());
  if (image.empty()) return out;
  const auto [lo, hi] = std::minmax_element(image.data().begin(), image.data().end());
  const double span = *hi - *lo;
  // Spans at round-off level are treated as constant images.
  if (span <= 1e-12 * std::max(std::abs(*hi), std::abs(*lo))) return out;
  for (std::size_t i = 0; i < image.numel(); ++i) out[i] = (image[i] - *lo) / span;
  return out;
}

Tensor dft2_magnitude(const Tensor& image) {
  const auto f = dft2(image);
  Tensor mag(image.shape());
  for (std::size_t i = 0; i < f.size(); ++i) mag[i] = std::abs(f[i]);
  return fftshift(mag);
}

Tensor dft2_log_magnitude(const Tensor& image) {
  Tensor mag = dft2_magnitude(image);
  for (auto& v : mag.data()) v = std::log1p(v);
  return minmax_normalize(mag);
}

double highfreq_energy_ratio(const Tensor& image, double cutoff) {
  const auto f = dft2(image);
  const std::size_t h = image.shape().h, w = image.shape().w;
  const double lim_u = cutoff * static_cast<double>(h);
  const double lim_v = cutoff * static_cast<double>(w);
  auto signed_freq = [](std::size_t k, std::size_t n) {
    const auto kk = static_cast<double>(k);
    return k <= n / 2 ? kk : kk - static_cast<double>(n);
  };
  double high = 0.0, total = 0.0;
  double power = 0.0;
  for (double x : image.data()) power += x * x;
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      if (u == 0 && v == 0) continue;
      const double e = std::norm(f[u * w + v]);
      total += e;
      if (std::abs(signed_freq(u, h)) > lim_u || std::abs(signed_freq(v, w)) > lim_v) high += e;
    }
  // Below this the non-DC bins hold only transform round-off.
  if (total <= 1e-20 * power * static_cast<double>(h * w)) return 0.0;
  return high / total;
}

}  // namespace fcs

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fcs/kernels.hpp"
#include "fcs/tensor.hpp"

namespace fcs::test {

// Direct zero-padded convolution, written independently of the im2col path.
inline Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor* b, std::size_t s, std::size_t p) {
  const Shape xs = x.shape(), ws = w.shape();
  const std::size_t k = ws.h;
  const std::size_t oh = (xs.h + 2 * p - k) / s + 1, ow = (xs.w + 2 * p - k) / s + 1;
  Tensor y(Shape{xs.n, ws.n, oh, ow});
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t co = 0; co < ws.n; ++co)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = b ? (*b)[co] : 0.0;
          for (std::size_t ci = 0; ci < xs.c; ++ci)
            for (std::size_t u = 0; u < k; ++u)
              for (std::size_t v = 0; v < k; ++v) {
                const auto r = static_cast<std::ptrdiff_t>(i * s + u) - static_cast<std::ptrdiff_t>(p);
                const auto c = static_cast<std::ptrdiff_t>(j * s + v) - static_cast<std::ptrdiff_t>(p);
                if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(xs.h) || c >= static_cast<std::ptrdiff_t>(xs.w))
                  continue;
                acc += w.at(co, ci, u, v) * x.at(n, ci, static_cast<std::size_t>(r), static_cast<std::size_t>(c));
              }
          y.at(n, co, i, j) = acc;
        }
  return y;
}

// Scatter-accumulate transposed convolution; w is Cin×Cout×k×k.
inline Tensor naive_deconv(const Tensor& x, const Tensor& w, const Tensor* b, std::size_t s, std::size_t p) {
  const Shape xs = x.shape(), ws = w.shape();
  const std::size_t k = ws.h;
  const std::size_t oh = (xs.h - 1) * s + k - 2 * p, ow = (xs.w - 1) * s + k - 2 * p;
  Tensor y(Shape{xs.n, ws.c, oh, ow});
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t co = 0; co < ws.c; ++co)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) y.at(n, co, i, j) = b ? (*b)[co] : 0.0;
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t ci = 0; ci < xs.c; ++ci)
      for (std::size_t i = 0; i < xs.h; ++i)
        for (std::size_t j = 0; j < xs.w; ++j)
          for (std::size_t co = 0; co < ws.c; ++co)
            for (std::size_t u = 0; u < k; ++u)
              for (std::size_t v = 0; v < k; ++v) {
                const auto r = static_cast<std::ptrdiff_t>(i * s + u) - static_cast<std::ptrdiff_t>(p);
                const auto c = static_cast<std::ptrdiff_t>(j * s + v) - static_cast<std::ptrdiff_t>(p);
                if (r < 0 || c < 0 || r >= static_cast<std::ptrdiff_t>(oh) || c >= static_cast<std::ptrdiff_t>(ow))
                  continue;
                y.at(n, co, static_cast<std::size_t>(r), static_cast<std::size_t>(c)) +=
                    w.at(ci, co, u, v) * x.at(n, ci, i, j);
              }
  return y;
}

// Straight from the definition: every window position, weights built here.
inline double naive_ssim(const Tensor& x, const Tensor& y) {
  const int k = 11;
  const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  double g[k][k], total = 0.0;
  for (int u = 0; u < k; ++u)
    for (int v = 0; v < k; ++v) {
      g[u][v] = std::exp(-((u - 5) * (u - 5) + (v - 5) * (v - 5)) / (2 * sigma * sigma));
      total += g[u][v];
    }
  const std::size_t h = x.shape().h, w = x.shape().w;
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + k <= h; ++i)
    for (std::size_t j = 0; j + k <= w; ++j) {
      double mx = 0, my = 0;
      for (int u = 0; u < k; ++u)
        for (int v = 0; v < k; ++v) {
          mx += g[u][v] / total * x.at(0, 0, i + u, j + v);
          my += g[u][v] / total * y.at(0, 0, i + u, j + v);
        }
      double sxx = 0, syy = 0, sxy = 0;
      for (int u = 0; u < k; ++u)
        for (int v = 0; v < k; ++v) {
          const double dx = x.at(0, 0, i + u, j + v) - mx, dy = y.at(0, 0, i + u, j + v) - my;
          sxx += g[u][v] / total * dx * dx;
          syy += g[u][v] / total * dy * dy;
          sxy += g[u][v] / total * dx * dy;
        }
      acc += ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
      ++count;
    }
  return acc / static_cast<double>(count);
}

// Enumerates adjacent pairs as explicit coordinate pairs and classifies each by
// whether the two pixels fall in different grid cells.
inline double brute_blockiness(const Tensor& x, std::size_t grid) {
  double edge = 0, inner = 0;
  std::size_t ne = 0, ni = 0;
  const std::size_t h = x.shape().h, w = x.shape().w;
  const int di[2] = {0, 1}, dj[2] = {1, 0};
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (int d = 0; d < 2; ++d) {
        const std::size_t i2 = i + di[d], j2 = j + dj[d];
        if (i2 >= h || j2 >= w) continue;
        const double diff = std::abs(x.at(0, 0, i2, j2) - x.at(0, 0, i, j));
        const bool crosses = (i / grid != i2 / grid) || (j / grid != j2 / grid);
        (crosses ? edge : inner) += diff;
        ++(crosses ? ne : ni);
      }
  const double me = edge / static_cast<double>(ne), mi = ni ? inner / static_cast<double>(ni) : 0.0;
  if (mi < 1e-12) return me < 1e-12 ? 1.0 : me / 1e-12;
  return me / mi;
}

inline std::vector<std::complex<double>> naive_dft(const Tensor& x) {
  const std::size_t h = x.shape().h, w = x.shape().w;
  std::vector<std::complex<double>> out(h * w);
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      std::complex<double> acc = 0;
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          const double ang = -2 * std::numbers::pi *
                             (static_cast<double>(u * i) / static_cast<double>(h) +
                              static_cast<double>(v * j) / static_cast<double>(w));
          acc += x.at(0, 0, i, j) * std::polar(1.0, ang);
        }
      out[u * w + v] = acc;
    }
  return out;
}

inline double rel_gap(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fcs_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace fcs::test

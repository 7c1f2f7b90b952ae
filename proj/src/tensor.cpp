#include "fcs/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fcs/errors.hpp"

namespace fcs {

std::string Shape::str() const {
  return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
         std::to_string(w);
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::span<const double> data) : Tensor(shape, Buffer(data.begin(), data.end())) {}

Tensor::Tensor(Shape shape, std::initializer_list<double> data) : Tensor(shape, Buffer(data)) {}

Tensor::Tensor(Shape shape, Buffer data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_.str());
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::span<const double> data) {
  return Tensor(Shape{1, 1, rows, cols}, data);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != numel()) {
    throw DimensionError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  return Tensor(shape, data_);
}

Tensor Tensor::sample(std::size_t i) const {
  if (i >= shape_.n) throw DimensionError("batch index out of range for " + shape_.str());
  const std::size_t per = shape_.c * shape_.h * shape_.w;
  Buffer out(data_.begin() + static_cast<std::ptrdiff_t>(i * per),
                          data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
  return Tensor(Shape{1, shape_.c, shape_.h, shape_.w}, std::move(out));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor randn(Shape shape, Rng& rng, double stddev) {
  Tensor t(shape);
  for (auto& v : t.data()) v = rng.normal(0.0, stddev);
  return t;
}

Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(shape);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape " + a.shape().str() + " vs " +
                         b.shape().str());
  }
}

}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same(a, b, "subtract");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
  return out;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = s * a[i];
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
  return acc;
}

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double relative_difference(const Tensor& a, const Tensor& b) {
  require_same(a, b, "relative_difference");
  const double scale = std::max({max_abs(a), max_abs(b), 1e-300});
  return max_abs(a - b) / scale;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

Tensor stack(const std::vector<const Tensor*>& samples) {
  if (samples.empty()) throw DimensionError("stack: no samples");
  const Shape s0 = samples.front()->shape();
  Buffer data;
  data.reserve(s0.numel() * samples.size());
  for (const Tensor* t : samples) {
    const Shape s = t->shape();
    if (s.n != 1 || s.c != s0.c || s.h != s0.h || s.w != s0.w) {
      throw DimensionError("stack: sample shape " + s.str() + " vs " + s0.str());
    }
    data.insert(data.end(), t->data().begin(), t->data().end());
  }
  return Tensor(Shape{samples.size(), s0.c, s0.h, s0.w}, std::move(data));
}

Tensor stack(std::span<const Tensor> samples) {
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& t : samples) ptrs.push_back(&t);
  return stack(ptrs);
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t len) {
  if (len == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (len - 1));
  std::ptrdiff_t r = i % period;
  if (r < 0) r += period;
  if (r >= static_cast<std::ptrdiff_t>(len)) r = period - r;
  return static_cast<std::size_t>(r);
}

Tensor reflect_pad(const Tensor& x, std::size_t height, std::size_t width) {
  const Shape s = x.shape();
  if (height < s.h || width < s.w) {
    throw GeometryError("reflect_pad target " + std::to_string(height) + "x" +
                        std::to_string(width) + " smaller than " + s.str());
  }
  if (height == s.h && width == s.w) return x;
  Tensor out(Shape{s.n, s.c, height, width});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < height; ++i) {
        const std::size_t si = reflect_index(static_cast<std::ptrdiff_t>(i), s.h);
        for (std::size_t j = 0; j < width; ++j) {
          out.at(n, c, i, j) = x.at(n, c, si, reflect_index(static_cast<std::ptrdiff_t>(j), s.w));
        }
      }
  return out;
}

Tensor crop(const Tensor& x, std::size_t height, std::size_t width) {
  const Shape s = x.shape();
  if (height > s.h || width > s.w) {
    throw GeometryError("crop window " + std::to_string(height) + "x" + std::to_string(width) +
                        " exceeds " + s.str());
  }
  if (height == s.h && width == s.w) return x;
  Tensor out(Shape{s.n, s.c, height, width});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < height; ++i)
        for (std::size_t j = 0; j < width; ++j) out.at(n, c, i, j) = x.at(n, c, i, j);
  return out;
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = std::clamp(x[i], lo, hi);
  return out;
}

}  // namespace fcs

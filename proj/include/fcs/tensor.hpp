#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace fcs {

/// (batch, channel, height, width) extents.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Allocator with a fixed 64-byte alignment. Vectorized reductions peel a
/// prefix whose length depends on the buffer address, so an unpinned
/// alignment makes sums depend on heap layout.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

/// Dense 4-axis array of doubles, row-major in (N, C, H, W) order.
///
/// Matrices are stored with shape (1, 1, rows, cols).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, Buffer data);
  Tensor(Shape shape, std::span<const double> data);
  Tensor(Shape shape, std::initializer_list<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, std::span<const double> data);

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const Buffer& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[offset(n, c, h, w)];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[offset(n, c, h, w)];
  }

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  /// Sample `i` of the batch as a 1×C×H×W tensor.
  Tensor sample(std::size_t i) const;

  void fill(double v);
  bool all_finite() const;

 private:
  Shape shape_{};
  Buffer data_;
};

/// Seeded source of the library's randomness.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::size_t index(std::size_t bound) {
    return std::uniform_int_distribution<std::size_t>(0, bound - 1)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

Tensor randn(Shape shape, Rng& rng, double stddev = 1.0);
Tensor rand_uniform(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);

double dot(const Tensor& a, const Tensor& b);
double max_abs(const Tensor& a);
/// max |a - b| / max(max|a|, max|b|, tiny)
double relative_difference(const Tensor& a, const Tensor& b);
bool bitwise_equal(const Tensor& a, const Tensor& b);

/// Stacks equally shaped 1×C×H×W samples along the batch axis.
Tensor stack(std::span<const Tensor> samples);
Tensor stack(const std::vector<const Tensor*>& samples);

/// Mirror index into [0, len) without repeating the edge sample.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t len);
/// Extends bottom/right edges by reflection to `height`×`width`.
Tensor reflect_pad(const Tensor& x, std::size_t height, std::size_t width);
/// Top-left `height`×`width` window.
Tensor crop(const Tensor& x, std::size_t height, std::size_t width);
Tensor clamp(const Tensor& x, double lo, double hi);

inline std::size_t round_up(std::size_t v, std::size_t multiple) {
  return (v + multiple - 1) / multiple * multiple;
}

}  // namespace fcs

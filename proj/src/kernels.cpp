#include "fcs/kernels.hpp"

#include <Eigen/Core>
#include <atomic>
#include <string>
#include <vector>

#include "fcs/errors.hpp"

namespace fcs {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

std::atomic<bool> g_backward_fault{false};

// Geometry of one sample: an image plane of `channels`×`height`×`width`
// sampled by a k×k window at `out_h`×`out_w` positions.
struct Window {
  std::size_t channels, height, width, kernel, stride, pad, out_h, out_w;

  std::size_t rows() const { return channels * kernel * kernel; }
  std::size_t cols() const { return out_h * out_w; }
};

void im2col(const double* img, const Window& g, double* col) {
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t ki = 0; ki < g.kernel; ++ki)
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        double* row = col + ((c * g.kernel + ki) * g.kernel + kj) * g.cols();
        const double* plane = img + c * g.height * g.width;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - pad;
          double* dst = row + oh * g.out_w;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(ih) * g.width;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) - pad;
            dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width))
                          ? 0.0
                          : src[static_cast<std::size_t>(iw)];
          }
        }
      }
}

// Adjoint of im2col: accumulates into img.
void col2im(const double* col, const Window& g, double* img) {
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t ki = 0; ki < g.kernel; ++ki)
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const double* row = col + ((c * g.kernel + ki) * g.kernel + kj) * g.cols();
        double* plane = img + c * g.height * g.width;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - pad;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) continue;
          const double* src = row + oh * g.out_w;
          double* dst = plane + static_cast<std::size_t>(ih) * g.width;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) - pad;
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width)) continue;
            dst[static_cast<std::size_t>(iw)] += src[ow];
          }
        }
      }
}

void check_kernel(const Tensor& w, const char* op) {
  if (w.shape().h != w.shape().w) {
    throw DimensionError(std::string(op) + ": kernel must be square, got " + w.shape().str());
  }
}

void check_bias(const Tensor* bias, std::size_t cout, const char* op) {
  if (bias && bias->numel() != cout) {
    throw DimensionError(std::string(op) + ": bias length " + std::to_string(bias->numel()) +
                         " does not match output channel axis " + std::to_string(cout));
  }
}

void check_stride(ConvParams p) {
  if (p.stride == 0) throw GeometryError("stride must be positive");
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, ConvParams p, const char* axis) {
  check_stride(p);
  const std::size_t padded = in + 2 * p.pad;
  if (kernel > padded) {
    throw GeometryError(std::string("conv2d: kernel ") + std::to_string(kernel) +
                        " exceeds padded " + axis + " extent " + std::to_string(padded));
  }
  if ((padded - kernel) % p.stride != 0) {
    throw GeometryError(std::string("conv2d: ") + axis + " extent " + std::to_string(in) +
                        " with pad " + std::to_string(p.pad) + " and kernel " +
                        std::to_string(kernel) + " is not divisible by stride " +
                        std::to_string(p.stride));
  }
  return (padded - kernel) / p.stride + 1;
}

std::size_t deconv_out_extent(std::size_t in, std::size_t kernel, ConvParams p, const char* axis) {
  check_stride(p);
  const auto out = static_cast<std::ptrdiff_t>((in == 0 ? 0 : in - 1) * p.stride + kernel) -
                   static_cast<std::ptrdiff_t>(2 * p.pad);
  if (in == 0 || out <= 0) {
    throw GeometryError(std::string("deconv2d: non-positive output ") + axis + " extent " +
                        std::to_string(out));
  }
  return static_cast<std::size_t>(out);
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, ConvParams p) {
  check_kernel(w, "conv2d");
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  if (xs.c != ws.c) {
    throw DimensionError("conv2d: channel axis mismatch, input has " + std::to_string(xs.c) +
                         " channels but kernel expects " + std::to_string(ws.c));
  }
  check_bias(bias, ws.n, "conv2d");
  const std::size_t k = ws.h;
  const Window g{xs.c, xs.h, xs.w, k, p.stride, p.pad, conv_out_extent(xs.h, k, p, "height"),
                 conv_out_extent(xs.w, k, p, "width")};

  Tensor y(Shape{xs.n, ws.n, g.out_h, g.out_w});
  Buffer col(g.rows() * g.cols());
  const ConstMatMap wm(w.data().data(), ws.n, g.rows());
  for (std::size_t n = 0; n < xs.n; ++n) {
    im2col(x.data().data() + n * xs.c * xs.h * xs.w, g, col.data());
    MatMap ym(y.data().data() + n * ws.n * g.cols(), ws.n, g.cols());
    ym.noalias() = wm * ConstMatMap(col.data(), g.rows(), g.cols());
    if (bias) {
      for (std::size_t co = 0; co < ws.n; ++co) ym.row(co).array() += (*bias)[co];
    }
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, ConvParams p, Tensor* dx,
                     Tensor* dw, Tensor* db) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  const std::size_t k = ws.h;
  const Window g{xs.c, xs.h, xs.w, k, p.stride, p.pad, conv_out_extent(xs.h, k, p, "height"),
                 conv_out_extent(xs.w, k, p, "width")};
  if (dy.shape() != Shape{xs.n, ws.n, g.out_h, g.out_w}) {
    throw DimensionError("conv2d backward: upstream gradient shape " + dy.shape().str());
  }

  Buffer col(g.rows() * g.cols());
  const ConstMatMap wm(w.data().data(), ws.n, g.rows());
  RowMat dw_acc;
  if (dw) dw_acc = RowMat::Zero(ws.n, g.rows());

  for (std::size_t n = 0; n < xs.n; ++n) {
    const ConstMatMap dym(dy.data().data() + n * ws.n * g.cols(), ws.n, g.cols());
    if (dw) {
      im2col(x.data().data() + n * xs.c * xs.h * xs.w, g, col.data());
      dw_acc.noalias() += dym * ConstMatMap(col.data(), g.rows(), g.cols()).transpose();
    }
    if (dx) {
      MatMap cm(col.data(), g.rows(), g.cols());
      cm.noalias() = wm.transpose() * dym;
      col2im(col.data(), g, dx->data().data() + n * xs.c * xs.h * xs.w);
    }
    if (db) {
      for (std::size_t co = 0; co < ws.n; ++co) (*db)[co] += dym.row(co).sum();
    }
  }
  if (dw) {
    if (g_backward_fault.load()) dw_acc *= 1.01;
    MatMap(dw->data().data(), ws.n, g.rows()) += dw_acc;
  }
}

Tensor deconv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, ConvParams p) {
  check_kernel(w, "deconv2d");
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  if (xs.c != ws.n) {
    throw DimensionError("deconv2d: channel axis mismatch, input has " + std::to_string(xs.c) +
                         " channels but kernel expects " + std::to_string(ws.n));
  }
  check_bias(bias, ws.c, "deconv2d");
  const std::size_t k = ws.h;
  const std::size_t out_h = deconv_out_extent(xs.h, k, p, "height");
  const std::size_t out_w = deconv_out_extent(xs.w, k, p, "width");
  const Window g{ws.c, out_h, out_w, k, p.stride, p.pad, xs.h, xs.w};

  Tensor y(Shape{xs.n, ws.c, out_h, out_w});
  Buffer col(g.rows() * g.cols());
  const ConstMatMap wm(w.data().data(), ws.n, g.rows());
  for (std::size_t n = 0; n < xs.n; ++n) {
    const ConstMatMap xm(x.data().data() + n * xs.c * g.cols(), xs.c, g.cols());
    MatMap(col.data(), g.rows(), g.cols()).noalias() = wm.transpose() * xm;
    double* out = y.data().data() + n * ws.c * out_h * out_w;
    col2im(col.data(), g, out);
    if (bias) {
      for (std::size_t co = 0; co < ws.c; ++co) {
        double* plane = out + co * out_h * out_w;
        for (std::size_t i = 0; i < out_h * out_w; ++i) plane[i] += (*bias)[co];
      }
    }
  }
  return y;
}

void deconv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, ConvParams p,
                       Tensor* dx, Tensor* dw, Tensor* db) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  const std::size_t k = ws.h;
  const std::size_t out_h = deconv_out_extent(xs.h, k, p, "height");
  const std::size_t out_w = deconv_out_extent(xs.w, k, p, "width");
  if (dy.shape() != Shape{xs.n, ws.c, out_h, out_w}) {
    throw DimensionError("deconv2d backward: upstream gradient shape " + dy.shape().str());
  }
  const Window g{ws.c, out_h, out_w, k, p.stride, p.pad, xs.h, xs.w};

  Buffer col(g.rows() * g.cols());
  const ConstMatMap wm(w.data().data(), ws.n, g.rows());
  RowMat dw_acc;
  if (dw) dw_acc = RowMat::Zero(ws.n, g.rows());

  for (std::size_t n = 0; n < xs.n; ++n) {
    const double* dplane = dy.data().data() + n * ws.c * out_h * out_w;
    if (dx || dw) {
      im2col(dplane, g, col.data());
      const ConstMatMap cm(col.data(), g.rows(), g.cols());
      if (dx) {
        MatMap(dx->data().data() + n * xs.c * g.cols(), xs.c, g.cols()).noalias() += wm * cm;
      }
      if (dw) {
        const ConstMatMap xm(x.data().data() + n * xs.c * g.cols(), xs.c, g.cols());
        dw_acc.noalias() += xm * cm.transpose();
      }
    }
    if (db) {
      for (std::size_t co = 0; co < ws.c; ++co) {
        const double* plane = dplane + co * out_h * out_w;
        double s = 0.0;
        for (std::size_t i = 0; i < out_h * out_w; ++i) s += plane[i];
        (*db)[co] += s;
      }
    }
  }
  if (dw) MatMap(dw->data().data(), ws.n, g.rows()) += dw_acc;
}

namespace testing {
void set_backward_fault(bool enabled) { g_backward_fault.store(enabled); }
bool backward_fault() { return g_backward_fault.load(); }
}  // namespace testing

}  // namespace fcs

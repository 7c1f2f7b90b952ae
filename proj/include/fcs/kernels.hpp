#pragma once

#include <cstddef>

#include "fcs/tensor.hpp"

// Graph-free convolution primitives. The autodiff layer wraps these; they are
// also usable directly on plain tensors.

namespace fcs {

struct ConvParams {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

/// Output extent of a zero-padded convolution along one axis.
/// Throws GeometryError when the kernel does not fit or the stride does not divide.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, ConvParams p, const char* axis);
/// Output extent of a transposed convolution along one axis.
std::size_t deconv_out_extent(std::size_t in, std::size_t kernel, ConvParams p, const char* axis);

/// x: N×Cin×H×W, w: Cout×Cin×k×k, bias: 1×Cout×1×1 or null.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, ConvParams p);

/// Accumulates dL/dx, dL/dw, dL/db into the non-null outputs (which must be pre-sized).
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, ConvParams p,
                     Tensor* dx, Tensor* dw, Tensor* db);

/// x: N×Cin×H×W, w: Cin×Cout×k×k, bias: 1×Cout×1×1 or null.
/// Scatter-accumulate semantics: the exact adjoint of conv2d_forward with the same (k, s, p).
Tensor deconv2d_forward(const Tensor& x, const Tensor& w, const Tensor* bias, ConvParams p);

void deconv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, ConvParams p,
                       Tensor* dx, Tensor* dw, Tensor* db);

namespace testing {
/// Negative-control hook: when enabled, conv2d weight gradients are scaled by 1.01.
void set_backward_fault(bool enabled);
bool backward_fault();
}  // namespace testing

}  // namespace fcs

#include "fcs/autodiff.hpp"

#include <algorithm>
#include <atomic>

#include "fcs/errors.hpp"

namespace fcs {

namespace {

std::atomic<std::uint64_t> g_next_param_id{1};

bool present(Var v) { return v.tape != nullptr; }

Tape& tape_of(Var a) {
  if (!a.tape) throw ContractError("operation on an unbound Var");
  return *a.tape;
}

void same_tape(Var a, Var b) {
  if (present(b) && b.tape != a.tape) throw ContractError("Vars recorded on different tapes");
}

std::vector<std::size_t> indices(std::initializer_list<Var> vars) {
  std::vector<std::size_t> out;
  for (Var v : vars)
    if (present(v)) out.push_back(v.index);
  return out;
}

}  // namespace

Parameter::Parameter(std::string name_, Tensor value_, bool trainable_)
    : name(std::move(name_)),
      value(std::move(value_)),
      grad(value.shape()),
      trainable(trainable_),
      id(g_next_param_id.fetch_add(1)) {}

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape());
  grad.fill(0.0);
}

const Tensor& Var::value() const {
  if (!tape) throw ContractError("value of an unbound Var");
  return tape->value(index);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value;
  if (p.trainable) {
    n.requires_grad = true;
    n.param = &p;
  }
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

void Tape::mix_branch(std::uint64_t bits) {
  branches_ ^= bits + 0x9e3779b97f4a7c15ull + (branches_ << 6) + (branches_ >> 2);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [this](std::size_t i) { return nodes_[i].requires_grad; });
  if (n.requires_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t i) {
  Node& n = nodes_[i];
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
  if (value(loss.index).numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        value(loss.index).shape().str());
  }
  if (!nodes_[loss.index].requires_grad) return;
  grad(loss.index)[0] = 1.0;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param) {
      Parameter& p = *n.param;
      if (p.grad.shape() != p.value.shape()) p.zero_grad();
      for (std::size_t j = 0; j < n.grad.numel(); ++j) p.grad[j] += n.grad[j];
    }
  }
}

Var conv2d(Var x, Var w, Var b, ConvParams p) {
  Tape& t = tape_of(x);
  same_tape(x, w);
  same_tape(x, b);
  const Tensor* bias = present(b) ? &b.value() : nullptr;
  Tensor y = conv2d_forward(x.value(), w.value(), bias, p);
  const std::size_t xi = x.index, wi = w.index;
  const bool has_b = present(b);
  const std::size_t bi = b.index;
  return t.record(std::move(y), indices({x, w, b}), [=](Tape& tp, std::size_t self) {
    conv2d_backward(tp.value(xi), tp.value(wi), tp.grad(self), p,
                    tp.requires_grad(xi) ? &tp.grad(xi) : nullptr,
                    tp.requires_grad(wi) ? &tp.grad(wi) : nullptr,
                    has_b && tp.requires_grad(bi) ? &tp.grad(bi) : nullptr);
  });
}

Var deconv2d(Var x, Var w, Var b, ConvParams p) {
  Tape& t = tape_of(x);
  same_tape(x, w);
  same_tape(x, b);
  const Tensor* bias = present(b) ? &b.value() : nullptr;
  Tensor y = deconv2d_forward(x.value(), w.value(), bias, p);
  const std::size_t xi = x.index, wi = w.index;
  const bool has_b = present(b);
  const std::size_t bi = b.index;
  return t.record(std::move(y), indices({x, w, b}), [=](Tape& tp, std::size_t self) {
    deconv2d_backward(tp.value(xi), tp.value(wi), tp.grad(self), p,
                      tp.requires_grad(xi) ? &tp.grad(xi) : nullptr,
                      tp.requires_grad(wi) ? &tp.grad(wi) : nullptr,
                      has_b && tp.requires_grad(bi) ? &tp.grad(bi) : nullptr);
  });
}

Var relu(Var x) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  std::uint64_t mask = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    const bool on = xv[i] > 0.0;
    y[i] = on ? xv[i] : 0.0;
    mask = (mask ^ (on ? i + 1 : 0)) * 0x100000001b3ull;
  }
  t.mix_branch(mask);
  const std::size_t xi = x.index;
  return t.record(std::move(y), {xi}, [xi](Tape& tp, std::size_t self) {
    const Tensor& in = tp.value(xi);
    const Tensor& g = tp.grad(self);
    Tensor& dx = tp.grad(xi);
    for (std::size_t i = 0; i < in.numel(); ++i)
      if (in[i] > 0.0) dx[i] += g[i];
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  same_tape(a, b);
  Tensor y = a.value() + b.value();
  const std::size_t ai = a.index, bi = b.index;
  return t.record(std::move(y), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
    for (std::size_t target : {ai, bi}) {
      if (!tp.requires_grad(target)) continue;
      const Tensor& g = tp.grad(self);
      Tensor& d = tp.grad(target);
      for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
    }
  });
}

Var residual_block(Var x, Var w1, Var b1, Var w2, Var b2) {
  const Shape xs = x.shape();
  for (Var w : {w1, w2}) {
    const Shape ws = w.shape();
    if (ws.h != 3 || ws.w != 3) {
      throw DimensionError("residual_block: kernels must be 3x3, got " + ws.str());
    }
  }
  if (w1.shape().c != xs.c || w2.shape().n != xs.c || w2.shape().c != w1.shape().n) {
    throw DimensionError("residual_block: channel axis mismatch between input " + xs.str() +
                         ", w1 " + w1.shape().str() + " and w2 " + w2.shape().str());
  }
  const ConvParams same{1, 1};
  return add(x, conv2d(relu(conv2d(x, w1, b1, same)), w2, b2, same));
}

Var mse_loss(Var pred, Var target) {
  Tape& t = tape_of(pred);
  same_tape(pred, target);
  const Tensor& pv = pred.value();
  const Tensor& tv = target.value();
  if (pv.shape() != tv.shape()) {
    throw DimensionError("mse_loss: prediction " + pv.shape().str() + " vs target " +
                         tv.shape().str());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.numel(); ++i) {
    const double d = pv[i] - tv[i];
    acc += d * d;
  }
  const double inv = 1.0 / static_cast<double>(pv.numel());
  const std::size_t pi = pred.index, ti = target.index;
  return t.record(Tensor(Shape{1, 1, 1, 1}, acc * inv), {pi, ti},
                  [pi, ti, inv](Tape& tp, std::size_t self) {
                    const double g = tp.grad(self)[0];
                    const Tensor& a = tp.value(pi);
                    const Tensor& b = tp.value(ti);
                    const double scale = 2.0 * inv * g;
                    if (tp.requires_grad(pi)) {
                      Tensor& d = tp.grad(pi);
                      for (std::size_t i = 0; i < a.numel(); ++i) d[i] += scale * (a[i] - b[i]);
                    }
                    if (tp.requires_grad(ti)) {
                      Tensor& d = tp.grad(ti);
                      for (std::size_t i = 0; i < a.numel(); ++i) d[i] -= scale * (a[i] - b[i]);
                    }
                  });
}

Var linear(Var x, Var w) {
  Tape& t = tape_of(x);
  same_tape(x, w);
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  if (ws.n != 1 || ws.c != 1) throw DimensionError("linear: weight must be a matrix, got " + ws.str());
  const std::size_t rows = xs.n;
  const std::size_t in = xs.c * xs.h * xs.w;
  const std::size_t out = ws.h;
  if (in != ws.w) {
    throw DimensionError("linear: row length " + std::to_string(in) +
                         " does not match weight columns " + std::to_string(ws.w));
  }
  // 1x1 convolution over a 1x1 plane is exactly the row-wise matrix product.
  Tensor xr = x.value().reshaped(Shape{rows, in, 1, 1});
  Tensor wk = w.value().reshaped(Shape{out, in, 1, 1});
  Tensor y = conv2d_forward(xr, wk, nullptr, ConvParams{});
  const std::size_t xi = x.index, wi = w.index;
  return t.record(std::move(y), {xi, wi}, [=](Tape& tp, std::size_t self) {
    const Tensor xr2 = tp.value(xi).reshaped(Shape{rows, in, 1, 1});
    const Tensor wk2 = tp.value(wi).reshaped(Shape{out, in, 1, 1});
    Tensor dx(xr2.shape());
    Tensor dw(wk2.shape());
    const bool need_x = tp.requires_grad(xi);
    const bool need_w = tp.requires_grad(wi);
    conv2d_backward(xr2, wk2, tp.grad(self), ConvParams{}, need_x ? &dx : nullptr,
                    need_w ? &dw : nullptr, nullptr);
    if (need_x) {
      Tensor& g = tp.grad(xi);
      for (std::size_t i = 0; i < dx.numel(); ++i) g[i] += dx[i];
    }
    if (need_w) {
      Tensor& g = tp.grad(wi);
      for (std::size_t i = 0; i < dw.numel(); ++i) g[i] += dw[i];
    }
  });
}

Var reshape(Var x, Shape shape) {
  Tape& t = tape_of(x);
  Tensor y = x.value().reshaped(shape);
  const std::size_t xi = x.index;
  return t.record(std::move(y), {xi}, [xi](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& d = tp.grad(xi);
    for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
  });
}

Var crop(Var x, std::size_t height, std::size_t width) {
  Tape& t = tape_of(x);
  if (x.shape().h == height && x.shape().w == width) return x;
  Tensor y = crop(x.value(), height, width);
  const std::size_t xi = x.index;
  return t.record(std::move(y), {xi}, [xi, height, width](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& d = tp.grad(xi);
    const Shape s = d.shape();
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t i = 0; i < height; ++i)
          for (std::size_t j = 0; j < width; ++j) d.at(n, c, i, j) += g.at(n, c, i, j);
  });
}

namespace {

// Visits (image offset, block offset) pairs of the raster block layout.
template <typename F>
void for_each_block_pixel(std::size_t n, std::size_t height, std::size_t width, std::size_t block,
                          F&& f) {
  const std::size_t by = height / block, bx = width / block;
  const std::size_t area = block * block;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t r = 0; r < by; ++r)
      for (std::size_t c = 0; c < bx; ++c) {
        const std::size_t b = (s * by + r) * bx + c;
        for (std::size_t i = 0; i < block; ++i)
          for (std::size_t j = 0; j < block; ++j) {
            const std::size_t img = (s * height + r * block + i) * width + c * block + j;
            f(img, b * area + i * block + j);
          }
      }
}

}  // namespace

Var extract_blocks(Var x, std::size_t block) {
  Tape& t = tape_of(x);
  const Shape s = x.shape();
  if (s.c != 1) throw DimensionError("extract_blocks: expected 1 channel, got " + s.str());
  if (block == 0 || s.h % block != 0 || s.w % block != 0) {
    throw GeometryError("extract_blocks: image " + std::to_string(s.h) + "x" +
                        std::to_string(s.w) + " is not a multiple of block size " +
                        std::to_string(block) + "; reflect-pad it first");
  }
  const std::size_t count = s.n * (s.h / block) * (s.w / block);
  Tensor y(Shape{count, 1, block, block});
  const Tensor& xv = x.value();
  for_each_block_pixel(s.n, s.h, s.w, block,
                       [&](std::size_t img, std::size_t blk) { y[blk] = xv[img]; });
  const std::size_t xi = x.index;
  return t.record(std::move(y), {xi}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& d = tp.grad(xi);
    for_each_block_pixel(s.n, s.h, s.w, block,
                         [&](std::size_t img, std::size_t blk) { d[img] += g[blk]; });
  });
}

Var assemble_blocks(Var blocks, std::size_t n, std::size_t height, std::size_t width) {
  Tape& t = tape_of(blocks);
  const Shape s = blocks.shape();
  const std::size_t block = s.h;
  if (s.c != 1 || s.h != s.w || block == 0 || height % block != 0 || width % block != 0 ||
      s.n != n * (height / block) * (width / block)) {
    throw GeometryError("assemble_blocks: " + s.str() + " cannot tile " + std::to_string(n) +
                        "x1x" + std::to_string(height) + "x" + std::to_string(width));
  }
  Tensor y(Shape{n, 1, height, width});
  const Tensor& bv = blocks.value();
  for_each_block_pixel(n, height, width, block,
                       [&](std::size_t img, std::size_t blk) { y[img] = bv[blk]; });
  const std::size_t bi = blocks.index;
  return t.record(std::move(y), {bi}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& d = tp.grad(bi);
    for_each_block_pixel(n, height, width, block,
                         [&](std::size_t img, std::size_t blk) { d[blk] += g[img]; });
  });
}

double value_and_grad(const std::function<Var(Tape&)>& loss_of) {
  Tape tape;
  Var loss = loss_of(tape);
  const double v = loss.value()[0];
  tape.backward(loss);
  return v;
}

}  // namespace fcs

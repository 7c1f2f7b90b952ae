#include <doctest.h>

#include "fcs/errors.hpp"
#include "helpers.hpp"

using namespace fcs;
using fcs::test::naive_conv;
using fcs::test::naive_deconv;
using fcs::test::rel_gap;

namespace {

struct Case {
  std::size_t n, cin, cout, k, s, p, oh, ow;
};

// Random geometry for which conv2d and deconv2d with (k, s, p) are mutual adjoints.
Case random_case(Rng& rng) {
  Case c{};
  c.n = 1 + rng.index(2);
  c.cin = 1 + rng.index(3);
  c.cout = 1 + rng.index(3);
  c.k = 1 + rng.index(5);
  c.s = 1 + rng.index(3);
  c.p = rng.index(c.k);
  c.oh = 1 + rng.index(4);
  c.ow = 1 + rng.index(4);
  return c;
}

Shape input_shape(const Case& c) {
  return {c.n, c.cin, (c.oh - 1) * c.s + c.k - 2 * c.p, (c.ow - 1) * c.s + c.k - 2 * c.p};
}

bool valid(const Case& c) {
  const auto h = static_cast<std::ptrdiff_t>((c.oh - 1) * c.s + c.k) - 2 * static_cast<std::ptrdiff_t>(c.p);
  const auto w = static_cast<std::ptrdiff_t>((c.ow - 1) * c.s + c.k) - 2 * static_cast<std::ptrdiff_t>(c.p);
  return h > 0 && w > 0;
}

}  // namespace

TEST_CASE("conv2d matches the direct-loop oracle over random geometry") {
  Rng rng(11);
  int checked = 0;
  while (checked < 150) {
    const Case c = random_case(rng);
    if (!valid(c)) continue;
    const Tensor x = randn(input_shape(c), rng);
    const Tensor w = randn(Shape{c.cout, c.cin, c.k, c.k}, rng);
    const Tensor b = randn(Shape{1, c.cout, 1, 1}, rng);
    const Tensor y = conv2d_forward(x, w, &b, {c.s, c.p});
    const Tensor ref = naive_conv(x, w, &b, c.s, c.p);
    REQUIRE(y.shape() == ref.shape());
    CHECK(relative_difference(y, ref) < 1e-13);
    ++checked;
  }
}

TEST_CASE("deconv2d matches the scatter-accumulate oracle over random geometry") {
  Rng rng(12);
  int checked = 0;
  while (checked < 150) {
    const Case c = random_case(rng);
    if (!valid(c)) continue;
    const Tensor x = randn(Shape{c.n, c.cout, c.oh, c.ow}, rng);
    const Tensor w = randn(Shape{c.cout, c.cin, c.k, c.k}, rng);
    const Tensor b = randn(Shape{1, c.cin, 1, 1}, rng);
    const Tensor y = deconv2d_forward(x, w, &b, {c.s, c.p});
    const Tensor ref = naive_deconv(x, w, &b, c.s, c.p);
    REQUIRE(y.shape() == ref.shape());
    CHECK(relative_difference(y, ref) < 1e-13);
    ++checked;
  }
}

TEST_CASE("conv2d examples") {
  const Tensor x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  const Tensor ones(Shape{1, 1, 2, 2}, 1.0);
  const Tensor y = conv2d_forward(x, ones, nullptr, {1, 0});
  REQUIRE(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y[0] == 10.0);

  Rng rng(3);
  const Tensor big = randn(Shape{2, 3, 9, 7}, rng);
  const Tensor zero_w(Shape{4, 3, 3, 3}, 0.0);
  const Tensor z = conv2d_forward(big, zero_w, nullptr, {2, 1});
  CHECK(z.shape() == Shape{2, 4, 5, 4});
  CHECK(max_abs(z) == 0.0);

  const Tensor single = randn(Shape{1, 1, 5, 6}, rng);
  const Tensor identity(Shape{1, 1, 1, 1}, 1.0);
  CHECK(bitwise_equal(conv2d_forward(single, identity, nullptr, {1, 0}), single));
}

TEST_CASE("deconv2d examples") {
  Rng rng(4);
  const Tensor x = randn(Shape{1, 1, 4, 4}, rng);
  const Tensor w = randn(Shape{1, 1, 2, 2}, rng);
  CHECK(deconv2d_forward(x, w, nullptr, {2, 0}).shape() == Shape{1, 1, 8, 8});

  const Tensor two(Shape{1, 1, 1, 1}, 2.0);
  const Tensor k(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  const Tensor y = deconv2d_forward(two, k, nullptr, {1, 0});
  CHECK(y.values() == Buffer{2, 4, 6, 8});

  const Tensor zero_w(Shape{1, 3, 4, 4}, 0.0);
  CHECK(max_abs(deconv2d_forward(x, zero_w, nullptr, {2, 1})) == 0.0);
}

TEST_CASE("conv2d and deconv2d are adjoint over 200 seeded cases") {
  double worst = 0.0;
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 200; ++seed) {
    Rng rng(1000 + seed);
    const Case c = random_case(rng);
    if (!valid(c)) continue;
    const Tensor x = randn(input_shape(c), rng);
    const Tensor w = randn(Shape{c.cout, c.cin, c.k, c.k}, rng);
    const Tensor y = randn(Shape{c.n, c.cout, c.oh, c.ow}, rng);
    const double lhs = dot(conv2d_forward(x, w, nullptr, {c.s, c.p}), y);
    // The conv kernel (Cout, Cin, k, k) read as a deconv kernel maps Cout channels back to Cin.
    const double rhs = dot(x, deconv2d_forward(y, w, nullptr, {c.s, c.p}));
    worst = std::max(worst, rel_gap(lhs, rhs));
    ++checked;
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("conv2d and deconv2d are linear in the input over 200 seeded cases") {
  double worst_conv = 0.0, worst_deconv = 0.0;
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 200; ++seed) {
    Rng rng(5000 + seed);
    const Case c = random_case(rng);
    if (!valid(c)) continue;
    const double alpha = rng.normal(), beta = rng.normal();
    const Tensor w = randn(Shape{c.cout, c.cin, c.k, c.k}, rng);
    const ConvParams p{c.s, c.p};

    const Tensor x1 = randn(input_shape(c), rng), x2 = randn(input_shape(c), rng);
    const Tensor lhs = conv2d_forward(alpha * x1 + beta * x2, w, nullptr, p);
    const Tensor rhs = alpha * conv2d_forward(x1, w, nullptr, p) + beta * conv2d_forward(x2, w, nullptr, p);
    worst_conv = std::max(worst_conv, relative_difference(lhs, rhs));

    const Tensor y1 = randn(Shape{c.n, c.cout, c.oh, c.ow}, rng), y2 = randn(Shape{c.n, c.cout, c.oh, c.ow}, rng);
    const Tensor dl = deconv2d_forward(alpha * y1 + beta * y2, w, nullptr, p);
    const Tensor dr = alpha * deconv2d_forward(y1, w, nullptr, p) + beta * deconv2d_forward(y2, w, nullptr, p);
    worst_deconv = std::max(worst_deconv, relative_difference(dl, dr));
    ++checked;
  }
  CHECK(worst_conv <= 1e-12);
  CHECK(worst_deconv <= 1e-12);
}

TEST_CASE("conv then deconv with the same geometry restores spatial extent") {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    const Case c = random_case(rng);
    if (!valid(c)) continue;
    const Shape xs = input_shape(c);
    const Tensor x = randn(xs, rng);
    const Tensor w = randn(Shape{c.cout, c.cin, c.k, c.k}, rng);
    const Tensor y = deconv2d_forward(conv2d_forward(x, w, nullptr, {c.s, c.p}), w, nullptr, {c.s, c.p});
    CHECK(y.shape() == xs);
  }
}

TEST_CASE("conv2d backward agrees with the adjoint and a direct weight-gradient sum") {
  Rng rng(31);
  for (int t = 0; t < 40; ++t) {
    const Case c = random_case(rng);
    if (!valid(c)) continue;
    const Tensor x = randn(input_shape(c), rng);
    const Tensor w = randn(Shape{c.cout, c.cin, c.k, c.k}, rng);
    const Tensor dy = randn(Shape{c.n, c.cout, c.oh, c.ow}, rng);
    Tensor dx(x.shape()), dw(w.shape()), db(Shape{1, c.cout, 1, 1});
    conv2d_backward(x, w, dy, {c.s, c.p}, &dx, &dw, &db);
    CHECK(relative_difference(dx, naive_deconv(dy, w, nullptr, c.s, c.p)) < 1e-12);

    // dL/dw[o,i,u,v] = <dy[:,o], conv of x[:,i] with a unit kernel at (u,v)>
    Tensor ref_dw(w.shape());
    for (std::size_t o = 0; o < c.cout; ++o)
      for (std::size_t i = 0; i < c.cin; ++i)
        for (std::size_t u = 0; u < c.k; ++u)
          for (std::size_t v = 0; v < c.k; ++v) {
            Tensor unit(w.shape());
            unit.at(o, i, u, v) = 1.0;
            ref_dw.at(o, i, u, v) = dot(naive_conv(x, unit, nullptr, c.s, c.p), dy);
          }
    CHECK(relative_difference(dw, ref_dw) < 1e-12);
    for (std::size_t o = 0; o < c.cout; ++o) {
      double sum = 0.0;
      for (std::size_t n = 0; n < c.n; ++n)
        for (std::size_t i = 0; i < c.oh; ++i)
          for (std::size_t j = 0; j < c.ow; ++j) sum += dy.at(n, o, i, j);
      CHECK(db[o] == doctest::Approx(sum).epsilon(1e-12));
    }
  }
}

TEST_CASE("deconv2d backward agrees with conv2d as its adjoint") {
  Rng rng(32);
  for (int t = 0; t < 40; ++t) {
    const Case c = random_case(rng);
    if (!valid(c)) continue;
    const Tensor x = randn(Shape{c.n, c.cout, c.oh, c.ow}, rng);
    const Tensor w = randn(Shape{c.cout, c.cin, c.k, c.k}, rng);
    const Tensor dy = randn(input_shape(c), rng);
    Tensor dx(x.shape()), dw(w.shape()), db(Shape{1, c.cin, 1, 1});
    deconv2d_backward(x, w, dy, {c.s, c.p}, &dx, &dw, &db);
    CHECK(relative_difference(dx, naive_conv(dy, w, nullptr, c.s, c.p)) < 1e-12);

    Tensor ref_dw(w.shape());
    for (std::size_t a = 0; a < c.cout; ++a)
      for (std::size_t b = 0; b < c.cin; ++b)
        for (std::size_t u = 0; u < c.k; ++u)
          for (std::size_t v = 0; v < c.k; ++v) {
            Tensor unit(w.shape());
            unit.at(a, b, u, v) = 1.0;
            ref_dw.at(a, b, u, v) = dot(naive_deconv(x, unit, nullptr, c.s, c.p), dy);
          }
    CHECK(relative_difference(dw, ref_dw) < 1e-12);
  }
}

TEST_CASE("convolution errors") {
  const Tensor x(Shape{1, 2, 6, 6});
  const Tensor w(Shape{3, 1, 3, 3});
  try {
    conv2d_forward(x, w, nullptr, {1, 1});
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("channel") != std::string::npos);
  }
  const Tensor big(Shape{1, 2, 9, 9});
  CHECK_THROWS_AS(conv2d_forward(x, big, nullptr, {1, 1}), GeometryError);
  CHECK_THROWS_AS(conv2d_forward(x, Tensor(Shape{1, 2, 3, 3}), nullptr, {2, 0}), GeometryError);
  CHECK_THROWS_AS(deconv2d_forward(Tensor(Shape{1, 1, 1, 1}), Tensor(Shape{1, 1, 2, 2}), nullptr, {1, 1}),
                  GeometryError);
  CHECK_THROWS_AS(deconv2d_forward(x, Tensor(Shape{1, 1, 2, 2}), nullptr, {1, 0}), DimensionError);
}

TEST_CASE("convolution output is bit-deterministic") {
  Rng rng(8);
  const Tensor x = randn(Shape{2, 3, 20, 20}, rng);
  const Tensor w = randn(Shape{5, 3, 4, 4}, rng);
  CHECK(bitwise_equal(conv2d_forward(x, w, nullptr, {2, 1}), conv2d_forward(x, w, nullptr, {2, 1})));
}

TEST_CASE("reflect padding and cropping") {
  CHECK(reflect_index(-1, 4) == 1);
  CHECK(reflect_index(4, 4) == 2);
  CHECK(reflect_index(5, 4) == 1);
  CHECK(reflect_index(6, 4) == 0);
  CHECK(reflect_index(7, 4) == 1);
  CHECK(reflect_index(3, 1) == 0);

  const Tensor x(Shape{1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor p = reflect_pad(x, 4, 5);
  CHECK(p.shape() == Shape{1, 1, 4, 5});
  CHECK(p.at(0, 0, 0, 3) == 2.0);
  CHECK(p.at(0, 0, 0, 4) == 1.0);
  CHECK(p.at(0, 0, 2, 0) == 1.0);
  CHECK(p.at(0, 0, 3, 4) == 4.0);
  CHECK(bitwise_equal(crop(p, 2, 3), x));
  CHECK_THROWS_AS(crop(x, 3, 3), GeometryError);
}

TEST_CASE("tensor construction checks data length") {
  CHECK_THROWS_AS(Tensor(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  const Tensor t(Shape{2, 3, 4, 5});
  CHECK(t.numel() == 120);
  CHECK(t.all_finite());
}

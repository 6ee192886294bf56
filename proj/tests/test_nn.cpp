#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "typodiff/nn.hpp"

using namespace td;
using namespace td::nn;
using Md = Mat<double>;

namespace {

Md random_mat(int r, int c, Rng& rng, double std = 1.0) {
  Md m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal() * std;
  return m;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Central-difference check of `grad` (already computed) against the scalar
// function `loss` for `n_coords` random coordinates of `value`.
void check_grads(Md& value, const Md& grad, const std::function<double()>& loss, Rng& rng,
                 int n_coords = 20, double h = 1e-5, double tol = 1e-3) {
  REQUIRE(grad.rows() == value.rows());
  REQUIRE(grad.cols() == value.cols());
  for (int k = 0; k < n_coords; ++k) {
    int i = int(rng.uniform_int(0, value.rows() - 1));
    int j = int(rng.uniform_int(0, value.cols() - 1));
    double w = value(i, j);
    value(i, j) = w + h;
    double lp = loss();
    value(i, j) = w - h;
    double lm = loss();
    value(i, j) = w;
    double fd = (lp - lm) / (2.0 * h);
    CHECK_MESSAGE(rel_err(fd, grad(i, j)) < tol, "coord (", i, ",", j, ") fd=", fd,
                  " analytic=", grad(i, j));
  }
}

}  // namespace

TEST_CASE("linear layer gradients") {
  Rng rng(11);
  Linear<double> lin;
  lin.init("lin", "t", 5, 3, rng);
  Md x = random_mat(4, 5, rng);
  Md w_out = random_mat(4, 3, rng);
  auto loss = [&] { return (lin.forward(x).array() * w_out.array()).sum(); };
  loss();
  lin.W.zero_grad();
  lin.b.zero_grad();
  Md dx = lin.backward(w_out);
  check_grads(x, dx, loss, rng);
  check_grads(lin.W.w, lin.W.g, loss, rng);
  check_grads(lin.b.w, lin.b.g, loss, rng, 3);
}

TEST_CASE("layer norm gradients") {
  Rng rng(12);
  LayerNorm<double> ln;
  ln.init("ln", "t", 6);
  Md x = random_mat(5, 6, rng, 2.0);
  Md w_out = random_mat(5, 6, rng);
  auto loss = [&] { return (ln.forward(x).array() * w_out.array()).sum(); };
  loss();
  ln.gamma.zero_grad();
  ln.beta.zero_grad();
  Md dx = ln.backward(w_out);
  check_grads(x, dx, loss, rng);
  check_grads(ln.gamma.w, ln.gamma.g, loss, rng, 6);
  check_grads(ln.beta.w, ln.beta.g, loss, rng, 6);
}

TEST_CASE("group norm gradients over two segments") {
  Rng rng(13);
  GroupNorm<double> gn;
  gn.init("gn", "t", 8, 4);
  Md x = random_mat(12, 8, rng, 1.5);  // 2 segments of 6 rows
  Md w_out = random_mat(12, 8, rng);
  auto loss = [&] { return (gn.forward(x, 6).array() * w_out.array()).sum(); };
  loss();
  gn.gamma.zero_grad();
  gn.beta.zero_grad();
  Md dx = gn.backward(w_out);
  check_grads(x, dx, loss, rng, 25);
  check_grads(gn.gamma.w, gn.gamma.g, loss, rng, 8);
  check_grads(gn.beta.w, gn.beta.g, loss, rng, 8);
}

TEST_CASE("silu gradients") {
  Rng rng(14);
  SiLU<double> act;
  Md x = random_mat(4, 7, rng, 2.0);
  Md w_out = random_mat(4, 7, rng);
  auto loss = [&] { return (act.forward(x).array() * w_out.array()).sum(); };
  loss();
  Md dx = act.backward(w_out);
  check_grads(x, dx, loss, rng);
}

TEST_CASE("conv2d gradients, 3x3 and strided and 1x1") {
  Rng rng(15);
  struct CaseSpec {
    int k, stride, H, W;
  };
  for (auto cs : {CaseSpec{3, 1, 5, 4}, CaseSpec{3, 2, 6, 6}, CaseSpec{1, 1, 3, 3}}) {
    Conv2d<double> conv;
    conv.init("c", "t", 3, 2, cs.k, cs.stride, rng);
    const int T = 2;
    Md x = random_mat(T * cs.H * cs.W, 3, rng);
    Md y = conv.forward(x, T, cs.H, cs.W);
    REQUIRE(int(y.rows()) == T * conv.out_h() * conv.out_w());
    REQUIRE(int(y.cols()) == 2);
    Md w_out = random_mat(int(y.rows()), 2, rng);
    auto loss = [&] {
      return (conv.forward(x, T, cs.H, cs.W).array() * w_out.array()).sum();
    };
    loss();
    conv.W.zero_grad();
    conv.b.zero_grad();
    Md dx = conv.backward(w_out);
    check_grads(x, dx, loss, rng, 20);
    check_grads(conv.W.w, conv.W.g, loss, rng, 20);
    check_grads(conv.b.w, conv.b.g, loss, rng, 2);
  }
}

TEST_CASE("upsample is the exact adjoint of its backward") {
  Rng rng(16);
  Upsample2x<double> up;
  const int T = 2, H = 3, W = 4, C = 5;
  Md x = random_mat(T * H * W, C, rng);
  Md y = up.forward(x, T, H, W);
  REQUIRE(int(y.rows()) == T * 4 * H * W);
  // each input row should be copied to exactly 4 output rows
  CHECK(y.row(0) == x.row(0));
  Md cotangent = random_mat(int(y.rows()), C, rng);
  Md dx = up.backward(cotangent);
  double lhs = (y.array() * cotangent.array()).sum();
  double rhs = (x.array() * dx.array()).sum();
  CHECK(rel_err(lhs, rhs) < 1e-12);
}

TEST_CASE("embedding forward and scatter-add backward") {
  Rng rng(17);
  Embedding<double> emb;
  emb.init("e", "t", 10, 4, rng);
  std::vector<int32_t> ids = {3, 7, 3, 0};
  Md y = emb.forward(ids);
  CHECK(y.row(0) == emb.table.w.row(3));
  CHECK(y.row(2) == emb.table.w.row(3));
  Md dy = random_mat(4, 4, rng);
  emb.table.zero_grad();
  emb.backward(dy);
  CHECK((emb.table.g.row(3) - (dy.row(0) + dy.row(2))).norm() < 1e-14);
  CHECK(emb.table.g.row(1).norm() == 0.0);
  CHECK_THROWS_AS(emb.forward({int32_t(99)}), ArgumentError);
}

TEST_CASE("attention matches a scalar triple-loop oracle") {
  Rng rng(18);
  for (int trial = 0; trial < 50; ++trial) {
    const int nq = int(rng.uniform_int(1, 5));
    const int nk = int(rng.uniform_int(1, 5));
    const int heads = int(rng.uniform_int(1, 2));
    const int hd = int(rng.uniform_int(2, 4));
    const int dim = heads * hd;
    const int qd = int(rng.uniform_int(2, 5));
    const int kd = int(rng.uniform_int(2, 5));
    Mha<double> att;
    att.init("a", "t", qd, kd, dim, heads, rng);
    Md xq = random_mat(nq, qd, rng);
    Md xkv = random_mat(nk, kd, rng);
    Md got = att.forward(xq, xkv);

    // direct per-query softmax over keys, one scalar at a time
    Md Q = xq * att.q.W.w + Md::Ones(nq, 1) * att.q.b.w;
    Md K = xkv * att.k.W.w + Md::Ones(nk, 1) * att.k.b.w;
    Md V = xkv * att.v.W.w + Md::Ones(nk, 1) * att.v.b.w;
    Md ctx = Md::Zero(nq, dim);
    for (int h = 0; h < heads; ++h)
      for (int i = 0; i < nq; ++i) {
        std::vector<double> sc(static_cast<size_t>(nk));
        double mx = -1e300;
        for (int j = 0; j < nk; ++j) {
          double s = 0;
          for (int d = 0; d < hd; ++d) s += Q(i, h * hd + d) * K(j, h * hd + d);
          sc[size_t(j)] = s / std::sqrt(double(hd));
          mx = std::max(mx, sc[size_t(j)]);
        }
        double z = 0;
        for (int j = 0; j < nk; ++j) {
          sc[size_t(j)] = std::exp(sc[size_t(j)] - mx);
          z += sc[size_t(j)];
        }
        for (int j = 0; j < nk; ++j)
          for (int d = 0; d < hd; ++d) ctx(i, h * hd + d) += sc[size_t(j)] / z * V(j, h * hd + d);
      }
    Md want = ctx * att.out.W.w + Md::Ones(nq, 1) * att.out.b.w;
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("single key-value pair returns V for every query") {
  Rng rng(19);
  Mha<double> att;
  att.init("a", "t", 4, 6, 8, 2, rng);
  Md xq = random_mat(5, 4, rng);
  Md xkv = random_mat(1, 6, rng);
  Md got = att.forward(xq, xkv);
  Md v_only = xkv * att.v.W.w + Md::Ones(1, 1) * att.v.b.w;
  Md want = (Md::Ones(5, 1) * v_only) * att.out.W.w + Md::Ones(5, 1) * att.out.b.w;
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("segmented self-attention is block-diagonal") {
  Rng rng(20);
  Mha<double> att;
  att.init("a", "t", 6, 6, 6, 2, rng);
  Md x = random_mat(8, 6, rng);  // 2 segments of 4
  Md base = att.forward(x, x, 4);
  // perturb second segment; first segment's output must not move
  Md x2 = x;
  x2.row(6).array() += 1.0;
  Md moved = att.forward(x2, x2, 4);
  CHECK((moved.topRows(4) - base.topRows(4)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((moved.bottomRows(4) - base.bottomRows(4)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("masked keys never receive attention") {
  Rng rng(21);
  Mha<double> att;
  att.init("a", "t", 4, 5, 8, 2, rng);
  Md xq = random_mat(3, 4, rng);
  Md xkv = random_mat(6, 5, rng);
  std::vector<uint8_t> valid = {1, 1, 0, 0, 0, 0};
  Md base = att.forward(xq, xkv, 0, &valid);
  Md xkv2 = xkv;
  xkv2.bottomRows(4).setRandom();
  Md moved = att.forward(xq, xkv2, 0, &valid);
  CHECK((moved - base).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("attention gradients, cross with mask and segmented self") {
  Rng rng(22);
  {
    Mha<double> att;
    att.init("a", "t", 4, 5, 8, 2, rng);
    Md xq = random_mat(3, 4, rng);
    Md xkv = random_mat(4, 5, rng);
    std::vector<uint8_t> valid = {1, 1, 1, 0};
    Md w_out = random_mat(3, 4, rng);
    auto loss = [&] {
      return (att.forward(xq, xkv, 0, &valid).array() * w_out.array()).sum();
    };
    loss();
    ParamRefs<double> ps;
    att.collect(ps);
    for (auto* p : ps) p->zero_grad();
    Md dkv = Md::Zero(4, 5);
    Md dq = att.backward(w_out, &dkv);
    check_grads(xq, dq, loss, rng, 12);
    check_grads(xkv, dkv, loss, rng, 12);
    for (auto* p : ps) check_grads(p->w, p->g, loss, rng, 8);
  }
  {
    Mha<double> att;
    att.init("s", "t", 6, 6, 6, 3, rng);
    Md x = random_mat(6, 6, rng);  // 2 segments of 3
    Md w_out = random_mat(6, 6, rng);
    auto loss = [&] { return (att.forward(x, x, 3).array() * w_out.array()).sum(); };
    loss();
    ParamRefs<double> ps;
    att.collect(ps);
    for (auto* p : ps) p->zero_grad();
    Md dx = att.backward(w_out);
    check_grads(x, dx, loss, rng, 20);
    for (auto* p : ps) check_grads(p->w, p->g, loss, rng, 8);
  }
}

TEST_CASE("zero-initialized output projection makes attention a no-op") {
  Rng rng(23);
  Mha<double> att;
  att.init("a", "t", 4, 4, 8, 2, rng, /*zero_out_proj=*/true);
  Md x = random_mat(5, 4, rng);
  CHECK(att.forward(x, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sinusoid position codes are distinct and bounded") {
  std::vector<double> a(16), b(16);
  sinusoid(0, 16, a.data());
  sinusoid(7, 16, b.data());
  CHECK(a != b);
  for (double v : a) CHECK(std::abs(v) <= 1.0);
  for (int i = 0; i < 8; ++i) CHECK(a[size_t(8 + i)] == 1.0);  // cos(0)
}

TEST_CASE("adamw matches a hand-stepped reference and respects the subset") {
  Rng rng(24);
  Param<double> p, frozen;
  p.setup("p", "t", 1, 2);
  p.w << 0.5, -1.0;
  p.g = Md::Zero(1, 2);
  p.g << 0.2, -0.4;
  frozen.setup("f", "t", 1, 1);
  frozen.w << 3.0;
  frozen.g << 99.0;

  AdamW<double> opt;
  opt.lr = 0.01;
  opt.weight_decay = 0.1;
  opt.attach({&p});
  opt.step();

  for (int j = 0; j < 2; ++j) {
    double g = j == 0 ? 0.2 : -0.4;
    double w0 = j == 0 ? 0.5 : -1.0;
    double m = 0.1 * g, v = 0.001 * g * g;
    double mhat = m / 0.1, vhat = v / 0.001;
    double want = w0 - 0.01 * (mhat / (std::sqrt(vhat) + 1e-8) + 0.1 * w0);
    CHECK(std::abs(p.w(0, j) - want) < 1e-12);
  }
  CHECK(frozen.w(0, 0) == 3.0);  // not attached, never moves
}

TEST_CASE("parameter checksums change only when parameters change") {
  Rng rng(25);
  Param<float> a, b;
  a.setup_normal("a", "g1", 3, 3, 1.0, rng);
  b.setup_normal("b", "g2", 2, 2, 1.0, rng);
  ParamRefs<float> refs = {&a, &b};
  uint64_t h1 = params_checksum(refs);
  uint64_t h2 = params_checksum(refs);
  CHECK(h1 == h2);
  b.w(0, 0) += 1.0f;
  CHECK(params_checksum(refs) != h1);
  a.g(0, 0) = 123.0f;  // gradients are not part of the checksum
  b.w(0, 0) -= 1.0f;
  CHECK(params_checksum(refs) == h1);
}

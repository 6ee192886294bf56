#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <functional>

#include "typodiff/denoiser.hpp"

using namespace td;
using namespace td::model;
using Mf = nn::Mat<float>;
using Md = nn::Mat<double>;

namespace {

ModelConfig tiny_cfg() {
  ModelConfig c;
  c.widths = {8, 16};
  c.d_txt = 16;
  c.heads = 2;
  c.max_timestep = 50;
  return c;
}

template <typename S>
nn::Mat<S> random_mat(int r, int c, Rng& rng, double std = 1.0) {
  nn::Mat<S> m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = S(rng.normal() * std);
  return m;
}

template <typename S>
Conditioning<S> random_cond(int n, int d, Rng& rng) {
  Conditioning<S> c;
  c.stat = random_mat<S>(n, d, rng);
  c.dyn = random_mat<S>(n, d, rng);
  c.word = random_mat<S>(n, d, rng);
  c.stat_valid.assign(size_t(n), 1);
  c.dyn_valid.assign(size_t(n), 1);
  c.word_valid.assign(size_t(n), 1);
  return c;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("prediction preserves latent shape across resolutions and frame counts") {
  auto vocab = textenc::Vocabulary::standard();
  Model<float> m;
  m.init(tiny_cfg(), vocab, 7);
  Rng rng(1);
  auto cond = random_cond<float>(5, 16, rng);
  for (auto [T, H, W] : {std::tuple{1, 16, 16}, {4, 8, 8}, {2, 16, 8}}) {
    Mf z = random_mat<float>(T * H * W, 3, rng);
    Mf out = m.unet.forward(z, T, H, W, 5, cond);
    CHECK(out.rows() == z.rows());
    CHECK(out.cols() == z.cols());
    CHECK(out.allFinite());
  }
  CHECK_THROWS_AS(m.unet.forward(random_mat<float>(4 * 9 * 9, 3, rng), 4, 9, 9, 5, cond),
                  ArgumentError);
  CHECK_THROWS_AS(m.unet.forward(random_mat<float>(16 * 16, 3, rng), 1, 16, 16, 0, cond),
                  ArgumentError);
  CHECK_THROWS_AS(m.unet.forward(random_mat<float>(16 * 16, 3, rng), 1, 16, 16, 51, cond),
                  ArgumentError);
}

TEST_CASE("freshly initialized model ignores the word caption bitwise") {
  auto vocab = textenc::Vocabulary::standard();
  Model<float> m;
  m.init(tiny_cfg(), vocab, 11);
  Rng rng(2);
  auto stat = textenc::tokenize("red text on a blue background", vocab);
  auto dyn = textenc::tokenize("the text fades in", vocab);
  auto w1 = textenc::tokenize(textenc::make_word_caption("Cat"), vocab);
  auto w2 = textenc::tokenize(textenc::make_word_caption("Zebra"), vocab);
  Mf z = random_mat<float>(2 * 8 * 8, 3, rng);
  auto c1 = m.embed(stat, dyn, w1);
  auto c2 = m.embed(stat, dyn, w2);
  CHECK((c1.word - c2.word).cwiseAbs().maxCoeff() > 0.0f);  // embeddings differ
  Mf o1 = m.unet.forward(z, 2, 8, 8, 3, c1);
  Mf o2 = m.unet.forward(z, 2, 8, 8, 3, c2);
  CHECK((o1 - o2).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("temporal path is exactly inert at initialization") {
  auto vocab = textenc::Vocabulary::standard();
  ModelConfig cfg = tiny_cfg();
  Rng rng(3);
  cfg.use_temporal = false;
  Model<float> image_only;
  image_only.init(cfg, vocab, 21);
  cfg.use_temporal = true;
  Model<float> full;
  full.init(cfg, vocab, 21);
  auto cond = random_cond<float>(5, 16, rng);
  Mf z = random_mat<float>(2 * 8 * 8, 3, rng);
  Mf a = image_only.unet.forward(z, 2, 8, 8, 4, cond);
  Mf b = full.unet.forward(z, 2, 8, 8, 4, cond);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("every parameter belongs to exactly one group") {
  auto vocab = textenc::Vocabulary::standard();
  ModelConfig cfg = tiny_cfg();
  cfg.identity_codec = false;
  cfg.z_channels = 8;
  Model<float> m;
  m.init(cfg, vocab, 5);
  auto all = m.params();
  size_t total = 0;
  for (const char* g :
       {"codec", "text", "spatial", "temporal", "word_spatial", "word_temporal", "backbone"})
    total += m.group(g).size();
  CHECK(total == all.size());
  for (auto* p : all) CHECK(!p->group.empty());
}

TEST_CASE("identity codec round trip") {
  Rng rng(6);
  Codec<double> cd;
  cd.init(true, 3, rng);
  // the render value domain k/255 round-trips exactly at 64-bit
  Md x(256, 3);
  for (int k = 0; k < 256; ++k) x.row(k).setConstant(double(float(k) / 255.0f));
  Md z = cd.encode(x, 1, 16, 16);
  Md back = cd.decode(z, 1, 16, 16);
  CHECK((back - x).cwiseAbs().maxCoeff() == 0.0);
  // 0.5 maps to the latent origin
  Md half = Md::Constant(16, 3, 0.5);
  CHECK(cd.encode(half, 1, 4, 4).cwiseAbs().maxCoeff() == 0.0);

  // 32-bit round trip is within half an ulp of the [-1,1] latent grid
  // (values lose their last bits to the coarser float spacing near +-1)
  Codec<float> cf;
  cf.init(true, 3, rng);
  Mf xf = x.cast<float>();
  Mf backf = cf.decode(cf.encode(xf, 1, 16, 16), 1, 16, 16);
  CHECK((backf - xf).cwiseAbs().maxCoeff() <= std::ldexp(1.0f, -25));
}

TEST_CASE("autoencoder codec shapes and reconstruction gradient smoke") {
  Rng rng(7);
  Codec<float> c;
  c.init(false, 8, rng);
  CHECK(c.factor() == 4);
  Mf x = random_mat<float>(2 * 16 * 16, 3, rng, 0.25);
  x = x.cwiseAbs().cwiseMin(1.0f);
  Mf z = c.encode(x, 2, 16, 16);
  CHECK(z.rows() == 2 * 4 * 4);
  CHECK(z.cols() == 8);
  Mf xr = c.decode_raw(z, 2, 4, 4);
  CHECK(xr.rows() == x.rows());

  nn::ParamRefs<float> ps;
  c.collect(ps);
  nn::AdamW<float> opt;
  opt.lr = 1e-3;
  opt.attach(ps);
  auto mse = [&] {
    Mf r = c.decode_raw(c.encode(x, 2, 16, 16), 2, 4, 4) - x;
    return double(r.squaredNorm()) / double(r.size());
  };
  double before = mse();
  for (int it = 0; it < 40; ++it) {
    opt.zero_grads();
    Mf zz = c.encode(x, 2, 16, 16);
    Mf rr = c.decode_raw(zz, 2, 4, 4);
    Mf d = (rr - x) * float(2.0 / double(rr.size()));
    c.encode_backward(c.decode_backward(d));
    opt.step();
  }
  CHECK(mse() < before);
}

TEST_CASE("checkpoints restore parameters, schedule, and optimizer state") {
  auto vocab = textenc::Vocabulary::standard();
  Model<float> m;
  m.init(tiny_cfg(), vocab, 9);
  diffusion::ScheduleConfig sc;
  sc.steps = 50;

  nn::AdamW<float> opt;
  opt.attach(m.group("spatial"));
  Rng rng(8);
  for (auto* p : opt.params)
    for (int i = 0; i < p->g.rows(); ++i)
      for (int j = 0; j < p->g.cols(); ++j) p->g(i, j) = float(rng.normal());
  opt.step();

  const std::string path = "ckpt_test.bin";
  save_checkpoint(path, m, sc, &opt);

  diffusion::ScheduleConfig sc2;
  nn::AdamW<float> opt2;
  {
    // the resuming optimizer must be attached before loading
    Model<float> probe;
    probe.init(tiny_cfg(), vocab, 0);
    opt2.attach(probe.group("spatial"));
  }
  Model<float> m2;
  m2.init(tiny_cfg(), vocab, 0);
  opt2.attach(m2.group("spatial"));
  m2 = load_checkpoint(path, vocab, &sc2, &opt2);
  CHECK(sc2.steps == 50);
  CHECK(sc2.beta_start == sc.beta_start);
  CHECK(opt2.t == opt.t);

  auto pa = m.params();
  auto pb = m2.params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK((pa[i]->w - pb[i]->w).cwiseAbs().maxCoeff() == 0.0f);
  }
  for (size_t i = 0; i < opt.m.size(); ++i) {
    CHECK((opt.m[i] - opt2.m[i]).cwiseAbs().maxCoeff() == 0.0f);
    CHECK((opt.v[i] - opt2.v[i]).cwiseAbs().maxCoeff() == 0.0f);
  }

  // a different vocabulary is refused
  auto other = textenc::Vocabulary::from_text(vocab.to_text() + "extra_token\n");
  CHECK_THROWS_AS(load_checkpoint(path, other), CompatibilityError);
  std::remove(path.c_str());
}

TEST_CASE("full network gradients against central differences") {
  auto vocab = textenc::Vocabulary::standard();
  ModelConfig cfg = tiny_cfg();
  Model<double> m;
  m.init(cfg, vocab, 13);
  // give the zero-initialized projections signal so their inputs get checked
  Rng rng(14);
  auto ps = m.params();
  for (auto* p : ps)
    if (p->w.cwiseAbs().maxCoeff() == 0.0)
      for (int i = 0; i < p->w.rows(); ++i)
        for (int j = 0; j < p->w.cols(); ++j) p->w(i, j) = rng.normal() * 0.05;

  const int T = 2, H = 8, W = 8;
  Md z = random_mat<double>(T * H * W, 3, rng);
  auto cond = random_cond<double>(4, 16, rng);
  Md w_out = random_mat<double>(T * H * W, 3, rng);
  auto loss = [&] { return (m.unet.forward(z, T, H, W, 7, cond).array() * w_out.array()).sum(); };
  loss();
  for (auto* p : ps) p->zero_grad();
  auto d_cond = Conditioning<double>::zeros_like(cond);
  Md dz = m.unet.backward(w_out, d_cond);

  auto check = [&](Md& value, const Md& grad, int n) {
    for (int k = 0; k < n; ++k) {
      int i = int(rng.uniform_int(0, value.rows() - 1));
      int j = int(rng.uniform_int(0, value.cols() - 1));
      double w = value(i, j);
      const double h = 1e-5;
      value(i, j) = w + h;
      double lp = loss();
      value(i, j) = w - h;
      double lm = loss();
      value(i, j) = w;
      double fd = (lp - lm) / (2.0 * h);
      CHECK_MESSAGE(rel_err(fd, grad(i, j)) < 2e-3, "fd=", fd, " analytic=", grad(i, j));
    }
  };
  check(z, dz, 12);
  check(cond.stat, d_cond.stat, 6);
  check(cond.dyn, d_cond.dyn, 6);
  check(cond.word, d_cond.word, 6);
  // a few load-bearing parameters spread across the graph
  auto probe = [&](const std::string& name) {
    for (auto* p : ps)
      if (p->name == name) {
        check(p->w, p->g, 4);
        return;
      }
    FAIL("missing parameter ", name);
  };
  probe("unet.in.w");
  probe("unet.d0.res.conv1.w");
  probe("unet.d0.res.temb.w");
  probe("unet.dc0.w");
  probe("unet.mid.spat.self.q.w");
  probe("unet.uc0.w");
  probe("unet.u0.res.skip.w");
  probe("unet.u0.temp.self.out.w");
  probe("unet.out.w");
  probe("unet.t1.w");
}

#pragma once

// The video denoiser: latent codec, caption encoder, and a three-level U-Net
// whose levels stack a timestep-conditioned convolutional residual block, a
// per-frame spatial attention block, and a per-location temporal attention
// block. Checkpoints serialize every parameter with its group label plus the
// schedule and vocabulary fingerprint.

#include <map>
#include <string>
#include <vector>

#include "typodiff/attnblocks.hpp"
#include "typodiff/diffusion.hpp"
#include "typodiff/nn.hpp"
#include "typodiff/textenc.hpp"

namespace td::model {

inline int norm_groups(int channels) {
  for (int g : {8, 4, 2})
    if (channels % g == 0) return g;
  return 1;
}

template <typename S>
nn::Mat<S> hcat(const nn::Mat<S>& a, const nn::Mat<S>& b) {
  nn::Mat<S> y(a.rows(), a.cols() + b.cols());
  y << a, b;
  return y;
}

// Caption embeddings consumed by the attention blocks. The same struct holds
// their gradients during backward.
template <typename S>
struct Conditioning {
  nn::Mat<S> stat, dyn, word;
  std::vector<uint8_t> stat_valid, dyn_valid, word_valid;

  static Conditioning zeros_like(const Conditioning& c) {
    Conditioning z;
    z.stat = nn::Mat<S>::Zero(c.stat.rows(), c.stat.cols());
    z.dyn = nn::Mat<S>::Zero(c.dyn.rows(), c.dyn.cols());
    z.word = nn::Mat<S>::Zero(c.word.rows(), c.word.cols());
    return z;
  }
};

template <typename S>
struct ResBlock {
  nn::GroupNorm<S> gn1, gn2;
  nn::SiLU<S> act1, act2;
  nn::Conv2d<S> conv1, conv2, skip;
  nn::Linear<S> temb_proj;
  bool has_skip = false;

  void init(const std::string& name, int cin, int cout, int temb_dim, Rng& rng) {
    gn1.init(name + ".gn1", "backbone", cin, norm_groups(cin));
    gn2.init(name + ".gn2", "backbone", cout, norm_groups(cout));
    conv1.init(name + ".conv1", "backbone", cin, cout, 3, 1, rng);
    conv2.init(name + ".conv2", "backbone", cout, cout, 3, 1, rng);
    temb_proj.init(name + ".temb", "backbone", temb_dim, cout, rng);
    has_skip = cin != cout;
    if (has_skip) skip.init(name + ".skip", "backbone", cin, cout, 1, 1, rng);
  }
  void collect(nn::ParamRefs<S>& out) {
    gn1.collect(out);
    gn2.collect(out);
    conv1.collect(out);
    conv2.collect(out);
    temb_proj.collect(out);
    if (has_skip) skip.collect(out);
  }
  nn::Mat<S> forward(const nn::Mat<S>& x, int T, int H, int W, const nn::Mat<S>& temb) {
    nn::Mat<S> h = conv1.forward(act1.forward(gn1.forward(x, H * W)), T, H, W);
    nn::Mat<S> tv = temb_proj.forward(temb);
    h.rowwise() += tv.row(0);
    h = conv2.forward(act2.forward(gn2.forward(h, H * W)), T, H, W);
    if (has_skip) return h + skip.forward(x, T, H, W);
    return h + x;
  }
  nn::Mat<S> backward(const nn::Mat<S>& dy, nn::Mat<S>& d_temb) {
    nn::Mat<S> dh = gn2.backward(act2.backward(conv2.backward(dy)));
    d_temb += temb_proj.backward(dh.colwise().sum());
    nn::Mat<S> dx = gn1.backward(act1.backward(conv1.backward(dh)));
    if (has_skip)
      dx += skip.backward(dy);
    else
      dx += dy;
    return dx;
  }
};

struct ModelConfig {
  bool identity_codec = true;
  int z_channels = 3;  // forced to 3 in identity mode
  std::vector<int> widths = {64, 128, 256};
  int d_txt = 128;
  int heads = 4;
  int max_timestep = 1000;
  bool use_temporal = true;
  bool word_on = true;
};

template <typename S>
struct UnetLevel {
  ResBlock<S> res;
  blocks::SpatialBlock<S> spat;
  blocks::TemporalBlock<S> temp;
  bool ran_temporal_ = false;

  void init(const std::string& name, int cin, int cout, const ModelConfig& cfg, int temb_dim,
            Rng& rng) {
    res.init(name + ".res", cin, cout, temb_dim, rng);
    spat.init(name + ".spat", cout, cfg.d_txt, cfg.heads, rng);
    temp.init(name + ".temp", cout, cfg.d_txt, cfg.heads, rng);
    spat.word_on = cfg.word_on;
    temp.word_on = cfg.word_on;
  }
  void collect(nn::ParamRefs<S>& out) {
    res.collect(out);
    spat.collect(out);
    temp.collect(out);
  }
  nn::Mat<S> forward(const nn::Mat<S>& x, int T, int H, int W, const nn::Mat<S>& temb,
                     const Conditioning<S>& cond, bool use_temporal) {
    ran_temporal_ = use_temporal;
    nn::Mat<S> h = res.forward(x, T, H, W, temb);
    h = spat.forward(h, H * W, cond.stat, cond.stat_valid, cond.word, cond.word_valid);
    if (use_temporal) h = temp.forward(h, T, cond.dyn, cond.dyn_valid, cond.word, cond.word_valid);
    return h;
  }
  nn::Mat<S> backward(const nn::Mat<S>& dy, nn::Mat<S>& d_temb, Conditioning<S>& d_cond) {
    nn::Mat<S> dh = dy;
    if (ran_temporal_) dh = temp.backward(dh, d_cond.dyn, d_cond.word);
    dh = spat.backward(dh, d_cond.stat, d_cond.word);
    return res.backward(dh, d_temb);
  }
};

template <typename S>
struct UNet {
  ModelConfig cfg;
  int temb_dim = 0;
  nn::Conv2d<S> conv_in;
  std::vector<UnetLevel<S>> down;
  std::vector<nn::Conv2d<S>> down_conv;
  UnetLevel<S> mid;
  std::vector<nn::Upsample2x<S>> ups;
  std::vector<nn::Conv2d<S>> up_conv;
  std::vector<UnetLevel<S>> up;
  nn::GroupNorm<S> head_gn;
  nn::SiLU<S> head_act;
  nn::Conv2d<S> head_conv;
  nn::Linear<S> temb_fc1, temb_fc2;
  nn::SiLU<S> temb_act;
  std::vector<nn::Mat<S>> skips_;

  void init(const ModelConfig& c, Rng& rng) {
    cfg = c;
    const int L = int(cfg.widths.size());
    if (L < 2) throw ArgumentError("unet: need at least 2 levels");
    temb_dim = 4 * cfg.widths[0];
    conv_in.init("unet.in", "backbone", cfg.z_channels, cfg.widths[0], 3, 1, rng);
    down.resize(size_t(L) - 1);
    down_conv.resize(size_t(L) - 1);
    ups.resize(size_t(L) - 1);
    up_conv.resize(size_t(L) - 1);
    up.resize(size_t(L) - 1);
    for (int l = 0; l < L - 1; ++l) {
      const std::string tag = std::to_string(l);
      down[size_t(l)].init("unet.d" + tag, cfg.widths[size_t(l)], cfg.widths[size_t(l)], cfg,
                           temb_dim, rng);
      down_conv[size_t(l)].init("unet.dc" + tag, "backbone", cfg.widths[size_t(l)],
                                cfg.widths[size_t(l) + 1], 3, 2, rng);
    }
    mid.init("unet.mid", cfg.widths[size_t(L) - 1], cfg.widths[size_t(L) - 1], cfg, temb_dim, rng);
    for (int l = 0; l < L - 1; ++l) {
      const std::string tag = std::to_string(l);
      up_conv[size_t(l)].init("unet.uc" + tag, "backbone", cfg.widths[size_t(l) + 1],
                              cfg.widths[size_t(l)], 3, 1, rng);
      up[size_t(l)].init("unet.u" + tag, 2 * cfg.widths[size_t(l)], cfg.widths[size_t(l)], cfg,
                         temb_dim, rng);
    }
    head_gn.init("unet.hgn", "backbone", cfg.widths[0], norm_groups(cfg.widths[0]));
    head_conv.init("unet.out", "backbone", cfg.widths[0], cfg.z_channels, 3, 1, rng, 0.0);
    temb_fc1.init("unet.t1", "backbone", temb_dim, temb_dim, rng);
    temb_fc2.init("unet.t2", "backbone", temb_dim, temb_dim, rng);
  }
  void collect(nn::ParamRefs<S>& out) {
    conv_in.collect(out);
    for (auto& lv : down) lv.collect(out);
    for (auto& cv : down_conv) cv.collect(out);
    mid.collect(out);
    for (auto& cv : up_conv) cv.collect(out);
    for (auto& lv : up) lv.collect(out);
    head_gn.collect(out);
    head_conv.collect(out);
    temb_fc1.collect(out);
    temb_fc2.collect(out);
  }

  nn::Mat<S> forward(const nn::Mat<S>& z, int T, int H, int W, int m,
                     const Conditioning<S>& cond) {
    const int L = int(cfg.widths.size());
    const int div = 1 << (L - 1);
    if (m < 1 || m > cfg.max_timestep) throw ArgumentError("denoiser: timestep out of range");
    if (H % div != 0 || W % div != 0)
      throw ArgumentError("denoiser: resolution not divisible by " + std::to_string(div));
    if (int(z.cols()) != cfg.z_channels || int(z.rows()) != T * H * W)
      throw ArgumentError("denoiser: latent shape mismatch");

    nn::Mat<S> pe(1, temb_dim);
    nn::sinusoid(m, temb_dim, pe.data());
    nn::Mat<S> temb = temb_fc2.forward(temb_act.forward(temb_fc1.forward(pe)));

    nn::Mat<S> h = conv_in.forward(z, T, H, W);
    skips_.clear();
    int hh = H, ww = W;
    for (int l = 0; l < L - 1; ++l) {
      h = down[size_t(l)].forward(h, T, hh, ww, temb, cond, cfg.use_temporal);
      skips_.push_back(h);
      h = down_conv[size_t(l)].forward(h, T, hh, ww);
      hh /= 2;
      ww /= 2;
    }
    h = mid.forward(h, T, hh, ww, temb, cond, cfg.use_temporal);
    for (int l = L - 2; l >= 0; --l) {
      h = ups[size_t(l)].forward(h, T, hh, ww);
      hh *= 2;
      ww *= 2;
      h = up_conv[size_t(l)].forward(h, T, hh, ww);
      h = hcat<S>(h, skips_[size_t(l)]);
      h = up[size_t(l)].forward(h, T, hh, ww, temb, cond, cfg.use_temporal);
    }
    h = head_act.forward(head_gn.forward(h, hh * ww));
    return head_conv.forward(h, T, hh, ww);
  }

  nn::Mat<S> backward(const nn::Mat<S>& dy, Conditioning<S>& d_cond) {
    const int L = int(cfg.widths.size());
    nn::Mat<S> dh = head_gn.backward(head_act.backward(head_conv.backward(dy)));
    nn::Mat<S> d_temb = nn::Mat<S>::Zero(1, temb_dim);
    std::vector<nn::Mat<S>> d_skips(size_t(L) - 1);
    for (int l = 0; l < L - 1; ++l) {
      dh = up[size_t(l)].backward(dh, d_temb, d_cond);
      const int C = cfg.widths[size_t(l)];
      d_skips[size_t(l)] = dh.rightCols(C);
      dh = ups[size_t(l)].backward(up_conv[size_t(l)].backward(dh.leftCols(C).eval()));
    }
    dh = mid.backward(dh, d_temb, d_cond);
    for (int l = L - 2; l >= 0; --l) {
      dh = down_conv[size_t(l)].backward(dh);
      dh += d_skips[size_t(l)];
      dh = down[size_t(l)].backward(dh, d_temb, d_cond);
    }
    nn::Mat<S> dz = conv_in.backward(dh);
    temb_fc1.backward(temb_act.backward(temb_fc2.backward(d_temb)));
    return dz;
  }
};

// Latent codec. Identity mode maps [0,1] pixels affinely onto [-1,1];
// autoencoder mode compresses 4x per spatial axis with a small conv stack
// pretrained by reconstruction.
template <typename S>
struct Codec {
  bool identity = true;
  int z_channels = 3;
  nn::Conv2d<S> e1, e2, d1, d2, d3;
  nn::SiLU<S> ea, da1, da2;
  nn::Upsample2x<S> u1, u2;

  void init(bool identity_mode, int zc, Rng& rng) {
    identity = identity_mode;
    z_channels = identity ? 3 : zc;
    if (!identity) {
      e1.init("codec.e1", "codec", 3, 32, 3, 2, rng);
      e2.init("codec.e2", "codec", 32, z_channels, 3, 2, rng);
      d1.init("codec.d1", "codec", z_channels, 32, 3, 1, rng);
      d2.init("codec.d2", "codec", 32, 32, 3, 1, rng);
      d3.init("codec.d3", "codec", 32, 3, 3, 1, rng);
    }
  }
  void collect(nn::ParamRefs<S>& out) {
    if (identity) return;
    e1.collect(out);
    e2.collect(out);
    d1.collect(out);
    d2.collect(out);
    d3.collect(out);
  }
  int factor() const { return identity ? 1 : 4; }

  nn::Mat<S> encode(const nn::Mat<S>& x, int T, int H, int W) {
    if (int(x.rows()) != T * H * W || int(x.cols()) != 3)
      throw ArgumentError("codec: frame shape mismatch");
    if (identity) return (x.array() * S(2) - S(1)).matrix();
    if (H % 4 != 0 || W % 4 != 0) throw ArgumentError("codec: resolution not divisible by 4");
    nn::Mat<S> h = ea.forward(e1.forward(x, T, H, W));
    return e2.forward(h, T, H / 2, W / 2);
  }
  nn::Mat<S> decode_raw(const nn::Mat<S>& z, int T, int Hz, int Wz) {
    if (identity) return ((z.array() + S(1)) * S(0.5)).matrix();
    nn::Mat<S> h = da1.forward(d1.forward(u1.forward(z, T, Hz, Wz), T, 2 * Hz, 2 * Wz));
    h = da2.forward(d2.forward(u2.forward(h, T, 2 * Hz, 2 * Wz), T, 4 * Hz, 4 * Wz));
    return d3.forward(h, T, 4 * Hz, 4 * Wz);
  }
  nn::Mat<S> decode(const nn::Mat<S>& z, int T, int Hz, int Wz) {
    return decode_raw(z, T, Hz, Wz).cwiseMax(S(0)).cwiseMin(S(1));
  }
  // reconstruction-pretraining gradients (autoencoder mode only)
  nn::Mat<S> decode_backward(const nn::Mat<S>& dy) {
    nn::Mat<S> dh = da2.backward(d3.backward(dy));
    dh = u2.backward(d2.backward(dh));
    dh = da1.backward(dh);
    return u1.backward(d1.backward(dh));
  }
  void encode_backward(const nn::Mat<S>& dz) { e1.backward(ea.backward(e2.backward(dz))); }
};

template <typename S>
struct Model {
  ModelConfig cfg;
  uint64_t vocab_hash = 0;
  Codec<S> codec;
  textenc::TextEncoder<S> text;
  UNet<S> unet;

  void init(const ModelConfig& c, const textenc::Vocabulary& vocab, uint64_t seed) {
    cfg = c;
    if (cfg.identity_codec) cfg.z_channels = 3;
    vocab_hash = vocab.hash();
    Rng rng(seed);
    codec.init(cfg.identity_codec, cfg.z_channels, rng);
    text.init(vocab.size(), rng, cfg.d_txt, cfg.heads);
    unet.init(cfg, rng);
  }
  nn::ParamRefs<S> params() {
    nn::ParamRefs<S> ps;
    codec.collect(ps);
    text.collect(ps);
    unet.collect(ps);
    return ps;
  }
  nn::ParamRefs<S> group(const std::string& g) {
    nn::ParamRefs<S> out;
    for (auto* p : params())
      if (p->group == g) out.push_back(p);
    return out;
  }
  uint64_t group_checksum(const std::string& g) { return nn::params_checksum<S>(group(g)); }

  // Caption embeddings for sampling/eval (one joint encoder pass).
  Conditioning<S> embed(const textenc::TokenSequence& s, const textenc::TokenSequence& d,
                        const textenc::TokenSequence& w) {
    nn::Mat<S> big = text.forward({&s, &d, &w});
    const int N = text.n_max;
    Conditioning<S> c;
    c.stat = big.middleRows(0, N);
    c.dyn = big.middleRows(N, N);
    c.word = big.middleRows(2 * N, N);
    c.stat_valid.assign(text.valid_.begin(), text.valid_.begin() + N);
    c.dyn_valid.assign(text.valid_.begin() + N, text.valid_.begin() + 2 * N);
    c.word_valid.assign(text.valid_.begin() + 2 * N, text.valid_.end());
    return c;
  }
};

// ---- checkpoint io ---------------------------------------------------------

inline constexpr char kCkptMagic[8] = {'K', 'T', 'Y', 'C', 'K', 'P', 'T', '1'};

inline void save_checkpoint(const std::string& path, Model<float>& model,
                            const diffusion::ScheduleConfig& sched,
                            const nn::AdamW<float>* opt = nullptr) {
  ByteWriter w;
  w.magic(kCkptMagic);
  w.u32(1);  // format version
  w.u64(model.vocab_hash);
  const ModelConfig& c = model.cfg;
  w.u32(c.identity_codec ? 1 : 0);
  w.u32(uint32_t(c.z_channels));
  w.u32(uint32_t(c.widths.size()));
  for (int v : c.widths) w.u32(uint32_t(v));
  w.u32(uint32_t(c.d_txt));
  w.u32(uint32_t(c.heads));
  w.u32(uint32_t(c.max_timestep));
  w.u32(c.use_temporal ? 1 : 0);
  w.u32(c.word_on ? 1 : 0);
  w.u32(uint32_t(sched.steps));
  w.f64(sched.beta_start);
  w.f64(sched.beta_end);

  auto ps = model.params();
  w.u32(uint32_t(ps.size()));
  for (const auto* p : ps) {
    w.str(p->name);
    w.str(p->group);
    w.u32(uint32_t(p->w.rows()));
    w.u32(uint32_t(p->w.cols()));
    w.raw(p->w.data(), sizeof(float) * size_t(p->w.size()));
  }
  if (opt) {
    w.u32(1);
    w.i64(opt->t);
    w.u32(uint32_t(opt->params.size()));
    for (size_t i = 0; i < opt->params.size(); ++i) {
      w.str(opt->params[i]->name);
      w.u32(uint32_t(opt->m[i].rows()));
      w.u32(uint32_t(opt->m[i].cols()));
      w.raw(opt->m[i].data(), sizeof(float) * size_t(opt->m[i].size()));
      w.raw(opt->v[i].data(), sizeof(float) * size_t(opt->v[i].size()));
    }
  } else {
    w.u32(0);
  }
  write_file_bytes(path, w.buf.data(), w.buf.size());
}

// Reconstructs the model recorded at `path`. The vocabulary must match the
// one the checkpoint was trained with. If `opt` is given it must already be
// attached to the resuming parameter subset; its moments are restored by
// parameter name.
inline Model<float> load_checkpoint(const std::string& path, const textenc::Vocabulary& vocab,
                                    diffusion::ScheduleConfig* sched_out = nullptr,
                                    nn::AdamW<float>* opt = nullptr) {
  std::vector<uint8_t> bytes = read_file_bytes(path);
  ByteReader r(bytes);
  r.expect_magic(kCkptMagic);
  const uint32_t version = r.u32();
  if (version != 1) throw CompatibilityError("checkpoint: unknown format version");
  const uint64_t vhash = r.u64();
  if (vhash != vocab.hash()) throw CompatibilityError("checkpoint: vocabulary mismatch");

  ModelConfig c;
  c.identity_codec = r.u32() != 0;
  c.z_channels = int(r.u32());
  c.widths.resize(r.u32());
  for (auto& v : c.widths) v = int(r.u32());
  c.d_txt = int(r.u32());
  c.heads = int(r.u32());
  c.max_timestep = int(r.u32());
  c.use_temporal = r.u32() != 0;
  c.word_on = r.u32() != 0;
  diffusion::ScheduleConfig sched;
  sched.steps = int(r.u32());
  sched.beta_start = r.f64();
  sched.beta_end = r.f64();
  if (sched_out) *sched_out = sched;

  Model<float> model;
  model.init(c, vocab, 0);
  std::map<std::string, nn::Param<float>*> by_name;
  for (auto* p : model.params()) by_name[p->name] = p;

  const uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    const std::string name = r.str();
    const std::string grp = r.str();
    const int rows = int(r.u32()), cols = int(r.u32());
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CompatibilityError("checkpoint: unknown parameter " + name);
    nn::Param<float>* p = it->second;
    if (p->group != grp || int(p->w.rows()) != rows || int(p->w.cols()) != cols)
      throw CompatibilityError("checkpoint: shape or group mismatch for " + name);
    r.raw(p->w.data(), sizeof(float) * size_t(p->w.size()));
  }

  const uint32_t has_opt = r.u32();
  if (has_opt) {
    const int64_t t = r.i64();
    const uint32_t k = r.u32();
    std::map<std::string, std::pair<nn::Mat<float>, nn::Mat<float>>> moments;
    for (uint32_t i = 0; i < k; ++i) {
      const std::string name = r.str();
      const int rows = int(r.u32()), cols = int(r.u32());
      nn::Mat<float> m(rows, cols), v(rows, cols);
      r.raw(m.data(), sizeof(float) * size_t(m.size()));
      r.raw(v.data(), sizeof(float) * size_t(v.size()));
      moments[name] = {std::move(m), std::move(v)};
    }
    if (opt) {
      opt->t = t;
      for (size_t i = 0; i < opt->params.size(); ++i) {
        auto it = moments.find(opt->params[i]->name);
        if (it == moments.end())
          throw CompatibilityError("checkpoint: no optimizer state for " + opt->params[i]->name);
        if (it->second.first.rows() != opt->m[i].rows() ||
            it->second.first.cols() != opt->m[i].cols())
          throw CompatibilityError("checkpoint: optimizer shape mismatch");
        opt->m[i] = it->second.first;
        opt->v[i] = it->second.second;
      }
    }
  } else if (opt) {
    throw CompatibilityError("checkpoint: no optimizer state to resume from");
  }
  return model;
}

}  // namespace td::model

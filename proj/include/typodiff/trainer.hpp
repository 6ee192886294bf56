#pragma once

#include <chrono>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "typodiff/config.hpp"
#include "typodiff/corpus.hpp"
#include "typodiff/denoiser.hpp"

namespace td::train {

inline constexpr const char* kGroups[] = {"codec",        "text",          "spatial", "temporal",
                                          "word_spatial", "word_temporal", "backbone"};

struct TrainConfig {
  int stage = 1;
  int steps = 2000;  // optimizer steps for this invocation; 0 derives from epochs
  int epochs = 0;
  int batch = 32;
  double lr = 1e-4;
  double alpha = 0.01;  // glyph-loss weight
  double caption_dropout = 0.1;
  double glyph_sigma = 2.0;
  uint64_t seed = 0;
  std::string corpus;
  std::string out;     // checkpoint path ("" skips saving)
  std::string resume;  // same-stage checkpoint, or for stage 2 the stage-1 one
  std::string log_path;
  bool stage2_backbone = true;  // shared convolutions keep training in stage 2
  model::ModelConfig model;
  diffusion::ScheduleConfig sched;

  void validate() const {
    if (stage != 1 && stage != 2) throw ArgumentError("trainer: stage must be 1 or 2");
    if (!(lr > 0.0)) throw ArgumentError("trainer: learning rate must be positive");
    if (alpha < 0.0) throw ArgumentError("trainer: glyph weight must be nonnegative");
    if (batch < 1) throw ArgumentError("trainer: batch size must be at least 1");
    if (steps < 0 || epochs < 0 || steps + epochs == 0)
      throw ArgumentError("trainer: need a positive step or epoch budget");
    if (caption_dropout < 0.0 || caption_dropout > 1.0)
      throw ArgumentError("trainer: caption dropout rate outside [0,1]");
    if (!(glyph_sigma > 0.0)) throw ArgumentError("trainer: mask blur sigma must be positive");
    if (corpus.empty()) throw ArgumentError("trainer: no corpus path");
  }

  static TrainConfig from_config(const Config& c) {
    TrainConfig t;
    t.stage = int(c.get_int("stage", t.stage));
    t.steps = int(c.get_int("steps", t.steps));
    t.epochs = int(c.get_int("epochs", t.epochs));
    t.batch = int(c.get_int("batch", t.batch));
    t.lr = c.get_float("lr", t.lr);
    t.alpha = c.get_float("alpha", t.alpha);
    t.caption_dropout = c.get_float("caption_dropout", t.caption_dropout);
    t.glyph_sigma = c.get_float("glyph_sigma", t.glyph_sigma);
    t.seed = uint64_t(c.get_int("seed", 0));
    t.corpus = c.get_str("corpus", t.corpus);
    t.out = c.get_str("out", t.out);
    t.resume = c.get_str("resume", t.resume);
    t.log_path = c.get_str("log", t.log_path);
    t.stage2_backbone = c.get_bool("stage2_backbone", t.stage2_backbone);
    t.model.identity_codec = c.get_bool("identity_codec", t.model.identity_codec);
    t.model.z_channels = int(c.get_int("z_channels", t.model.z_channels));
    t.model.widths = c.get_int_list("widths", t.model.widths);
    t.model.d_txt = int(c.get_int("d_txt", t.model.d_txt));
    t.model.heads = int(c.get_int("heads", t.model.heads));
    t.model.word_on = c.get_bool("word_on", t.model.word_on);
    t.sched.steps = int(c.get_int("timesteps", t.sched.steps));
    t.sched.beta_start = c.get_float("beta_start", t.sched.beta_start);
    t.sched.beta_end = c.get_float("beta_end", t.sched.beta_end);
    t.model.max_timestep = t.sched.steps;
    return t;
  }
};

struct StepRecord {
  int step = 0;
  double ldm = 0.0, glyph = 0.0, total = 0.0;
  double wall_ms = 0.0;
};

struct RunLog {
  struct EpochMark {
    int epoch = 0, step = 0;
    std::map<std::string, uint64_t> checksums;
  };
  std::vector<StepRecord> steps;
  std::vector<EpochMark> epochs;

  std::string to_text() const {
    std::ostringstream os;
    os << std::setprecision(17);
    for (const auto& s : steps)
      os << "step=" << s.step << " ldm=" << s.ldm << " glyph=" << s.glyph << " total=" << s.total
         << " wall_ms=" << s.wall_ms << "\n";
    for (const auto& e : epochs) {
      os << "epoch=" << e.epoch << " step=" << e.step;
      for (const auto& [g, h] : e.checksums)
        os << " checksum." << g << "=" << std::hex << std::setw(16) << std::setfill('0') << h
           << std::dec << std::setfill(' ');
      os << "\n";
    }
    return os.str();
  }
};

// Pixel rows of one sample as a (T*H*W) x 3 matrix.
template <typename S>
nn::Mat<S> frames_matrix(const typogen::RenderSample& smp, bool last_only) {
  const int T = last_only ? 1 : smp.T;
  const float* src = last_only ? smp.frame(smp.T - 1) : smp.frames.data();
  nn::Mat<S> x(T * smp.H * smp.W, 3);
  for (int r = 0; r < int(x.rows()); ++r)
    for (int c = 0; c < 3; ++c) x(r, c) = S(src[size_t(r) * 3 + size_t(c)]);
  return x;
}

// Blurred glyph mask resampled to the latent grid.
template <typename S>
std::vector<S> glyph_weights(const typogen::RenderSample& smp, double sigma, int factor) {
  std::vector<double> b = typogen::blur_mask(smp.glyph_mask, smp.H, smp.W, sigma);
  std::vector<double> d = diffusion::downscale_area(b, smp.H, smp.W, factor);
  return std::vector<S>(d.begin(), d.end());
}

// One sample's denoising losses; with_grads accumulates parameter gradients.
template <typename S>
diffusion::LossBreakdown sample_losses(model::Model<S>& m, const diffusion::Schedule& sched,
                                       const textenc::Vocabulary& vocab,
                                       const typogen::RenderSample& smp, bool last_only,
                                       const std::vector<S>& glyph_b, double alpha,
                                       bool drop_captions, Rng& rng, bool with_grads) {
  const int T = last_only ? 1 : smp.T;
  nn::Mat<S> x = frames_matrix<S>(smp, last_only);
  nn::Mat<S> z0 = m.codec.encode(x, T, smp.H, smp.W);
  const int f = m.codec.factor();

  textenc::TokenSequence ts, td, tw;
  if (drop_captions) {
    ts = td = tw = textenc::null_sequence(vocab, m.text.n_max);
  } else {
    ts = textenc::tokenize(smp.captions.static_caption, vocab, m.text.n_max);
    td = textenc::tokenize(smp.captions.dynamic_caption, vocab, m.text.n_max);
    tw = textenc::tokenize(smp.captions.word_caption, vocab, m.text.n_max);
  }
  model::Conditioning<S> cond = m.embed(ts, td, tw);

  diffusion::DrawnStep<S> step = diffusion::draw_step(sched, z0, rng);
  nn::Mat<S> pred = m.unet.forward(step.z_m, T, smp.H / f, smp.W / f, step.m, cond);
  nn::Mat<S> d_pred;
  diffusion::LossBreakdown out =
      diffusion::eps_losses(pred, step, T, glyph_b, alpha, with_grads ? &d_pred : nullptr);
  if (with_grads) {
    model::Conditioning<S> d_cond = model::Conditioning<S>::zeros_like(cond);
    nn::Mat<S> dz = m.unet.backward(d_pred, d_cond);
    nn::Mat<S> big(3 * m.text.n_max, d_cond.stat.cols());
    big << d_cond.stat, d_cond.dyn, d_cond.word;
    m.text.backward(big);
    if (!m.codec.identity) {
      const double ab = sched.alpha_bar[size_t(step.m)];
      m.codec.encode_backward((dz * S(std::sqrt(ab))).eval());
    }
  }
  return out;
}

// The parameter subset a stage optimizes; everything else is frozen by
// simply never being registered with the optimizer.
template <typename S>
nn::ParamRefs<S> stage_params(model::Model<S>& m, int stage, bool stage2_backbone) {
  std::vector<std::string> gs;
  if (stage == 1)
    gs = {"codec", "text", "spatial", "word_spatial", "backbone"};
  else {
    gs = {"temporal", "word_temporal"};
    if (stage2_backbone) gs.push_back("backbone");
  }
  nn::ParamRefs<S> out;
  for (const auto& g : gs) {
    if (!m.cfg.word_on && g.rfind("word_", 0) == 0) continue;
    nn::ParamRefs<S> sub = m.group(g);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

struct TrainResult {
  model::Model<float> model;
  RunLog log;
  diffusion::ScheduleConfig sched;
};

inline TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.stage == 2 && cfg.resume.empty())
    throw CompatibilityError("trainer: stage 2 requires a stage-1 checkpoint");
  typogen::Corpus corpus = typogen::load_corpus(cfg.corpus);
  if (corpus.samples.empty()) throw IoError("trainer: corpus has no samples");
  textenc::Vocabulary vocab = corpus.vocab_text.empty()
                                  ? textenc::Vocabulary::standard()
                                  : textenc::Vocabulary::from_text(corpus.vocab_text);

  TrainResult res;
  model::Model<float>& m = res.model;
  diffusion::ScheduleConfig sc = cfg.sched;
  nn::AdamW<float> opt;
  opt.lr = cfg.lr;

  if (!cfg.resume.empty()) {
    m = model::load_checkpoint(cfg.resume, vocab, &sc);
    opt.attach(stage_params(m, cfg.stage, cfg.stage2_backbone));
    try {
      // a second pass restores moments if the checkpoint covers this
      // stage's subset (same-stage resume)...
      model::load_checkpoint(cfg.resume, vocab, nullptr, &opt);
    } catch (const CompatibilityError&) {
      // ...otherwise it marks a stage boundary: fresh optimizer state
      opt.attach(stage_params(m, cfg.stage, cfg.stage2_backbone));
    }
  } else {
    m.init(cfg.model, vocab, cfg.seed);
    opt.attach(stage_params(m, cfg.stage, cfg.stage2_backbone));
  }

  diffusion::Schedule sched = diffusion::make_schedule(sc);
  if (m.cfg.max_timestep < sched.M)
    throw CompatibilityError("trainer: model timestep range below schedule length");

  const bool last_only = cfg.stage == 1;
  const int n = int(corpus.samples.size());
  for (const auto& s : corpus.samples)
    if (s.T != corpus.samples[0].T || s.H != corpus.samples[0].H || s.W != corpus.samples[0].W)
      throw CompatibilityError("trainer: corpus mixes clip dimensions");

  std::vector<std::vector<float>> gw(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    gw[size_t(i)] = glyph_weights<float>(corpus.samples[size_t(i)], cfg.glyph_sigma,
                                         m.codec.factor());

  const int steps_per_epoch = (n + cfg.batch - 1) / cfg.batch;
  const int total = cfg.steps > 0 ? cfg.steps : cfg.epochs * steps_per_epoch;

  const bool temporal_after = m.cfg.use_temporal;
  if (cfg.stage == 1) m.cfg.use_temporal = false;  // detached: pure image model

  RunLog& log = res.log;
  nn::ParamRefs<float> all = m.params();
  for (int stepi = int(opt.t); stepi < total; ++stepi) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(seed_mix(cfg.seed, "train-step", uint64_t(stepi)));
    for (auto* p : all) p->zero_grad();

    StepRecord rec;
    rec.step = stepi + 1;
    for (int b = 0; b < cfg.batch; ++b) {
      const int si = int(rng.uniform_int(0, n - 1));
      const bool drop = rng.uniform() < cfg.caption_dropout;
      diffusion::LossBreakdown lb =
          sample_losses(m, sched, vocab, corpus.samples[size_t(si)], last_only, gw[size_t(si)],
                        cfg.alpha, drop, rng, true);
      rec.ldm += lb.ldm;
      rec.glyph += lb.glyph;
      rec.total += lb.total;
    }
    const double inv = 1.0 / cfg.batch;
    for (auto* p : opt.params) p->g *= float(inv);
    opt.step();
    rec.ldm *= inv;
    rec.glyph *= inv;
    rec.total *= inv;
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    log.steps.push_back(rec);

    if ((stepi + 1) % steps_per_epoch == 0 || stepi + 1 == total) {
      RunLog::EpochMark em;
      em.step = stepi + 1;
      em.epoch = (stepi + 1 + steps_per_epoch - 1) / steps_per_epoch;
      for (const char* g : kGroups) em.checksums[g] = m.group_checksum(g);
      log.epochs.push_back(em);
    }
  }

  m.cfg.use_temporal = temporal_after;
  res.sched = sc;
  if (!cfg.out.empty()) model::save_checkpoint(cfg.out, m, sc, &opt);
  if (!cfg.log_path.empty()) write_file_text(cfg.log_path, log.to_text());
  return res;
}

// Reconstruction pretraining for the compressing codec. Draws single random
// frames (the codec is per-frame), follows a piecewise-constant learning-rate
// schedule, and returns PSNR (dB) over `held_out` clips. No-op (returns a
// sentinel 99 dB) for the identity codec.
struct CodecPretrainConfig {
  int steps = 12000;
  int batch = 4;
  double lr = 2e-3;
  // {from_step, lr} breakpoints; empty keeps `lr` throughout
  std::vector<std::pair<int, double>> lr_schedule;
  uint64_t seed = 0;
};

inline double codec_psnr(model::Model<float>& m,
                         const std::vector<typogen::RenderSample>& set) {
  double se = 0.0;
  size_t n = 0;
  for (const auto& smp : set) {
    nn::Mat<float> x = frames_matrix<float>(smp, false);
    const int f = m.codec.factor();
    nn::Mat<float> r =
        m.codec.decode(m.codec.encode(x, smp.T, smp.H, smp.W), smp.T, smp.H / f, smp.W / f);
    se += double((r - x).squaredNorm());
    n += size_t(x.size());
  }
  if (n == 0) throw ArgumentError("codec psnr: empty set");
  return se <= 0.0 ? 99.0 : 10.0 * std::log10(double(n) / se);
}

inline double pretrain_codec(model::Model<float>& m,
                             const std::vector<typogen::RenderSample>& samples,
                             const std::vector<typogen::RenderSample>& held_out,
                             const CodecPretrainConfig& pc) {
  if (m.codec.identity) return 99.0;
  if (samples.empty()) throw ArgumentError("codec pretraining: no samples");

  nn::AdamW<float> opt;
  opt.lr = pc.lr;
  opt.attach(m.group("codec"));
  const int n = int(samples.size());
  for (int stepi = 0; stepi < pc.steps; ++stepi) {
    for (const auto& [from, lr] : pc.lr_schedule)
      if (stepi >= from) opt.lr = lr;
    Rng rng(seed_mix(pc.seed, "codec", uint64_t(stepi)));
    opt.zero_grads();
    for (int b = 0; b < pc.batch; ++b) {
      const auto& smp = samples[size_t(rng.uniform_int(0, n - 1))];
      const int t = int(rng.uniform_int(0, smp.T - 1));
      nn::Mat<float> x(smp.H * smp.W, 3);
      const float* src = smp.frame(t);
      for (int r = 0; r < int(x.rows()); ++r)
        for (int c = 0; c < 3; ++c) x(r, c) = src[size_t(r) * 3 + size_t(c)];
      const int f = m.codec.factor();
      nn::Mat<float> rec =
          m.codec.decode_raw(m.codec.encode(x, 1, smp.H, smp.W), 1, smp.H / f, smp.W / f);
      m.codec.encode_backward(
          m.codec.decode_backward(((rec - x) * float(2.0 / double(x.size()))).eval()));
    }
    for (auto* p : opt.params) p->g *= float(1.0 / pc.batch);
    opt.step();
  }
  return codec_psnr(m, held_out.empty() ? samples : held_out);
}

}  // namespace td::train

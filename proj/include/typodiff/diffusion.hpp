#pragma once

// Noise schedule, forward process, the two training losses, and the
// deterministic DDIM sampler with classifier-free guidance. Everything here
// is model-agnostic: predictions enter through callables so the same code
// serves the real denoiser and the oracle stubs in tests.

#include <cmath>
#include <vector>

#include "typodiff/core.hpp"
#include "typodiff/nn.hpp"

namespace td::diffusion {

struct ScheduleConfig {
  int steps = 1000;  // M
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

// beta is indexed 1..M (beta[0] unused); alpha_bar is indexed 0..M with
// alpha_bar[0] = 1 so that timestep 0 means "no noise".
struct Schedule {
  int M = 0;
  std::vector<double> beta;
  std::vector<double> alpha_bar;
};

inline Schedule make_schedule(const ScheduleConfig& cfg) {
  if (cfg.steps < 2) throw ArgumentError("schedule: need at least 2 steps");
  if (!(cfg.beta_start > 0.0 && cfg.beta_start < cfg.beta_end && cfg.beta_end < 1.0))
    throw ArgumentError("schedule: need 0 < beta_start < beta_end < 1");
  Schedule s;
  s.M = cfg.steps;
  s.beta.assign(size_t(cfg.steps) + 1, 0.0);
  s.alpha_bar.assign(size_t(cfg.steps) + 1, 1.0);
  for (int m = 1; m <= cfg.steps; ++m) {
    s.beta[size_t(m)] =
        cfg.beta_start + (cfg.beta_end - cfg.beta_start) * double(m - 1) / double(cfg.steps - 1);
    s.alpha_bar[size_t(m)] = s.alpha_bar[size_t(m) - 1] * (1.0 - s.beta[size_t(m)]);
  }
  return s;
}

template <typename S>
nn::Mat<S> q_sample(const Schedule& sched, const nn::Mat<S>& z0, int m, const nn::Mat<S>& eps) {
  if (m < 0 || m > sched.M) throw ArgumentError("q_sample: timestep out of range");
  if (eps.rows() != z0.rows() || eps.cols() != z0.cols())
    throw ArgumentError("q_sample: noise shape mismatch");
  const double ab = sched.alpha_bar[size_t(m)];
  return (z0.array() * S(std::sqrt(ab)) + eps.array() * S(std::sqrt(1.0 - ab))).matrix();
}

// The one (m, eps) draw a training step makes; both loss terms share it.
template <typename S>
struct DrawnStep {
  int m = 0;
  nn::Mat<S> eps;
  nn::Mat<S> z_m;
};

template <typename S>
DrawnStep<S> draw_step(const Schedule& sched, const nn::Mat<S>& z0, Rng& rng) {
  DrawnStep<S> d;
  d.m = int(rng.uniform_int(1, sched.M));
  d.eps.resize(z0.rows(), z0.cols());
  for (int i = 0; i < d.eps.rows(); ++i)
    for (int j = 0; j < d.eps.cols(); ++j) d.eps(i, j) = S(rng.normal());
  d.z_m = q_sample(sched, z0, d.m, d.eps);
  return d;
}

struct LossBreakdown {
  double ldm = 0.0;
  double glyph = 0.0;
  double total = 0.0;
  double alpha = 0.01;
  int m = 0;
};

// Area-average downscale of a per-pixel weight map by integer factor.
template <typename S>
std::vector<S> downscale_area(const std::vector<S>& m, int H, int W, int f) {
  if (f <= 1) return m;
  if (H % f != 0 || W % f != 0) throw ArgumentError("mask downscale: size not divisible");
  std::vector<S> out(size_t(H / f) * size_t(W / f), S(0));
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      out[size_t(y / f) * size_t(W / f) + size_t(x / f)] += m[size_t(y) * size_t(W) + size_t(x)];
  for (auto& v : out) v /= S(f) * S(f);
  return out;
}

// Denoising loss plus the glyph-masked last-frame term, and (optionally) the
// gradient of the combined loss w.r.t. the prediction. `glyph_b` holds one
// weight per last-frame latent pixel (empty disables the term); the weight
// multiplies the residual before squaring.
template <typename S>
LossBreakdown eps_losses(const nn::Mat<S>& eps_pred, const DrawnStep<S>& step, int T,
                         const std::vector<S>& glyph_b, double alpha,
                         nn::Mat<S>* d_pred = nullptr) {
  if (eps_pred.rows() != step.eps.rows() || eps_pred.cols() != step.eps.cols())
    throw ArgumentError("loss: prediction shape mismatch");
  const int rows = int(eps_pred.rows());
  if (T < 1 || rows % T != 0) throw ArgumentError("loss: bad frame count");
  const int rpf = rows / T;
  if (!glyph_b.empty() && int(glyph_b.size()) != rpf)
    throw ArgumentError("loss: glyph mask does not match latent resolution");

  nn::Mat<S> r = eps_pred - step.eps;
  LossBreakdown out;
  out.alpha = alpha;
  out.m = step.m;
  const double n_all = double(eps_pred.size());
  out.ldm = r.template cast<double>().squaredNorm() / n_all;

  const int last0 = (T - 1) * rpf;
  const double n_last = double(rpf) * double(eps_pred.cols());
  if (!glyph_b.empty()) {
    double gl = 0.0;
    for (int i = 0; i < rpf; ++i) {
      const double b = double(glyph_b[size_t(i)]);
      gl += b * b * r.row(last0 + i).template cast<double>().squaredNorm();
    }
    out.glyph = gl / n_last;
  }
  out.total = out.ldm + alpha * out.glyph;

  if (d_pred) {
    *d_pred = r * S(2.0 / n_all);
    if (!glyph_b.empty())
      for (int i = 0; i < rpf; ++i) {
        const S b = glyph_b[size_t(i)];
        d_pred->row(last0 + i) += r.row(last0 + i) * (S(alpha * 2.0 / n_last) * b * b);
      }
  }
  return out;
}

// Draws (m, eps), queries the predictor at z_m, and scores it.
template <typename S, typename Pred>
LossBreakdown diffusion_loss(const Schedule& sched, const nn::Mat<S>& z0, int T,
                             const std::vector<S>& glyph_b, double alpha, Rng& rng, Pred&& pred,
                             nn::Mat<S>* d_pred = nullptr) {
  DrawnStep<S> step = draw_step(sched, z0, rng);
  nn::Mat<S> p = pred(step.z_m, step.m);
  return eps_losses(p, step, T, glyph_b, alpha, d_pred);
}

// Deterministic DDIM (eta = 0) over `steps` uniformly strided timesteps,
// starting from z ~ N(0,1) at level M and ending at the clean estimate.
// eps_fn(z, m, cond) returns the noise prediction; cond=false selects the
// null-caption branch, requested only when guidance != 1.
// Guidance: eps_hat = eps_uncond + s * (eps_cond - eps_uncond).
template <typename S, typename EpsFn>
nn::Mat<S> ddim_sample(const Schedule& sched, int steps, double guidance_scale, nn::Mat<S> z,
                       EpsFn&& eps_fn) {
  if (guidance_scale < 0.0) throw ArgumentError("sampler: negative guidance scale");
  if (steps < 1 || steps > sched.M) throw ArgumentError("sampler: bad step count");
  std::vector<int> ms(static_cast<size_t>(steps));
  for (int i = 0; i < steps; ++i) ms[size_t(i)] = sched.M - i * sched.M / steps;
  for (int i = 0; i < steps; ++i) {
    const int m = ms[size_t(i)];
    const int m_prev = (i + 1 < steps) ? ms[size_t(i) + 1] : 0;
    nn::Mat<S> e = eps_fn(z, m, true);
    if (guidance_scale != 1.0) {
      nn::Mat<S> eu = eps_fn(z, m, false);
      e = eu + (e - eu) * S(guidance_scale);
    }
    const double ab = sched.alpha_bar[size_t(m)];
    const double abp = sched.alpha_bar[size_t(m_prev)];
    nn::Mat<S> z0_hat = (z - e * S(std::sqrt(1.0 - ab))) * S(1.0 / std::sqrt(ab));
    z = z0_hat * S(std::sqrt(abp)) + e * S(std::sqrt(1.0 - abp));
  }
  return z;
}

}  // namespace td::diffusion

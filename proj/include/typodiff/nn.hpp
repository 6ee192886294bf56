#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "typodiff/core.hpp"

// Minimal hand-written neural net layer zoo: every module owns its weights,
// gradients, and the activation cache of the most recent forward pass, and
// exposes an explicit backward. No autodiff graph; call order is the graph.
// Templated on the scalar so training runs in float while gradient-check
// tests instantiate the exact same code in double.

namespace td::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
struct Param {
  std::string name;
  std::string group;
  Mat<S> w;
  Mat<S> g;

  void setup(const std::string& n, const std::string& grp, int rows, int cols) {
    name = n;
    group = grp;
    w = Mat<S>::Zero(rows, cols);
    g = Mat<S>::Zero(rows, cols);
  }
  // scaled gaussian init, deterministic through the shared rng
  void setup_normal(const std::string& n, const std::string& grp, int rows, int cols, double std,
                    Rng& rng) {
    setup(n, grp, rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) w(i, j) = S(rng.normal() * std);
  }
  size_t count() const { return size_t(w.size()); }
  void zero_grad() { g.setZero(); }
};

template <typename S>
using ParamRefs = std::vector<Param<S>*>;

template <typename S>
struct Linear {
  Param<S> W;  // in x out
  Param<S> b;  // 1 x out
  bool has_bias = true;
  Mat<S> x_;  // cache

  void init(const std::string& name, const std::string& group, int in, int out, Rng& rng,
            bool bias = true, double scale = -1.0) {
    has_bias = bias;
    double std = scale > 0 ? scale : 1.0 / std::sqrt(double(in));
    W.setup_normal(name + ".w", group, in, out, std, rng);
    if (has_bias) b.setup(name + ".b", group, 1, out);
  }
  void init_zero(const std::string& name, const std::string& group, int in, int out) {
    has_bias = true;
    W.setup(name + ".w", group, in, out);
    b.setup(name + ".b", group, 1, out);
  }
  void collect(ParamRefs<S>& out) {
    out.push_back(&W);
    if (has_bias) out.push_back(&b);
  }
  Mat<S> forward(const Mat<S>& x) {
    x_ = x;
    Mat<S> y = x * W.w;
    if (has_bias) y.rowwise() += b.w.row(0);
    return y;
  }
  Mat<S> backward(const Mat<S>& dy) {
    W.g.noalias() += x_.transpose() * dy;
    if (has_bias) b.g.row(0) += dy.colwise().sum();
    return dy * W.w.transpose();
  }
};

template <typename S>
struct LayerNorm {
  Param<S> gamma, beta;  // 1 x C
  S eps = S(1e-5);
  Mat<S> xhat_;
  Mat<S> invstd_;  // N x 1

  void init(const std::string& name, const std::string& group, int C) {
    gamma.setup(name + ".gamma", group, 1, C);
    gamma.w.setOnes();
    beta.setup(name + ".beta", group, 1, C);
  }
  void collect(ParamRefs<S>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
  Mat<S> forward(const Mat<S>& x) {
    const int N = int(x.rows()), C = int(x.cols());
    xhat_.resize(N, C);
    invstd_.resize(N, 1);
    for (int i = 0; i < N; ++i) {
      S mu = x.row(i).mean();
      S var = (x.row(i).array() - mu).square().mean();
      S is = S(1) / std::sqrt(var + eps);
      invstd_(i, 0) = is;
      xhat_.row(i) = (x.row(i).array() - mu) * is;
    }
    Mat<S> y = xhat_;
    y.array().rowwise() *= gamma.w.row(0).array();
    y.rowwise() += beta.w.row(0);
    return y;
  }
  Mat<S> backward(const Mat<S>& dy) {
    const int N = int(dy.rows()), C = int(dy.cols());
    gamma.g.row(0) += (dy.array() * xhat_.array()).colwise().sum().matrix();
    beta.g.row(0) += dy.colwise().sum();
    Mat<S> dx(N, C);
    for (int i = 0; i < N; ++i) {
      auto dxh = (dy.row(i).array() * gamma.w.row(0).array()).eval();
      S m1 = dxh.mean();
      S m2 = (dxh * xhat_.row(i).array()).mean();
      dx.row(i) = ((dxh - m1 - xhat_.row(i).array() * m2) * invstd_(i, 0)).matrix();
    }
    return dx;
  }
};

// Normalizes over (rows of one segment) x (channels of one group); segments
// are consecutive row blocks (one video frame each in this codebase).
template <typename S>
struct GroupNorm {
  Param<S> gamma, beta;  // 1 x C
  int groups = 8;
  S eps = S(1e-5);
  Mat<S> xhat_;
  std::vector<S> invstd_;  // per (segment, group)
  int seg_rows_ = 0;

  void init(const std::string& name, const std::string& group, int C, int g = 8) {
    groups = g;
    if (C % groups != 0) throw ArgumentError("groupnorm: channels not divisible by groups");
    gamma.setup(name + ".gamma", group, 1, C);
    gamma.w.setOnes();
    beta.setup(name + ".beta", group, 1, C);
  }
  void collect(ParamRefs<S>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
  Mat<S> forward(const Mat<S>& x, int seg_rows) {
    const int N = int(x.rows()), C = int(x.cols());
    if (N % seg_rows != 0) throw ArgumentError("groupnorm: rows not divisible by segment");
    const int nseg = N / seg_rows, gc = C / groups;
    seg_rows_ = seg_rows;
    xhat_.resize(N, C);
    invstd_.assign(size_t(nseg) * groups, S(0));
    for (int s = 0; s < nseg; ++s)
      for (int g = 0; g < groups; ++g) {
        auto blk = x.block(s * seg_rows, g * gc, seg_rows, gc);
        S mu = blk.mean();
        S var = (blk.array() - mu).square().mean();
        S is = S(1) / std::sqrt(var + eps);
        invstd_[size_t(s) * groups + g] = is;
        xhat_.block(s * seg_rows, g * gc, seg_rows, gc) = (blk.array() - mu) * is;
      }
    Mat<S> y = xhat_;
    y.array().rowwise() *= gamma.w.row(0).array();
    y.rowwise() += beta.w.row(0);
    return y;
  }
  Mat<S> backward(const Mat<S>& dy) {
    const int N = int(dy.rows()), C = int(dy.cols());
    const int nseg = N / seg_rows_, gc = C / groups;
    gamma.g.row(0) += (dy.array() * xhat_.array()).colwise().sum().matrix();
    beta.g.row(0) += dy.colwise().sum();
    Mat<S> dx(N, C);
    for (int s = 0; s < nseg; ++s)
      for (int g = 0; g < groups; ++g) {
        auto xh = xhat_.block(s * seg_rows_, g * gc, seg_rows_, gc).array();
        auto dxh = (dy.block(s * seg_rows_, g * gc, seg_rows_, gc).array().rowwise() *
                    gamma.w.row(0).segment(g * gc, gc).array())
                       .eval();
        S m1 = dxh.mean();
        S m2 = (dxh * xh).mean();
        dx.block(s * seg_rows_, g * gc, seg_rows_, gc) =
            ((dxh - m1 - xh * m2) * invstd_[size_t(s) * groups + g]).matrix();
      }
    return dx;
  }
};

template <typename S>
struct SiLU {
  Mat<S> x_;
  Mat<S> forward(const Mat<S>& x) {
    x_ = x;
    return (x.array() / (S(1) + (-x.array()).exp())).matrix();
  }
  Mat<S> backward(const Mat<S>& dy) {
    auto sig = (S(1) / (S(1) + (-x_.array()).exp())).eval();
    return (dy.array() * sig * (S(1) + x_.array() * (S(1) - sig))).matrix();
  }
};

// 2D convolution over frame-major token rows: input is (T*H*W) x Cin with
// rows scanning y then x within a frame. im2col per frame, one GEMM each.
template <typename S>
struct Conv2d {
  Param<S> W;  // (k*k*Cin) x Cout
  Param<S> b;  // 1 x Cout
  int k = 3, stride = 1, pad = 1;
  int Cin = 0, Cout = 0;
  int H_ = 0, W_ = 0, T_ = 0;
  std::vector<Mat<S>> cols_;

  void init(const std::string& name, const std::string& group, int cin, int cout, int kernel,
            int stride_, Rng& rng, double scale = -1.0) {
    k = kernel;
    stride = stride_;
    pad = (kernel == 1) ? 0 : kernel / 2;
    Cin = cin;
    Cout = cout;
    double std = scale >= 0 ? scale : 1.0 / std::sqrt(double(k) * k * cin);
    if (std > 0)
      W.setup_normal(name + ".w", group, k * k * cin, cout, std, rng);
    else
      W.setup(name + ".w", group, k * k * cin, cout);
    b.setup(name + ".b", group, 1, cout);
  }
  void collect(ParamRefs<S>& out) {
    out.push_back(&W);
    out.push_back(&b);
  }
  int out_h() const { return (H_ + 2 * pad - k) / stride + 1; }
  int out_w() const { return (W_ + 2 * pad - k) / stride + 1; }

  Mat<S> forward(const Mat<S>& x, int T, int H, int Wd) {
    T_ = T;
    H_ = H;
    W_ = Wd;
    const int Ho = out_h(), Wo = out_w();
    cols_.assign(size_t(T), Mat<S>());
    Mat<S> y(size_t(T) * Ho * Wo, Cout);
    for (int t = 0; t < T; ++t) {
      Mat<S>& col = cols_[size_t(t)];
      col = Mat<S>::Zero(Ho * Wo, k * k * Cin);
      const S* base = x.data() + size_t(t) * H * Wd * Cin;
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          S* crow = col.data() + size_t(oy * Wo + ox) * k * k * Cin;
          for (int ky = 0; ky < k; ++ky) {
            int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < k; ++kx) {
              int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= Wd) continue;
              const S* src = base + size_t(iy * Wd + ix) * Cin;
              S* dst = crow + size_t(ky * k + kx) * Cin;
              for (int c = 0; c < Cin; ++c) dst[c] = src[c];
            }
          }
        }
      y.middleRows(size_t(t) * Ho * Wo, Ho * Wo).noalias() = col * W.w;
    }
    y.rowwise() += b.w.row(0);
    return y;
  }
  Mat<S> backward(const Mat<S>& dy) {
    const int Ho = out_h(), Wo = out_w();
    Mat<S> dx = Mat<S>::Zero(size_t(T_) * H_ * W_, Cin);
    b.g.row(0) += dy.colwise().sum();
    for (int t = 0; t < T_; ++t) {
      auto dyt = dy.middleRows(size_t(t) * Ho * Wo, Ho * Wo);
      W.g.noalias() += cols_[size_t(t)].transpose() * dyt;
      Mat<S> dcol = dyt * W.w.transpose();
      S* base = dx.data() + size_t(t) * H_ * W_ * Cin;
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          const S* crow = dcol.data() + size_t(oy * Wo + ox) * k * k * Cin;
          for (int ky = 0; ky < k; ++ky) {
            int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= H_) continue;
            for (int kx = 0; kx < k; ++kx) {
              int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= W_) continue;
              S* dst = base + size_t(iy * W_ + ix) * Cin;
              const S* src = crow + size_t(ky * k + kx) * Cin;
              for (int c = 0; c < Cin; ++c) dst[c] += src[c];
            }
          }
        }
    }
    return dx;
  }
};

// Nearest-neighbour x2 spatial upsampling (no parameters).
template <typename S>
struct Upsample2x {
  int T_ = 0, H_ = 0, W_ = 0;
  Mat<S> forward(const Mat<S>& x, int T, int H, int W) {
    T_ = T;
    H_ = H;
    W_ = W;
    const int C = int(x.cols());
    Mat<S> y(size_t(T) * 2 * H * 2 * W, C);
    for (int t = 0; t < T; ++t)
      for (int oy = 0; oy < 2 * H; ++oy)
        for (int ox = 0; ox < 2 * W; ++ox)
          y.row(size_t(t) * 4 * H * W + size_t(oy) * 2 * W + ox) =
              x.row(size_t(t) * H * W + size_t(oy / 2) * W + ox / 2);
    return y;
  }
  Mat<S> backward(const Mat<S>& dy) {
    const int C = int(dy.cols());
    Mat<S> dx = Mat<S>::Zero(size_t(T_) * H_ * W_, C);
    for (int t = 0; t < T_; ++t)
      for (int oy = 0; oy < 2 * H_; ++oy)
        for (int ox = 0; ox < 2 * W_; ++ox)
          dx.row(size_t(t) * H_ * W_ + size_t(oy / 2) * W_ + ox / 2) +=
              dy.row(size_t(t) * 4 * H_ * W_ + size_t(oy) * 2 * W_ + ox);
    return dx;
  }
};

template <typename S>
struct Embedding {
  Param<S> table;  // V x C
  std::vector<int32_t> ids_;

  void init(const std::string& name, const std::string& group, int V, int C, Rng& rng,
            double std = 0.02) {
    table.setup_normal(name, group, V, C, std, rng);
  }
  void collect(ParamRefs<S>& out) { out.push_back(&table); }
  Mat<S> forward(const std::vector<int32_t>& ids) {
    ids_ = ids;
    Mat<S> y(int(ids.size()), int(table.w.cols()));
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= table.w.rows()) throw ArgumentError("embedding: id out of range");
      y.row(int(i)) = table.w.row(ids[i]);
    }
    return y;
  }
  void backward(const Mat<S>& dy) {
    for (size_t i = 0; i < ids_.size(); ++i) table.g.row(ids_[size_t(i)]) += dy.row(int(i));
  }
};

// Multi-head attention: queries from x_q, keys/values from x_kv. Scores are
// softmaxed per query over keys scaled by 1/sqrt(head_dim). Two masking
// regimes: `seg_len` restricts self-attention to consecutive row blocks of
// that length (block-diagonal attention, one video frame or one pixel's
// frame column per block), and `kv_valid` drops padded cross-attention keys.
// The softmax matrix is recomputed in backward instead of cached.
template <typename S>
struct Mha {
  Linear<S> q, k, v, out;
  int heads = 4, dim = 0;
  Mat<S> xq_, xkv_, Q_, K_, V_;
  int seg_len_ = 0;
  std::vector<uint8_t> kv_valid_;

  void init(const std::string& name, const std::string& group, int q_dim, int kv_dim, int model_dim,
            int n_heads, Rng& rng, bool zero_out_proj = false) {
    heads = n_heads;
    dim = model_dim;
    if (model_dim % n_heads != 0) throw ArgumentError("attention: dim not divisible by heads");
    q.init(name + ".q", group, q_dim, model_dim, rng);
    k.init(name + ".k", group, kv_dim, model_dim, rng);
    v.init(name + ".v", group, kv_dim, model_dim, rng);
    if (zero_out_proj)
      out.init_zero(name + ".out", group, model_dim, q_dim);
    else
      out.init(name + ".out", group, model_dim, q_dim, rng);
  }
  void collect(ParamRefs<S>& out_refs) {
    q.collect(out_refs);
    k.collect(out_refs);
    v.collect(out_refs);
    out.collect(out_refs);
  }

  // seg_len == 0: every query attends all kv rows (cross-attention);
  // seg_len > 0: rows split into blocks of seg_len, block i of queries
  // attends only block i of keys (x_q and x_kv row counts must match).
  Mat<S> forward(const Mat<S>& x_q, const Mat<S>& x_kv, int seg_len = 0,
                 const std::vector<uint8_t>* kv_valid = nullptr) {
    if (seg_len > 0 && x_q.rows() != x_kv.rows())
      throw ArgumentError("attention: segmented self-attention needs matching rows");
    if (x_q.cols() != q.W.w.rows() || x_kv.cols() != k.W.w.rows())
      throw ArgumentError("attention: input width does not match projections");
    xq_ = x_q;
    xkv_ = x_kv;
    seg_len_ = seg_len;
    kv_valid_ = kv_valid ? *kv_valid : std::vector<uint8_t>();
    Q_ = q.forward(x_q);
    K_ = k.forward(x_kv);
    V_ = v.forward(x_kv);
    Mat<S> ctx(Q_.rows(), dim);
    attend(ctx, nullptr, nullptr, nullptr);
    return out.forward(ctx);
  }
  // dx_kv is accumulated (cross-attention reuses one kv for many calls).
  Mat<S> backward(const Mat<S>& dy, Mat<S>* dx_kv_accum = nullptr) {
    Mat<S> dctx = out.backward(dy);
    Mat<S> dQ = Mat<S>::Zero(Q_.rows(), dim);
    Mat<S> dK = Mat<S>::Zero(K_.rows(), dim);
    Mat<S> scratch(Q_.rows(), dim);
    attend(scratch, &dctx, &dQ, &dK);  // fills dQ, dK, dV_
    Mat<S> dxq = q.backward(dQ);
    Mat<S> dk_in = k.backward(dK);
    Mat<S> dv_in = v.backward(dV_);
    if (dx_kv_accum) {
      *dx_kv_accum += dk_in + dv_in;
      return dxq;
    }
    return dxq + dk_in + dv_in;  // self-attention: same input everywhere
  }

 private:
  Mat<S> dV_;
  // Shared forward/backward attention core. Forward mode (dctx == null):
  // writes context rows. Backward mode: recomputes each softmax block and
  // accumulates dQ, dK, dV_.
  void attend(Mat<S>& ctx, const Mat<S>* dctx, Mat<S>* dQ, Mat<S>* dK) {
    const int hd = dim / heads;
    const S scale = S(1.0 / std::sqrt(double(hd)));
    const int nq = int(Q_.rows()), nk = int(K_.rows());
    const int nseg = seg_len_ > 0 ? nq / seg_len_ : 1;
    const int qlen = seg_len_ > 0 ? seg_len_ : nq;
    const int klen = seg_len_ > 0 ? seg_len_ : nk;
    if (dctx) dV_ = Mat<S>::Zero(nk, dim);
    for (int h = 0; h < heads; ++h)
      for (int s = 0; s < nseg; ++s) {
        auto Qb = Q_.block(s * qlen, h * hd, qlen, hd);
        auto Kb = K_.block(seg_len_ > 0 ? s * klen : 0, h * hd, klen, hd);
        auto Vb = V_.block(seg_len_ > 0 ? s * klen : 0, h * hd, klen, hd);
        Mat<S> logits = (Qb * Kb.transpose()) * scale;
        if (!kv_valid_.empty())
          for (int j = 0; j < klen; ++j)
            if (!kv_valid_[size_t(seg_len_ > 0 ? s * klen + j : j)])
              logits.col(j).array() = S(-1e30);
        // row-wise softmax, max-subtracted for stability
        for (int i = 0; i < qlen; ++i) {
          S mx = logits.row(i).maxCoeff();
          logits.row(i) = (logits.row(i).array() - mx).exp();
          logits.row(i) /= logits.row(i).sum();
        }
        if (!dctx) {
          ctx.block(s * qlen, h * hd, qlen, hd).noalias() = logits * Vb;
        } else {
          auto dC = dctx->block(s * qlen, h * hd, qlen, hd);
          dV_.block(seg_len_ > 0 ? s * klen : 0, h * hd, klen, hd).noalias() +=
              logits.transpose() * dC;
          Mat<S> dP = dC * Vb.transpose();
          // softmax backward: dL = P .* (dP - rowsum(dP .* P))
          for (int i = 0; i < qlen; ++i) {
            S dot = (dP.row(i).array() * logits.row(i).array()).sum();
            dP.row(i) = (logits.row(i).array() * (dP.row(i).array() - dot)).matrix();
          }
          dQ->block(s * qlen, h * hd, qlen, hd).noalias() += (dP * Kb) * scale;
          dK->block(seg_len_ > 0 ? s * klen : 0, h * hd, klen, hd).noalias() +=
              (dP.transpose() * Qb) * scale;
        }
      }
  }
};

// Sinusoidal position code of length `dim` for integer position p.
template <typename S>
void sinusoid(int p, int dim, S* out) {
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
    out[i] = S(std::sin(double(p) * freq));
    out[half + i] = S(std::cos(double(p) * freq));
  }
  if (dim % 2) out[dim - 1] = S(0);
}

// Decoupled-weight-decay Adam over an explicit parameter subset; anything
// not registered simply never moves (structural freezing).
template <typename S>
struct AdamW {
  double lr = 1e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.01;
  int64_t t = 0;
  ParamRefs<S> params;
  std::vector<Mat<S>> m, v;

  void attach(const ParamRefs<S>& ps) {
    params = ps;
    m.clear();
    v.clear();
    for (auto* p : params) {
      m.push_back(Mat<S>::Zero(p->w.rows(), p->w.cols()));
      v.push_back(Mat<S>::Zero(p->w.rows(), p->w.cols()));
    }
    t = 0;
  }
  void zero_grads() {
    for (auto* p : params) p->zero_grad();
  }
  void step() {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, double(t));
    const double bc2 = 1.0 - std::pow(beta2, double(t));
    for (size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      m[i] = S(beta1) * m[i] + S(1.0 - beta1) * p.g;
      v[i] = (S(beta2) * v[i].array() + S(1.0 - beta2) * p.g.array().square()).matrix();
      auto mhat = (m[i].array() / S(bc1)).eval();
      auto vhat = (v[i].array() / S(bc2)).eval();
      p.w.array() -= S(lr) * (mhat / (vhat.sqrt() + S(eps)) + S(weight_decay) * p.w.array());
    }
  }
};

template <typename S>
uint64_t params_checksum(const ParamRefs<S>& ps) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto* p : ps) h = fnv1a64(p->w.data(), sizeof(S) * size_t(p->w.size()), h);
  return h;
}

}  // namespace td::nn

#pragma once

// Video attention blocks over token-rows tensors (T*S rows, frame-major).
//
// SpatialBlock mixes tokens within each frame, then conditions every token
// on a static caption plus a zero-gated word caption branch. TemporalBlock
// regroups rows so each spatial location's T frames form a contiguous block,
// mixes along time, and conditions on a dynamic caption plus its own gated
// word branch. All temporal output projections start at zero, so a freshly
// added TemporalBlock is exactly the identity map.

#include <string>
#include <vector>

#include "typodiff/nn.hpp"

namespace td::blocks {

// Reorders rows indexed (o*inner + i) to (i*outer + o). Applying it twice
// with swapped arguments restores the original order.
template <typename S>
nn::Mat<S> regroup(const nn::Mat<S>& x, int outer, int inner) {
  nn::Mat<S> y(x.rows(), x.cols());
  for (int o = 0; o < outer; ++o)
    for (int i = 0; i < inner; ++i) y.row(i * outer + o) = x.row(o * inner + i);
  return y;
}

template <typename S>
struct SpatialBlock {
  nn::LayerNorm<S> ln1, ln2;
  nn::Mha<S> self_attn, static_cross, word_cross;
  nn::Linear<S> word_gate;
  bool word_on = true;  // false removes the word branch from the graph
  int frame_tokens_ = 0;

  void init(const std::string& name, int C, int d_txt, int heads, Rng& rng) {
    ln1.init(name + ".ln1", "spatial", C);
    ln2.init(name + ".ln2", "spatial", C);
    self_attn.init(name + ".self", "spatial", C, C, C, heads, rng);
    static_cross.init(name + ".cross", "spatial", C, d_txt, C, heads, rng);
    word_cross.init(name + ".word", "word_spatial", C, d_txt, C, heads, rng);
    word_gate.init_zero(name + ".gate", "word_spatial", C, C);
  }
  void collect(nn::ParamRefs<S>& out) {
    ln1.collect(out);
    ln2.collect(out);
    self_attn.collect(out);
    static_cross.collect(out);
    word_cross.collect(out);
    word_gate.collect(out);
  }

  nn::Mat<S> forward(const nn::Mat<S>& h, int frame_tokens, const nn::Mat<S>& stat_emb,
                     const std::vector<uint8_t>& stat_valid, const nn::Mat<S>& word_emb,
                     const std::vector<uint8_t>& word_valid) {
    frame_tokens_ = frame_tokens;
    nn::Mat<S> a = ln1.forward(h);
    nn::Mat<S> h1 = h + self_attn.forward(a, a, frame_tokens);
    nn::Mat<S> b = ln2.forward(h1);
    nn::Mat<S> out = h1 + static_cross.forward(b, stat_emb, 0, &stat_valid);
    if (word_on) out += word_gate.forward(word_cross.forward(b, word_emb, 0, &word_valid));
    return out;
  }
  // Caption-embedding gradients accumulate into d_stat / d_word.
  nn::Mat<S> backward(const nn::Mat<S>& dy, nn::Mat<S>& d_stat, nn::Mat<S>& d_word) {
    nn::Mat<S> db = static_cross.backward(dy, &d_stat);
    if (word_on) db += word_cross.backward(word_gate.backward(dy), &d_word);
    nn::Mat<S> dh1 = dy + ln2.backward(db);
    return dh1 + ln1.backward(self_attn.backward(dh1));
  }
};

template <typename S>
struct TemporalBlock {
  nn::LayerNorm<S> ln1, ln2;
  nn::Mha<S> self_attn, dyn_cross, word_cross;
  nn::Linear<S> word_gate;
  bool word_on = true;
  int T_ = 0, loc_ = 0;

  void init(const std::string& name, int C, int d_txt, int heads, Rng& rng) {
    ln1.init(name + ".ln1", "temporal", C);
    ln2.init(name + ".ln2", "temporal", C);
    self_attn.init(name + ".self", "temporal", C, C, C, heads, rng, /*zero_out_proj=*/true);
    dyn_cross.init(name + ".cross", "temporal", C, d_txt, C, heads, rng, /*zero_out_proj=*/true);
    word_cross.init(name + ".word", "word_temporal", C, d_txt, C, heads, rng);
    word_gate.init_zero(name + ".gate", "word_temporal", C, C);
  }
  void collect(nn::ParamRefs<S>& out) {
    ln1.collect(out);
    ln2.collect(out);
    self_attn.collect(out);
    dyn_cross.collect(out);
    word_cross.collect(out);
    word_gate.collect(out);
  }

  nn::Mat<S> forward(const nn::Mat<S>& h, int T, const nn::Mat<S>& dyn_emb,
                     const std::vector<uint8_t>& dyn_valid, const nn::Mat<S>& word_emb,
                     const std::vector<uint8_t>& word_valid) {
    T_ = T;
    loc_ = int(h.rows()) / T;
    nn::Mat<S> g = regroup(h, T, loc_);  // row = s*T + t
    nn::Mat<S> a = ln1.forward(g);
    // frame-position code enters the attention input only, not the residual
    std::vector<S> pe(size_t(a.cols()));
    for (int t = 0; t < T; ++t) {
      nn::sinusoid(t, int(a.cols()), pe.data());
      for (int s = 0; s < loc_; ++s)
        for (int c = 0; c < a.cols(); ++c) a(s * T + t, c) += pe[size_t(c)];
    }
    nn::Mat<S> g1 = g + self_attn.forward(a, a, T);
    nn::Mat<S> b = ln2.forward(g1);
    nn::Mat<S> out_g = g1 + dyn_cross.forward(b, dyn_emb, 0, &dyn_valid);
    if (word_on) out_g += word_gate.forward(word_cross.forward(b, word_emb, 0, &word_valid));
    return regroup(out_g, loc_, T);
  }
  nn::Mat<S> backward(const nn::Mat<S>& dy, nn::Mat<S>& d_dyn, nn::Mat<S>& d_word) {
    nn::Mat<S> dg_out = regroup(dy, T_, loc_);
    nn::Mat<S> db = dyn_cross.backward(dg_out, &d_dyn);
    if (word_on) db += word_cross.backward(word_gate.backward(dg_out), &d_word);
    nn::Mat<S> dg1 = dg_out + ln2.backward(db);
    nn::Mat<S> dg = dg1 + ln1.backward(self_attn.backward(dg1));
    return regroup(dg, loc_, T_);
  }
};

}  // namespace td::blocks

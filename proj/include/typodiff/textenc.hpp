#pragma once

// Trainable caption encoder: token + learned position embeddings into a
// 2-layer pre-LN transformer. Every caption occupies a fixed window of
// kNMax rows; several captions are encoded in one call as consecutive
// segments so the whole batch flows through each layer exactly once
// (the layers keep a single activation cache for backward).

#include <string>
#include <vector>

#include "typodiff/nn.hpp"
#include "typodiff/vocab.hpp"

namespace td::textenc {

template <typename S>
struct EncoderLayer {
  nn::LayerNorm<S> ln1, ln2;
  nn::Mha<S> attn;
  nn::Linear<S> fc1, fc2;
  nn::SiLU<S> act;

  void init(const std::string& name, int dim, int heads, int hidden, Rng& rng) {
    ln1.init(name + ".ln1", "text", dim);
    ln2.init(name + ".ln2", "text", dim);
    attn.init(name + ".attn", "text", dim, dim, dim, heads, rng);
    fc1.init(name + ".fc1", "text", dim, hidden, rng);
    fc2.init(name + ".fc2", "text", hidden, dim, rng);
  }
  void collect(nn::ParamRefs<S>& out) {
    ln1.collect(out);
    ln2.collect(out);
    attn.collect(out);
    fc1.collect(out);
    fc2.collect(out);
  }
  nn::Mat<S> forward(const nn::Mat<S>& x, int seg_len, const std::vector<uint8_t>& valid) {
    nn::Mat<S> a = ln1.forward(x);
    nn::Mat<S> h = x + attn.forward(a, a, seg_len, &valid);
    return h + fc2.forward(act.forward(fc1.forward(ln2.forward(h))));
  }
  nn::Mat<S> backward(const nn::Mat<S>& dy) {
    nn::Mat<S> dh = dy + ln2.backward(fc1.backward(act.backward(fc2.backward(dy))));
    return dh + ln1.backward(attn.backward(dh));
  }
};

template <typename S>
struct TextEncoder {
  int n_max = kNMax;
  int dim = 128;
  nn::Embedding<S> tok;
  nn::Param<S> pos;  // n_max x dim, shared by every caption window
  EncoderLayer<S> layer0, layer1;
  nn::LayerNorm<S> ln_f;
  std::vector<uint8_t> valid_;  // per-row flags of the last forward

  void init(int vocab_size, Rng& rng, int d = 128, int heads = 4) {
    dim = d;
    tok.init("text.tok", "text", vocab_size, d, rng);
    pos.setup_normal("text.pos", "text", n_max, d, 0.01, rng);
    layer0.init("text.l0", d, heads, 2 * d, rng);
    layer1.init("text.l1", d, heads, 2 * d, rng);
    ln_f.init("text.ln_f", "text", d);
  }
  void collect(nn::ParamRefs<S>& out) {
    tok.collect(out);
    out.push_back(&pos);
    layer0.collect(out);
    layer1.collect(out);
    ln_f.collect(out);
  }

  // Encodes the captions back to back: row block i*n_max..(i+1)*n_max-1 is
  // caption i. Rows past a caption's token count come out exactly zero, and
  // `valid_` marks the live rows for downstream cross-attention masking.
  nn::Mat<S> forward(const std::vector<const TokenSequence*>& seqs) {
    if (seqs.empty()) throw ArgumentError("text encoder: no captions");
    std::vector<int32_t> ids;
    ids.reserve(seqs.size() * size_t(n_max));
    valid_.assign(seqs.size() * size_t(n_max), 0);
    for (size_t i = 0; i < seqs.size(); ++i) {
      const TokenSequence& s = *seqs[i];
      if (int(s.ids.size()) != n_max) throw ArgumentError("text encoder: sequence length mismatch");
      ids.insert(ids.end(), s.ids.begin(), s.ids.end());
      for (int p = 0; p < s.valid; ++p) valid_[i * size_t(n_max) + size_t(p)] = 1;
    }
    nn::Mat<S> x = tok.forward(ids);
    for (int r = 0; r < x.rows(); ++r) x.row(r) += pos.w.row(r % n_max);
    x = layer0.forward(x, n_max, valid_);
    x = layer1.forward(x, n_max, valid_);
    x = ln_f.forward(x);
    for (int r = 0; r < x.rows(); ++r)
      if (!valid_[size_t(r)]) x.row(r).setZero();
    return x;
  }
  nn::Mat<S> forward(const TokenSequence& seq) { return forward({&seq}); }

  void backward(const nn::Mat<S>& dy) {
    nn::Mat<S> d = dy;
    for (int r = 0; r < d.rows(); ++r)
      if (!valid_[size_t(r)]) d.row(r).setZero();
    d = ln_f.backward(d);
    d = layer1.backward(d);
    d = layer0.backward(d);
    for (int r = 0; r < d.rows(); ++r) pos.g.row(r % n_max) += d.row(r);
    tok.backward(d);
  }
};

}  // namespace td::textenc

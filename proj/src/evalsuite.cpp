#include "typodiff/evalsuite.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "typodiff/font.hpp"

namespace td::evalsuite {

namespace {

constexpr double kContrastFloorF = 0.1;  // absolute binarization floor in [0,1]

}  // namespace

std::vector<uint8_t> binarize_text(const float* frame, int H, int W) {
  std::vector<double> dist(size_t(H) * W);
  for (int y = 0; y < H; ++y) {
    const float* row = frame + size_t(y) * W * 3;
    // background estimate: channel-wise median of four edge pixels of this
    // row (two per side), so one text pixel touching an edge cannot skew it
    double bg[3];
    int xs[4] = {0, std::min(1, W - 1), std::max(W - 2, 0), W - 1};
    for (int c = 0; c < 3; ++c) {
      double v[4];
      for (int k = 0; k < 4; ++k) v[k] = double(row[xs[k] * 3 + c]);
      std::sort(v, v + 4);
      bg[c] = 0.5 * (v[1] + v[2]);
    }
    for (int x = 0; x < W; ++x) {
      double d = 0.0;
      for (int c = 0; c < 3; ++c) d = std::max(d, std::abs(double(row[x * 3 + c]) - bg[c]));
      dist[size_t(y) * W + x] = d;
    }
  }
  // Otsu over a 256-bin histogram of the distances
  std::array<int, 256> hist{};
  for (double d : dist) hist[size_t(std::min(255, int(d * 255.0)))]++;
  const int total = H * W;
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * double(hist[size_t(i)]);
  double sum_b = 0.0, w_b = 0.0, best_var = -1.0;
  int best_t = 0;
  for (int t = 0; t < 256; ++t) {
    w_b += hist[size_t(t)];
    if (w_b == 0) continue;
    double w_f = total - w_b;
    if (w_f == 0) break;
    sum_b += t * double(hist[size_t(t)]);
    double m_b = sum_b / w_b, m_f = (sum_all - sum_b) / w_f;
    double var = w_b * w_f * (m_b - m_f) * (m_b - m_f);
    if (var > best_var) {
      best_var = var;
      best_t = t;
    }
  }
  // Otsu can land between two text tones (fill vs outline) instead of
  // between background and text; readable text sits at least the generator's
  // contrast floor (64/255) away from background, so cap the threshold just
  // under that -- the margin absorbs float quantization of the frame. The
  // cap only ever lowers the threshold; adaptivity below it is preserved.
  double thresh = std::clamp((best_t + 1) / 255.0, kContrastFloorF, 63.5 / 255.0);
  std::vector<uint8_t> text(size_t(H) * W);
  for (size_t i = 0; i < dist.size(); ++i) text[i] = dist[i] >= thresh ? 1 : 0;
  return text;
}

namespace {

using typogen::kGlyphCols;
using typogen::kGlyphRows;
constexpr int kUnitBits = kGlyphCols * kGlyphRows;

using UnitGrid = std::array<double, kUnitBits>;
using GlyphSet = std::array<UnitGrid, typogen::kNumGlyphs>;

// The 52 plain letter shapes; unit cells are exactly the font bitmap.
const GlyphSet& fill_patterns() {
  static const GlyphSet set = [] {
    GlyphSet s{};
    for (int g = 0; g < typogen::kNumGlyphs; ++g) {
      const auto& bm = typogen::glyph_bitmap(g);
      for (int r = 0; r < kGlyphRows; ++r)
        for (int c = 0; c < kGlyphCols; ++c)
          s[size_t(g)][size_t(r * kGlyphCols + c)] = bm[r][c] ? 1.0 : 0.0;
    }
    return s;
  }();
  return set;
}

// What an outlined letter looks like to the recognizer at a given scale:
// rasterize fill + one-pixel stroke with the renderer's own predicates,
// then quantize each unit cell by strict pixel majority -- the same rule
// the recognizer applies to a frame, so pristine matches are exact.
const GlyphSet& outlined_patterns(int fs) {
  static std::map<int, GlyphSet> cache;
  auto it = cache.find(fs);
  if (it != cache.end()) return it->second;
  GlyphSet set{};
  for (int g = 0; g < typogen::kNumGlyphs; ++g) {
    const auto& bm = typogen::glyph_bitmap(g);
    for (int r = 0; r < kGlyphRows; ++r)
      for (int c = 0; c < kGlyphCols; ++c) {
        int on = 0, tot = fs * fs;
        for (int ly = r * fs; ly < (r + 1) * fs; ++ly)
          for (int lx = c * fs; lx < (c + 1) * fs; ++lx)
            if (typogen::glyph_covers(bm, fs, lx, ly) || typogen::glyph_stroke(bm, fs, lx, ly))
              ++on;
        set[size_t(g)][size_t(r * kGlyphCols + c)] = 2 * on > tot ? 1.0 : 0.0;
      }
  }
  return cache.emplace(fs, set).first->second;
}

double ncc(const std::array<double, kUnitBits>& a, const std::array<double, kUnitBits>& b) {
  double ma = 0, mb = 0;
  for (int i = 0; i < kUnitBits; ++i) {
    ma += a[size_t(i)];
    mb += b[size_t(i)];
  }
  ma /= kUnitBits;
  mb /= kUnitBits;
  double num = 0, da = 0, db = 0;
  for (int i = 0; i < kUnitBits; ++i) {
    double xa = a[size_t(i)] - ma, xb = b[size_t(i)] - mb;
    num += xa * xb;
    da += xa * xa;
    db += xb * xb;
  }
  if (da == 0.0 && db == 0.0) return ma == mb ? 1.0 : 0.0;
  if (da == 0.0 || db == 0.0) return 0.0;
  return num / std::sqrt(da * db);
}

// Longest common subsequence alignment of recognized vs reference.
std::vector<std::pair<int, int>> lcs_pairs(const std::string& a, const std::string& b) {
  int n = int(a.size()), m = int(b.size());
  std::vector<std::vector<int>> dp(size_t(n + 1), std::vector<int>(size_t(m + 1), 0));
  for (int i = n - 1; i >= 0; --i)
    for (int j = m - 1; j >= 0; --j)
      dp[size_t(i)][size_t(j)] =
          a[size_t(i)] == b[size_t(j)]
              ? dp[size_t(i + 1)][size_t(j + 1)] + 1
              : std::max(dp[size_t(i + 1)][size_t(j)], dp[size_t(i)][size_t(j + 1)]);
  std::vector<std::pair<int, int>> pairs;
  int i = 0, j = 0;
  while (i < n && j < m) {
    if (a[size_t(i)] == b[size_t(j)]) {
      pairs.emplace_back(i, j);
      ++i;
      ++j;
    } else if (dp[size_t(i + 1)][size_t(j)] >= dp[size_t(i)][size_t(j + 1)]) {
      ++i;
    } else {
      ++j;
    }
  }
  return pairs;
}

}  // namespace

OcrResult score_match(const std::string& recognized, const std::string& reference) {
  OcrResult res;
  res.recognized = recognized;
  res.matches = lcs_pairs(recognized, reference);
  double common = double(res.matches.size());
  res.precision = recognized.empty() ? 0.0 : common / double(recognized.size());
  res.recall = reference.empty() ? 0.0 : common / double(reference.size());
  res.f1 = (res.precision + res.recall) > 0.0
               ? 2.0 * res.precision * res.recall / (res.precision + res.recall)
               : 0.0;
  return res;
}

OcrResult ocr_read(const float* frame, int H, int W, int font_scale,
                   const std::string& reference) {
  OcrResult res;
  if (reference.empty() || font_scale < 1) return res;
  const int n = int(reference.size());
  const int fs = font_scale;
  const int width = (6 * n - 1) * fs;
  if (width > W || 7 * fs > H) return res;

  auto text = binarize_text(frame, H, W);
  const auto& fill = fill_patterns();
  const auto& outlined = outlined_patterns(fs);
  const int x0 = (W - width) / 2;

  // Outlined text carries two ink tones, and a one-pixel stroke can fuse
  // with the fill into shapes that collide between letters; the tone
  // boundary is then the only reliable signal. Split ink pixels into two
  // color groups seeded by the farthest pair -- exact for two-tone frames,
  // a plain partition otherwise -- and let matching try each group alone
  // (one of them is the bare fill) before falling back to the union.
  auto px_rgb = [&](size_t idx, double* c3) {
    for (int c = 0; c < 3; ++c) c3[c] = double(frame[idx * 3 + size_t(c)]);
  };
  auto dist2 = [](const double* a, const double* b) {
    double d = 0;
    for (int c = 0; c < 3; ++c) d += (a[c] - b[c]) * (a[c] - b[c]);
    return d;
  };
  std::vector<uint8_t> group(text.size(), 0);  // 1 or 2 when split succeeds
  {
    size_t first = text.size();
    for (size_t i = 0; i < text.size(); ++i)
      if (text[i]) {
        first = i;
        break;
      }
    if (first < text.size()) {
      double seed_a[3], seed_b[3], cur[3];
      px_rgb(first, seed_a);
      double best_d = 0.0;
      size_t far_i = first;
      for (size_t i = first; i < text.size(); ++i)
        if (text[i]) {
          px_rgb(i, cur);
          double d = dist2(seed_a, cur);
          if (d > best_d) {
            best_d = d;
            far_i = i;
          }
        }
      if (best_d > 0.0) {
        px_rgb(far_i, seed_b);
        for (size_t i = first; i < text.size(); ++i)
          if (text[i]) {
            px_rgb(i, cur);
            group[i] = dist2(cur, seed_a) <= dist2(cur, seed_b) ? 1 : 2;
          }
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    const int cx = x0 + 6 * fs * i;
    // vertical centroid of text pixels under this cell's columns
    long count = 0;
    double ysum = 0.0;
    for (int y = 0; y < H; ++y)
      for (int x = cx; x < cx + 5 * fs; ++x)
        if (x >= 0 && x < W && text[size_t(y) * W + x]) {
          ++count;
          ysum += y;
        }
    if (count == 0) continue;
    int y_base = int(std::lround(ysum / double(count) - 3.5 * fs));

    // A shifted slice of one letter's ink can tie another template at full
    // correlation, so equal scores break toward the least-shifted alignment
    // and then toward the stronger family: a single-tone grid matching a
    // bare letter shape outranks the ink union matching an outlined one.
    double best_score = -2.0;
    int best_glyph = -1, best_abs_dy = 0, best_family = 0;
    auto better = [&](double s, int abs_dy, int family) {
      if (s != best_score) return s > best_score;
      if (abs_dy != best_abs_dy) return abs_dy < best_abs_dy;
      return family < best_family;
    };
    for (int dy = -3 * fs; dy <= 3 * fs; ++dy) {
      int cy = y_base + dy;
      if (cy < -(7 * fs - 1) || cy > H - 1) continue;
      // per-cell majority grids: each color group alone, plus all ink
      std::array<UnitGrid, 3> grids{};
      std::array<bool, 3> any{};
      for (int r = 0; r < kGlyphRows; ++r)
        for (int c = 0; c < kGlyphCols; ++c) {
          int on[3] = {0, 0, 0}, tot = 0;
          for (int py = cy + r * fs; py < cy + (r + 1) * fs; ++py)
            for (int px = cx + c * fs; px < cx + (c + 1) * fs; ++px) {
              ++tot;
              if (px < 0 || px >= W || py < 0 || py >= H) continue;
              size_t idx = size_t(py) * W + size_t(px);
              if (!text[idx]) continue;
              ++on[2];
              if (group[idx] == 1) ++on[0];
              if (group[idx] == 2) ++on[1];
            }
          for (int m = 0; m < 3; ++m)
            if (2 * on[m] > tot) {
              grids[size_t(m)][size_t(r * kGlyphCols + c)] = 1.0;
              any[size_t(m)] = true;
            }
        }
      auto score_set = [&](const UnitGrid& grid, const GlyphSet& set, int family) {
        for (int g = 0; g < typogen::kNumGlyphs; ++g) {
          double s = ncc(grid, set[size_t(g)]);
          if (better(s, std::abs(dy), family)) {
            best_score = s;
            best_glyph = g;
            best_abs_dy = std::abs(dy);
            best_family = family;
          }
        }
      };
      if (any[0]) score_set(grids[0], fill, 0);
      if (any[1]) score_set(grids[1], fill, 1);
      if (any[2]) {
        score_set(grids[2], fill, 2);
        score_set(grids[2], outlined, 3);
      }
    }
    if (best_glyph >= 0) res.recognized += typogen::glyph_char(best_glyph);
  }

  return score_match(res.recognized, reference);
}

int calibrate_font_scale(const float* frame, int H, int W, const std::string& reference) {
  int n = std::max(1, int(reference.size()));
  int fs_max = std::min(W / (6 * n - 1), H / 7);
  int best_fs = 1;
  double best = -1.0;
  for (int fs = 1; fs <= std::max(1, fs_max); ++fs) {
    double f1 = ocr_read(frame, H, W, fs, reference).f1;
    if (f1 > best) {
      best = f1;
      best_fs = fs;
    }
  }
  return best_fs;
}

double glyph_iou(const float* frame, int H, int W, const std::vector<uint8_t>& gt_mask) {
  if (int(gt_mask.size()) != H * W) throw ArgumentError("glyph_iou: mask size mismatch");
  auto text = binarize_text(frame, H, W);
  long inter = 0, uni = 0;
  for (size_t i = 0; i < text.size(); ++i) {
    bool a = text[i] != 0, b = gt_mask[i] != 0;
    if (a && b) ++inter;
    if (a || b) ++uni;
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

// ---- Fréchet distance over fixed random conv features ----

namespace {

struct ConvSpec {
  int cin, cout, st, sh, sw;  // strides over (t, h, w)
};

// one 3x3x3 zero-padded strided conv + tanh
std::vector<double> conv3d(const std::vector<double>& in, int T, int H, int W, int cin,
                           const std::vector<double>& kernel, const std::vector<double>& bias,
                           int cout, int st, int sh, int sw, int& oT, int& oH, int& oW) {
  oT = (T + st - 1) / st;
  oH = (H + sh - 1) / sh;
  oW = (W + sw - 1) / sw;
  std::vector<double> out(size_t(oT) * oH * oW * cout, 0.0);
  for (int ot = 0; ot < oT; ++ot)
    for (int oy = 0; oy < oH; ++oy)
      for (int ox = 0; ox < oW; ++ox)
        for (int co = 0; co < cout; ++co) {
          double acc = bias[size_t(co)];
          for (int kt = -1; kt <= 1; ++kt)
            for (int ky = -1; ky <= 1; ++ky)
              for (int kx = -1; kx <= 1; ++kx) {
                int it = ot * st + kt, iy = oy * sh + ky, ix = ox * sw + kx;
                if (it < 0 || it >= T || iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                const double* src = &in[((size_t(it) * H + iy) * W + ix) * size_t(cin)];
                const double* k =
                    &kernel[(((size_t(co) * 3 + (kt + 1)) * 3 + (ky + 1)) * 3 + (kx + 1)) *
                            size_t(cin)];
                for (int ci = 0; ci < cin; ++ci) acc += src[ci] * k[ci];
              }
          out[((size_t(ot) * oH + oy) * oW + ox) * size_t(cout) + size_t(co)] =
              std::tanh(acc);
        }
  return out;
}

}  // namespace

std::vector<double> video_features(const float* video, int T, int H, int W,
                                   uint64_t extractor_seed) {
  const ConvSpec specs[3] = {{3, 32, 1, 2, 2}, {32, 64, 2, 2, 2}, {64, kFeatureDim, 2, 2, 2}};
  std::vector<double> cur(size_t(T) * H * W * 3);
  for (size_t i = 0; i < cur.size(); ++i) cur[i] = double(video[i]) * 2.0 - 1.0;
  int ct = T, ch = H, cw = W;
  for (int layer = 0; layer < 3; ++layer) {
    const auto& sp = specs[layer];
    Rng rng(seed_mix(extractor_seed, "extractor", uint64_t(layer)));
    double std = 1.0 / std::sqrt(27.0 * sp.cin);
    std::vector<double> kernel(size_t(sp.cout) * 27 * sp.cin);
    for (auto& v : kernel) v = rng.normal() * std;
    std::vector<double> bias(size_t(sp.cout));
    for (auto& v : bias) v = rng.normal() * 0.1;
    int ot, oh, ow;
    cur = conv3d(cur, ct, ch, cw, sp.cin, kernel, bias, sp.cout, sp.st, sp.sh, sp.sw, ot, oh, ow);
    ct = ot;
    ch = oh;
    cw = ow;
  }
  std::vector<double> feat(size_t(kFeatureDim), 0.0);
  long cells = long(ct) * ch * cw;
  for (long cell = 0; cell < cells; ++cell)
    for (int c = 0; c < kFeatureDim; ++c)
      feat[size_t(c)] += cur[size_t(cell) * kFeatureDim + size_t(c)];
  for (auto& v : feat) v /= double(cells);
  return feat;
}

FrechetStats frechet_stats(const std::vector<const float*>& videos, int T, int H, int W,
                           uint64_t extractor_seed) {
  if (videos.size() < 2)
    throw ArgumentError("frechet_stats: need at least 2 videos, got " +
                        std::to_string(videos.size()));
  const int d = kFeatureDim;
  const int n = int(videos.size());
  std::vector<std::vector<double>> feats;
  feats.reserve(videos.size());
  for (const float* v : videos) feats.push_back(video_features(v, T, H, W, extractor_seed));
  FrechetStats st;
  st.dim = d;
  st.mu.assign(size_t(d), 0.0);
  for (const auto& f : feats)
    for (int i = 0; i < d; ++i) st.mu[size_t(i)] += f[size_t(i)];
  for (auto& v : st.mu) v /= n;
  st.sigma.assign(size_t(d) * d, 0.0);
  for (const auto& f : feats)
    for (int i = 0; i < d; ++i) {
      double di = f[size_t(i)] - st.mu[size_t(i)];
      for (int j = 0; j < d; ++j)
        st.sigma[size_t(i) * d + size_t(j)] += di * (f[size_t(j)] - st.mu[size_t(j)]);
    }
  for (auto& v : st.sigma) v /= double(n - 1);
  return st;
}

double frechet_from_stats(const FrechetStats& a, const FrechetStats& b) {
  if (a.dim != b.dim) throw ArgumentError("frechet: dimension mismatch");
  const int d = a.dim;
  using Md = Eigen::MatrixXd;
  Eigen::Map<const Md> Sa(a.sigma.data(), d, d), Sb(b.sigma.data(), d, d);
  double mean_term = 0.0;
  for (int i = 0; i < d; ++i) {
    double dm = a.mu[size_t(i)] - b.mu[size_t(i)];
    mean_term += dm * dm;
  }
  // sqrt(X) via eigen-decomposition, then tr sqrt(sqrt(X) Y sqrt(X)):
  // same trace as tr sqrt(X Y) but through symmetric matrices only.
  auto tr_sqrt = [](const Md& X, const Md& Y) {
    Eigen::SelfAdjointEigenSolver<Md> es_x(X);
    Md root_x = es_x.eigenvectors() *
                es_x.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                es_x.eigenvectors().transpose();
    Md inner = root_x * Y * root_x;
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Md> es_i(inner);
    return es_i.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  };
  // evaluate in both orders and average so the distance is exactly symmetric
  double cross = 0.5 * (tr_sqrt(Sa, Sb) + tr_sqrt(Sb, Sa));
  double val = mean_term + Sa.trace() + Sb.trace() - 2.0 * cross;
  return std::max(0.0, val);
}

double frechet_distance(const std::vector<const float*>& a, const std::vector<const float*>& b,
                        int T, int H, int W, uint64_t extractor_seed) {
  return frechet_from_stats(frechet_stats(a, T, H, W, extractor_seed),
                            frechet_stats(b, T, H, W, extractor_seed));
}

}  // namespace td::evalsuite

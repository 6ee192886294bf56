#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "typodiff/evalsuite.hpp"
#include "typodiff/typogen.hpp"

using namespace td;
using namespace td::evalsuite;
using td::typogen::RenderSample;
using td::typogen::TemplateSpec;

namespace {

TemplateSpec fill_template(int fs = 2) {
  TemplateSpec t;
  t.entrance = typogen::Entrance::fade;
  t.text_color = {255, 255, 255};
  t.background = {false, {0, 0, 0}, {0, 0, 0}};
  t.font_scale = fs;
  t.effect_duration = 4;
  return t;
}

}  // namespace

TEST_CASE("positional scoring matches the reference example") {
  auto r = score_match("Appl", "Apple");
  CHECK(r.precision == doctest::Approx(1.0));
  CHECK(r.recall == doctest::Approx(0.8));
  CHECK(r.f1 == doctest::Approx(2.0 * 0.8 / 1.8));
  REQUIRE(r.matches.size() == 4);
  CHECK(r.matches[0] == std::make_pair(0, 0));
  CHECK(r.matches[3] == std::make_pair(3, 3));

  CHECK(score_match("Apple", "Apple").f1 == doctest::Approx(1.0));
  CHECK(score_match("", "Apple").f1 == 0.0);
  CHECK(score_match("Zzz", "Apple").f1 == 0.0);
  // alignment is order-preserving: reversed text shares only "pp"
  auto rev = score_match("elppA", "Apple");
  CHECK(rev.matches.size() == 2);
  CHECK(rev.f1 == doctest::Approx(0.4));
  // extra characters cost precision, not recall
  auto extra = score_match("AXpple", "Apple");
  CHECK(extra.recall == doctest::Approx(1.0));
  CHECK(extra.precision == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("every glyph is recognized in fill and outlined form") {
  for (int g = 0; g < typogen::kNumGlyphs; ++g) {
    std::string word(1, typogen::glyph_char(g));
    auto plain = fill_template();
    auto s = typogen::render(plain, word, 7, 8, 24, 24);
    auto r = ocr_read(s.frame(s.T - 1), s.H, s.W, plain.font_scale, word);
    CHECK_MESSAGE(r.recognized == word, "fill glyph ", word, " read as ", r.recognized);

    auto outlined = fill_template();
    outlined.text_color = {220, 40, 40};
    outlined.outline = typogen::RGB{255, 255, 255};
    auto s2 = typogen::render(outlined, word, 7, 8, 24, 24);
    auto r2 = ocr_read(s2.frame(s2.T - 1), s2.H, s2.W, outlined.font_scale, word);
    CHECK_MESSAGE(r2.recognized == word, "outlined glyph ", word, " read as ", r2.recognized);
  }
}

TEST_CASE("pristine renders read back with perfect F1") {
  int checked = 0;
  for (uint64_t seed = 0; seed < 6; ++seed) {
    auto tpl = typogen::sample_template(seed, int(seed), 8, 64, 64, 5);
    for (const auto& word : typogen::eval_words()) {
      auto s = typogen::render(tpl, word, seed * 100 + 1, 8, 64, 64);
      auto r = ocr_read(s.frame(s.T - 1), s.H, s.W, tpl.font_scale, word);
      CHECK_MESSAGE(r.f1 == 1.0, "template ", seed, " word ", word, " read as ", r.recognized);
      ++checked;
    }
  }
  CHECK(checked == 6 * 26);
}

TEST_CASE("ocr on a half-erased word reproduces the partial-credit example") {
  auto tpl = fill_template();
  auto s = typogen::render(tpl, "Apple", 3, 8, 24, 64);
  // blank out the last letter's cell
  const int fs = tpl.font_scale;
  const int x0 = (s.W - (6 * 5 - 1) * fs) / 2;
  float* last = s.frame(s.T - 1);
  for (int y = 0; y < s.H; ++y)
    for (int x = x0 + 6 * fs * 4; x < s.W; ++x)
      for (int c = 0; c < 3; ++c) last[(size_t(y) * s.W + x) * 3 + c] = 0.0f;
  auto r = ocr_read(last, s.H, s.W, fs, "Apple");
  CHECK(r.recognized == "Appl");
  CHECK(r.precision == doctest::Approx(1.0));
  CHECK(r.recall == doctest::Approx(0.8));
  CHECK(r.f1 == doctest::Approx(0.888888889));
}

TEST_CASE("ocr returns an empty result when it cannot see text") {
  std::vector<float> blank(size_t(8) * 32 * 32 * 3, 0.3f);
  auto r = ocr_read(blank.data(), 32, 32, 2, "Dog");
  CHECK(r.recognized.empty());
  CHECK(r.f1 == 0.0);
  CHECK(ocr_read(blank.data(), 32, 32, 0, "Dog").f1 == 0.0);
  CHECK(ocr_read(blank.data(), 32, 32, 2, "").f1 == 0.0);
  CHECK(ocr_read(blank.data(), 32, 32, 9, "Dog").f1 == 0.0);  // does not fit
}

TEST_CASE("font scale calibration recovers the rendering scale") {
  for (int fs = 1; fs <= 3; ++fs) {
    auto tpl = fill_template(fs);
    auto s = typogen::render(tpl, "Cat", 5, 8, 32, 56);
    CHECK(calibrate_font_scale(s.frame(s.T - 1), s.H, s.W, "Cat") == fs);
  }
}

TEST_CASE("binarized text equals the glyph mask on pristine renders") {
  // word length capped at 3: keeps the glyph box away from the two sampled
  // edge pixels per side, so the background estimate stays exact even for
  // the widest font scale the sampler can pick
  for (uint64_t seed = 20; seed < 28; ++seed) {
    auto tpl = typogen::sample_template(seed, int(seed), 8, 48, 48, 3);
    auto word = typogen::sample_word(seed, 2, 3);
    auto s = typogen::render(tpl, word, seed, 8, 48, 48);
    auto text = binarize_text(s.frame(s.T - 1), s.H, s.W);
    CHECK(text == s.glyph_mask);
    CHECK(glyph_iou(s.frame(s.T - 1), s.H, s.W, s.glyph_mask) == 1.0);
  }
}

TEST_CASE("glyph_iou on synthetic rectangles") {
  const int H = 16, W = 16;
  std::vector<float> frame(size_t(H) * W * 3, 0.0f);
  auto set_white = [&](int x, int y) {
    for (int c = 0; c < 3; ++c) frame[(size_t(y) * W + x) * 3 + c] = 1.0f;
  };
  std::vector<uint8_t> rect(size_t(H) * W, 0);
  for (int y = 4; y < 12; ++y)
    for (int x = 4; x < 12; ++x) {
      set_white(x, y);
      rect[size_t(y) * W + x] = 1;
    }
  CHECK(glyph_iou(frame.data(), H, W, rect) == doctest::Approx(1.0));

  std::vector<uint8_t> shifted(size_t(H) * W, 0);
  for (int y = 4; y < 12; ++y)
    for (int x = 8; x < 16; ++x) shifted[size_t(y) * W + x] = 1;
  CHECK(glyph_iou(frame.data(), H, W, shifted) == doctest::Approx(32.0 / 96.0));

  std::vector<uint8_t> empty_mask(size_t(H) * W, 0);
  CHECK(glyph_iou(frame.data(), H, W, empty_mask) == doctest::Approx(0.0));

  std::vector<float> blank(size_t(H) * W * 3, 0.25f);
  CHECK(glyph_iou(blank.data(), H, W, empty_mask) == 1.0);  // empty union
  CHECK(glyph_iou(blank.data(), H, W, rect) == doctest::Approx(0.0));

  CHECK_THROWS_AS(glyph_iou(frame.data(), H, 15, rect), ArgumentError);
}

TEST_CASE("video features are deterministic and seed-dependent") {
  auto tpl = fill_template(1);
  auto s = typogen::render(tpl, "Ox", 9, 8, 16, 16);
  auto f1 = video_features(s.frames.data(), s.T, s.H, s.W);
  auto f2 = video_features(s.frames.data(), s.T, s.H, s.W);
  CHECK(f1 == f2);
  REQUIRE(int(f1.size()) == kFeatureDim);
  auto f3 = video_features(s.frames.data(), s.T, s.H, s.W, kExtractorSeed + 1);
  CHECK(f1 != f3);
  bool finite = true;
  for (double v : f1) finite = finite && std::isfinite(v);
  CHECK(finite);
}

TEST_CASE("set distance is zero on itself, symmetric, and discriminative") {
  std::vector<RenderSample> xs, ys;
  for (uint64_t i = 0; i < 4; ++i) {
    auto tpl = typogen::sample_template(i, int(i), 8, 16, 16, 2);
    xs.push_back(typogen::render(tpl, typogen::sample_word(i, 1, 2), i, 8, 16, 16));
    auto tpl2 = typogen::sample_template(i + 40, int(i), 8, 16, 16, 2);
    ys.push_back(typogen::render(tpl2, typogen::sample_word(i + 40, 1, 2), i, 8, 16, 16));
  }
  auto ptrs = [](const std::vector<RenderSample>& v) {
    std::vector<const float*> p;
    for (const auto& s : v) p.push_back(s.frames.data());
    return p;
  };
  auto px = ptrs(xs), py = ptrs(ys);

  double self = frechet_distance(px, px, 8, 16, 16);
  CHECK(self >= 0.0);
  CHECK(self <= 1e-6);

  double ab = frechet_distance(px, py, 8, 16, 16);
  double ba = frechet_distance(py, px, 8, 16, 16);
  CHECK(std::abs(ab - ba) <= 1e-8);
  CHECK(ab > 1e-6);

  std::vector<const float*> one = {px[0]};
  CHECK_THROWS_AS(frechet_stats(one, 8, 16, 16), ArgumentError);
}

TEST_CASE("degenerate sets reduce to the mean distance") {
  // two videos per set, identical within a set: covariances vanish and the
  // distance must equal the squared feature-mean difference exactly
  auto tpl = fill_template(1);
  auto a = typogen::render(tpl, "Ox", 1, 8, 16, 16);
  auto b = typogen::render(tpl, "If", 2, 8, 16, 16);
  std::vector<const float*> setA = {a.frames.data(), a.frames.data()};
  std::vector<const float*> setB = {b.frames.data(), b.frames.data()};
  double d = frechet_distance(setA, setB, 8, 16, 16);
  auto fa = video_features(a.frames.data(), 8, 16, 16);
  auto fb = video_features(b.frames.data(), 8, 16, 16);
  double expect = 0.0;
  for (int i = 0; i < kFeatureDim; ++i)
    expect += (fa[size_t(i)] - fb[size_t(i)]) * (fa[size_t(i)] - fb[size_t(i)]);
  CHECK(d == doctest::Approx(expect).epsilon(1e-9));
}

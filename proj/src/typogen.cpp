#include "typodiff/typogen.hpp"

#include <algorithm>
#include <cmath>

#include "typodiff/vocab.hpp"

namespace td::typogen {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool valid_word(const std::string& w) {
  if (w.empty() || w.size() > kMaxWordLen) return false;
  for (char c : w)
    if (!((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'))) return false;
  return true;
}

struct FRGB {
  float r, g, b;
};
FRGB to_f(RGB c) { return {c.r / 255.0f, c.g / 255.0f, c.b / 255.0f}; }

FRGB mix(FRGB a, FRGB b, float t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

// Emphasis period; neutral state every P frames counting back from the end.
int emphasis_period(int T) { return std::max(4, T / 2); }

}  // namespace

const std::vector<PaletteEntry>& palette() {
  static const std::vector<PaletteEntry> pal = {
      {"white", {255, 255, 255}}, {"black", {0, 0, 0}},       {"red", {220, 40, 40}},
      {"green", {40, 180, 70}},   {"blue", {40, 80, 220}},    {"yellow", {245, 220, 50}},
      {"orange", {245, 150, 40}}, {"purple", {130, 60, 190}}, {"pink", {245, 150, 190}},
      {"cyan", {60, 200, 210}},   {"brown", {140, 90, 50}},   {"gray", {128, 128, 128}},
      {"navy", {25, 35, 95}},     {"teal", {25, 115, 115}},
  };
  return pal;
}

std::string color_name(RGB c) {
  const auto& pal = palette();
  long best = -1;
  size_t best_i = 0;
  for (size_t i = 0; i < pal.size(); ++i) {
    long dr = long(pal[i].color.r) - c.r;
    long dg = long(pal[i].color.g) - c.g;
    long db = long(pal[i].color.b) - c.b;
    long d = dr * dr + dg * dg + db * db;
    if (best < 0 || d < best) {
      best = d;
      best_i = i;
    }
  }
  return pal[best_i].name;
}

int segment_contrast(RGB color, const Background& bg) {
  if (!bg.gradient) return max_channel_dist(color, bg.top);
  int worst = 255;
  for (int k = 0; k <= 256; ++k) {
    double y = k / 256.0;
    int d = 0;
    double top[3] = {double(bg.top.r), double(bg.top.g), double(bg.top.b)};
    double bot[3] = {double(bg.bottom.r), double(bg.bottom.g), double(bg.bottom.b)};
    double col[3] = {double(color.r), double(color.g), double(color.b)};
    for (int c = 0; c < 3; ++c)
      d = std::max(d, int(std::floor(std::abs(col[c] - (top[c] + y * (bot[c] - top[c]))))));
    worst = std::min(worst, d);
  }
  return worst;
}

void TemplateSpec::validate(int T, int max_word_len) const {
  if (T < 1) throw ArgumentError("template: T must be positive");
  if (max_word_len < 1 || max_word_len > kMaxWordLen)
    throw ArgumentError("template: max_word_len out of range");
  if (font_scale < 1) throw ArgumentError("template: font_scale must be >= 1");
  if (per_letter_delay < 0) throw ArgumentError("template: per_letter_delay must be >= 0");
  if (effect_duration < 1) throw ArgumentError("template: effect_duration must be >= 1");
  if (effect_duration + per_letter_delay * max_word_len > T)
    throw ArgumentError("template: effect timing exceeds clip length");
  // Entrance progress ramps over effect_duration frames after a letter's
  // start, so the last letter needs start + duration <= T-1 to be fully
  // shown in the final frame. Slightly tighter than the bound above when
  // per_letter_delay is zero.
  if (per_letter_delay * (max_word_len - 1) + effect_duration > T - 1)
    throw ArgumentError("template: last letter would still be entering at the final frame");
  if (segment_contrast(text_color, background) < kContrastFloor)
    throw ArgumentError("template: text/background contrast below readability floor");
  if (outline && segment_contrast(*outline, background) < kContrastFloor)
    throw ArgumentError("template: outline/background contrast below readability floor");
}

std::vector<std::string> caption_grammar_words() {
  std::vector<std::string> words = {
      "letters", "outlined", "in",    "on",     "a",      "background", "gradient", "to",
      "arranged", "horizontal", "diagonal", "line",  "all",    "fade",       "at",       "once",
      "one",      "by",         "random",   "order", "slide",  "from",       "the",      "right",
      "left",     "bottom",     "top",      "pop",   "spin",   "type",       "then",     "blink",
      "pulse",    "between",    "two",      "colors", "shake", "wave",       "up",       "and",
      "down",     "while",      "holds",    "still", "scrolls", "across",    "The",      "word",
  };
  for (const auto& e : palette()) words.push_back(e.name);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  return words;
}

std::string sample_word(uint64_t rng_seed, int min_len, int max_len) {
  if (min_len < 1 || min_len > max_len || max_len > kMaxWordLen)
    throw ArgumentError("sample_word: invalid length bounds");
  Rng rng(seed_mix(rng_seed, "word"));
  int len = int(rng.uniform_int(min_len, max_len));
  std::string w;
  for (int i = 0; i < len; ++i) w += glyph_char(int(rng.uniform_int(0, kNumGlyphs - 1)));
  return w;
}

namespace {

std::string background_phrase(const Background& bg) {
  if (bg.gradient)
    return color_name(bg.top) + " to " + color_name(bg.bottom) + " gradient background";
  return color_name(bg.top) + " background";
}

std::string entrance_verb(Entrance e) {
  switch (e) {
    case Entrance::fade: return "fade in";
    case Entrance::slide_left: return "slide in from the right";
    case Entrance::slide_right: return "slide in from the left";
    case Entrance::slide_up: return "slide in from the bottom";
    case Entrance::slide_down: return "slide in from the top";
    case Entrance::pop_scale: return "pop in";
    case Entrance::rotate_in: return "spin in";
    case Entrance::typewriter: return "type in";
  }
  throw ArgumentError("unknown entrance");
}

}  // namespace

CaptionSet make_captions(const TemplateSpec& tpl, const std::string& word) {
  if (!valid_word(word)) throw ArgumentError("make_captions: invalid word: " + word);
  CaptionSet cs;
  cs.word = word;
  cs.word_encoded = textenc::encode_word_content(word);
  cs.word_caption = textenc::make_word_caption(word);

  std::string s = color_name(tpl.text_color) + " letters";
  if (tpl.outline) s += " outlined in " + color_name(*tpl.outline);
  s += " on a " + background_phrase(tpl.background);
  s += " arranged in a ";
  s += (tpl.movement == Movement::diagonal_line) ? "diagonal" : "horizontal";
  s += " line";
  cs.static_caption = s;

  std::string verb = entrance_verb(tpl.entrance);
  std::string d;
  switch (tpl.sequence) {
    case Sequence::all_at_once: d = "all letters " + verb + " at once"; break;
    case Sequence::sequential: d = "letters " + verb + " one by one"; break;
    case Sequence::random_order: d = "letters " + verb + " in random order"; break;
  }
  switch (tpl.emphasis) {
    case Emphasis::none: break;
    case Emphasis::blink: d += " then blink"; break;
    case Emphasis::color_pulse: d += " then pulse between two colors"; break;
    case Emphasis::shake: d += " then shake"; break;
    case Emphasis::wave: d += " then wave up and down"; break;
  }
  d += (tpl.movement == Movement::scroll) ? " while the line scrolls across"
                                          : " while the line holds still";
  cs.dynamic_caption = d;
  return cs;
}

namespace {

struct Canvas {
  int H, W;
  float* px;              // H*W*3
  std::vector<uint8_t>* mask = nullptr;  // set while rendering the last frame

  void blend(int x, int y, FRGB c, float alpha) {
    if (x < 0 || x >= W || y < 0 || y >= H || alpha <= 0.0f) return;
    float* p = px + (size_t(y) * W + x) * 3;
    if (alpha >= 1.0f) {  // exact paint, no 1-ulp blend residue
      p[0] = c.r;
      p[1] = c.g;
      p[2] = c.b;
    } else {
      p[0] += (c.r - p[0]) * alpha;
      p[1] += (c.g - p[1]) * alpha;
      p[2] += (c.b - p[2]) * alpha;
    }
    if (mask) (*mask)[size_t(y) * W + x] = 1;
  }
};

// Paint one glyph cell. scale in (0,1], angle in radians; the fast path
// (scale 1, angle 0) is exact block rasterization and is what the final
// frame always uses, so the glyph mask is exact by construction.
void draw_glyph(Canvas& cv, const GlyphBitmap& bm, int cell_x, int cell_y, int fs,
                FRGB fill, const std::optional<FRGB>& outline, float alpha,
                double scale, double angle) {
  if (alpha <= 0.0f || scale <= 0.0) return;
  const bool identity = scale >= 1.0 && angle == 0.0;
  if (identity) {
    for (int ly = -1; ly <= kGlyphRows * fs; ++ly)
      for (int lx = -1; lx <= kGlyphCols * fs; ++lx) {
        if (glyph_covers(bm, fs, lx, ly))
          cv.blend(cell_x + lx, cell_y + ly, fill, alpha);
        else if (outline && glyph_stroke(bm, fs, lx, ly))
          cv.blend(cell_x + lx, cell_y + ly, *outline, alpha);
      }
    return;
  }
  double cx = cell_x + 0.5 * kGlyphCols * fs;
  double cy = cell_y + 0.5 * kGlyphRows * fs;
  int R = int(std::ceil(0.5 * std::hypot(kGlyphCols * fs + 2.0, kGlyphRows * fs + 2.0))) + 1;
  double ca = std::cos(angle), sa = std::sin(angle);
  for (int py = int(std::floor(cy)) - R; py <= int(std::ceil(cy)) + R; ++py)
    for (int px = int(std::floor(cx)) - R; px <= int(std::ceil(cx)) + R; ++px) {
      double dx = px + 0.5 - cx, dy = py + 0.5 - cy;
      double u = (ca * dx + sa * dy) / scale;
      double v = (-sa * dx + ca * dy) / scale;
      int lx = int(std::floor(u + 0.5 * kGlyphCols * fs));
      int ly = int(std::floor(v + 0.5 * kGlyphRows * fs));
      if (glyph_covers(bm, fs, lx, ly))
        cv.blend(px, py, fill, alpha);
      else if (outline && glyph_stroke(bm, fs, lx, ly))
        cv.blend(px, py, *outline, alpha);
    }
}

}  // namespace

RenderSample render(const TemplateSpec& tpl, const std::string& word, uint64_t seed,
                    int T, int H, int W) {
  if (T < 8 || H < 8 || W < 8) throw ArgumentError("render: T, H, W must all be >= 8");
  if (!valid_word(word)) throw ArgumentError("render: invalid word: " + word);
  const int n = int(word.size());
  tpl.validate(T, n);
  const int fs = tpl.font_scale;
  const int width = (6 * n - 1) * fs;  // n cells of 5 units + (n-1) unit gaps
  if (width > W || 7 * fs > H)
    throw LayoutError("render: word does not fit canvas at this font_scale");

  RenderSample out;
  out.T = T;
  out.H = H;
  out.W = W;
  out.word = word;
  out.template_id = tpl.id;
  out.seed = seed;
  out.captions = make_captions(tpl, word);
  out.frames.assign(size_t(T) * H * W * 3, 0.0f);
  out.glyph_mask.assign(size_t(H) * W, 0);

  // Letter start frames from the sequencing mode.
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  switch (tpl.sequence) {
    case Sequence::all_at_once:
      for (int i = 0; i < n; ++i) order[i] = 0;
      break;
    case Sequence::sequential:
      break;
    case Sequence::random_order: {
      Rng rng(seed_mix(seed, "order"));
      for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[int(rng.uniform_int(0, i))]);
      break;
    }
  }
  std::vector<int> start(n);
  for (int i = 0; i < n; ++i)
    start[i] = (tpl.sequence == Sequence::all_at_once) ? 0 : tpl.per_letter_delay * order[i];

  const int x0 = (W - width) / 2;
  const int y0 = (H - 7 * fs) / 2;
  int dstep = 0, y_start = y0;
  if (tpl.movement == Movement::diagonal_line && n > 1) {
    dstep = std::min(2 * fs, (H - 7 * fs) / (n - 1));
    y_start = (H - 7 * fs - (n - 1) * dstep) / 2;
  }

  const FRGB bg_top = to_f(tpl.background.top);
  const FRGB bg_bot = to_f(tpl.background.gradient ? tpl.background.bottom : tpl.background.top);
  const FRGB fill = to_f(tpl.text_color);
  std::optional<FRGB> oline;
  if (tpl.outline) oline = to_f(*tpl.outline);
  // color_pulse swings toward black for bright text, white for dark text
  const bool bright = std::max({tpl.text_color.r, tpl.text_color.g, tpl.text_color.b}) >= 128;
  const FRGB pulse_to = bright ? FRGB{0, 0, 0} : FRGB{1, 1, 1};
  const int P = emphasis_period(T);

  for (int t = 0; t < T; ++t) {
    Canvas cv{H, W, out.frame(t), t == T - 1 ? &out.glyph_mask : nullptr};
    for (int y = 0; y < H; ++y) {
      FRGB row = (H > 1) ? mix(bg_top, bg_bot, float(y) / float(H - 1)) : bg_top;
      for (int x = 0; x < W; ++x) {
        float* p = cv.px + (size_t(y) * W + x) * 3;
        p[0] = row.r;
        p[1] = row.g;
        p[2] = row.b;
      }
    }

    const int tau = T - 1 - t;  // frames before the end: emphasis is neutral at 0
    double line_dx = 0.0;
    if (tpl.movement == Movement::scroll)
      line_dx = -std::round((x0 + width) * (1.0 - double(t) / double(T - 1)));
    double shake_dx = 0.0;
    if (tpl.emphasis == Emphasis::shake)
      shake_dx = std::round(fs * std::sin(2.0 * kPi * tau / P));
    bool blink_on = true;
    if (tpl.emphasis == Emphasis::blink) blink_on = ((tau / (P / 2)) % 2) == 0;
    float pulse_mix = 0.0f;
    if (tpl.emphasis == Emphasis::color_pulse)
      pulse_mix = float(0.5 * (1.0 - std::cos(2.0 * kPi * tau / P)));
    const FRGB frame_fill = mix(fill, pulse_to, pulse_mix);

    if (!blink_on) continue;

    for (int i = 0; i < n; ++i) {
      double prog = tpl.effect_duration > 0
                        ? std::clamp(double(t - start[i]) / tpl.effect_duration, 0.0, 1.0)
                        : 1.0;
      if (tpl.entrance == Entrance::typewriter) prog = (t >= start[i]) ? 1.0 : 0.0;

      double wave_dy = 0.0;
      if (tpl.emphasis == Emphasis::wave) {
        double env = std::sin(kPi * tau / P);
        wave_dy = std::round(fs * env * env * std::sin(2.0 * kPi * (double(tau) / P + 0.25 * i)));
      }
      double fx = x0 + i * 6 * fs + line_dx + shake_dx;
      double fy = y_start + i * dstep + wave_dy;

      float alpha = 1.0f;
      double scale = 1.0, angle = 0.0;
      switch (tpl.entrance) {
        case Entrance::fade:
          alpha = float(prog);
          break;
        case Entrance::slide_left:
          fx += (1.0 - prog) * (W - fx);
          break;
        case Entrance::slide_right:
          fx += (1.0 - prog) * (-6.0 * fs - fx);
          break;
        case Entrance::slide_up:
          fy += (1.0 - prog) * (H - fy);
          break;
        case Entrance::slide_down:
          fy += (1.0 - prog) * (-7.0 * fs - fy);
          break;
        case Entrance::pop_scale:
          scale = prog;
          break;
        case Entrance::rotate_in:
          scale = prog;
          angle = (1.0 - prog) * 2.0 * kPi;
          break;
        case Entrance::typewriter:
          if (prog < 1.0) continue;
          break;
      }
      if (alpha <= 0.0f || scale <= 0.0) continue;
      draw_glyph(cv, glyph_bitmap(glyph_index(word[size_t(i)])), int(std::lround(fx)),
                 int(std::lround(fy)), fs, frame_fill, oline, alpha, scale, angle);
    }
  }
  return out;
}

std::vector<double> blur_mask(const std::vector<uint8_t>& mask, int H, int W, double sigma) {
  if (sigma <= 0.0) throw ArgumentError("blur_mask: sigma must be positive");
  if (int(mask.size()) != H * W) throw ArgumentError("blur_mask: mask size mismatch");
  const int R = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(size_t(2 * R + 1));
  double ksum = 0.0;
  for (int k = -R; k <= R; ++k) {
    kernel[size_t(k + R)] = std::exp(-0.5 * (double(k) * k) / (sigma * sigma));
    ksum += kernel[size_t(k + R)];
  }
  for (auto& v : kernel) v /= ksum;

  // mirror indices at the borders (edge not repeated)
  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i;
      if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
  };

  std::vector<double> tmp(size_t(H) * W), res(size_t(H) * W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int k = -R; k <= R; ++k)
        acc += kernel[size_t(k + R)] * mask[size_t(y) * W + reflect(x + k, W)];
      tmp[size_t(y) * W + x] = acc;
    }
  double maxv = 0.0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int k = -R; k <= R; ++k)
        acc += kernel[size_t(k + R)] * tmp[size_t(reflect(y + k, H)) * W + x];
      res[size_t(y) * W + x] = acc;
      maxv = std::max(maxv, acc);
    }
  if (maxv > 0.0)
    for (auto& v : res) v = std::clamp(v / maxv, 0.0, 1.0);
  return res;
}

TemplateSpec sample_template(uint64_t seed, int id, int T, int H, int W, int max_word_len) {
  if (max_word_len < 1 || max_word_len > kMaxWordLen)
    throw ArgumentError("sample_template: bad max_word_len");
  Rng rng(seed_mix(seed, "template"));
  TemplateSpec t;
  t.id = id;
  t.entrance = Entrance(rng.uniform_int(0, 7));
  t.emphasis = Emphasis(rng.uniform_int(0, 4));
  t.movement = Movement(rng.uniform_int(0, 2));
  t.sequence = Sequence(rng.uniform_int(0, 2));

  const auto& pal = palette();
  t.background.gradient = rng.bernoulli(0.5);
  t.background.top = pal[size_t(rng.uniform_int(0, int(pal.size()) - 1))].color;
  t.background.bottom =
      t.background.gradient ? pal[size_t(rng.uniform_int(0, int(pal.size()) - 1))].color
                            : t.background.top;

  auto contrast_ok = [&](RGB c) { return segment_contrast(c, t.background) >= kContrastFloor; };
  std::vector<RGB> cands;
  for (const auto& e : pal)
    if (contrast_ok(e.color)) cands.push_back(e.color);
  if (cands.empty()) {  // cannot happen with this palette, but stay safe
    t.background = {false, {0, 0, 0}, {0, 0, 0}};
    cands.push_back({255, 255, 255});
  }
  t.text_color = cands[size_t(rng.uniform_int(0, int(cands.size()) - 1))];

  int fs_max = std::min(W / (6 * max_word_len - 1), H / 7);
  if (fs_max < 1)
    throw ArgumentError("sample_template: canvas too small for max_word_len");
  t.font_scale = int(rng.uniform_int(std::max(1, fs_max - 1), fs_max));

  // Outline stroke is one pixel wide: below two pixels per unit it swallows
  // the letterforms. The horizontal margin keeps the stroked word away from
  // the canvas edge columns that evaluation samples for its background
  // estimate. Draw the coin regardless so template sampling at one id stays
  // one fixed sequence of draws no matter the canvas.
  bool want_outline = rng.bernoulli(0.4);
  int x0_min = (W - (6 * max_word_len - 1) * t.font_scale) / 2;
  if (want_outline && t.font_scale >= 2 && x0_min >= 3) {
    std::vector<RGB> ocands;
    for (const auto& e : pal)
      if (contrast_ok(e.color) && !(e.color == t.text_color)) ocands.push_back(e.color);
    if (!ocands.empty()) t.outline = ocands[size_t(rng.uniform_int(0, int(ocands.size()) - 1))];
  }

  int dur_hi = std::max(2, (T - 1) / 2);
  t.effect_duration = int(rng.uniform_int(2, dur_hi));
  if (t.sequence != Sequence::all_at_once && max_word_len > 1) {
    int cap1 = (T - 1 - t.effect_duration) / (max_word_len - 1);
    int cap2 = (T - t.effect_duration) / max_word_len;
    int cap = std::max(0, std::min({2, cap1, cap2}));
    t.per_letter_delay = int(rng.uniform_int(0, cap));
  }
  t.validate(T, max_word_len);
  return t;
}

const std::vector<std::string>& eval_words() {
  static const std::vector<std::string> words = {
      "Apple", "Ball",  "Cat",   "Dog",   "Eagle", "Fish",  "Goat",  "Horse", "Ice",
      "Juice", "King",  "Lemon", "Mango", "Nest",  "Ocean", "Piano", "Queen", "River",
      "Snake", "Tiger", "Uncle", "Voice", "Whale", "Xray",  "Yacht", "Zebra"};
  return words;
}

std::vector<RenderSample> make_eval_set(const std::vector<TemplateSpec>& templates,
                                        int T, int H, int W) {
  if (templates.empty()) throw ArgumentError("make_eval_set: empty template list");
  std::vector<RenderSample> out;
  out.reserve(templates.size() * eval_words().size());
  for (const auto& tpl : templates)
    for (size_t wi = 0; wi < eval_words().size(); ++wi)
      out.push_back(render(tpl, eval_words()[wi], seed_mix(uint64_t(tpl.id), "eval", wi), T, H, W));
  return out;
}

}  // namespace td::typogen

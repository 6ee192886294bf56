#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "typodiff/core.hpp"
#include "typodiff/font.hpp"

namespace td::typogen {

struct RGB {
  uint8_t r = 0, g = 0, b = 0;
  bool operator==(const RGB&) const = default;
};

// Largest per-channel distance; the readability floor below is stated in
// these units.
inline int max_channel_dist(RGB a, RGB b) {
  int dr = std::abs(int(a.r) - int(b.r));
  int dg = std::abs(int(a.g) - int(b.g));
  int db = std::abs(int(a.b) - int(b.b));
  return std::max(dr, std::max(dg, db));
}

enum class Entrance {
  fade,
  slide_left,
  slide_right,
  slide_up,
  slide_down,
  pop_scale,
  rotate_in,
  typewriter
};
enum class Emphasis { none, blink, color_pulse, shake, wave };
enum class Movement { static_line, diagonal_line, scroll };
enum class Sequence { all_at_once, sequential, random_order };

struct Background {
  bool gradient = false;
  RGB top;     // solid color when !gradient
  RGB bottom;  // used only when gradient
  bool operator==(const Background&) const = default;
};

inline constexpr int kContrastFloor = 64;
inline constexpr int kMaxWordLen = 12;

// Worst-case max-channel distance between a color and any point of the
// background (the whole gradient segment, not just its endpoints — a gray
// on a black-to-white gradient vanishes halfway down).
int segment_contrast(RGB color, const Background& bg);

struct TemplateSpec {
  int id = 0;
  Entrance entrance = Entrance::fade;
  Emphasis emphasis = Emphasis::none;
  Movement movement = Movement::static_line;
  Sequence sequence = Sequence::all_at_once;
  RGB text_color{255, 255, 255};
  std::optional<RGB> outline;
  Background background;
  int font_scale = 1;       // pixels per glyph cell unit
  int per_letter_delay = 0; // frames between letter starts
  int effect_duration = 4;  // frames an entrance takes

  // Throws ArgumentError when the timing or contrast invariants fail.
  // Timing must guarantee every letter is fully displayed strictly before
  // the clip ends: start of the last letter + effect_duration <= T-1.
  void validate(int T, int max_word_len) const;
};

struct CaptionSet {
  std::string static_caption;
  std::string dynamic_caption;
  std::string word;          // L
  std::string word_encoded;  // L'
  std::string word_caption;  // "The word " + L'
};

struct RenderSample {
  std::vector<float> frames;       // T*H*W*3 in [0,1]
  std::vector<uint8_t> glyph_mask; // H*W in {0,1}, last frame
  CaptionSet captions;
  std::string word;
  int template_id = 0;
  uint64_t seed = 0;
  int T = 0, H = 0, W = 0;

  float* frame(int t) { return frames.data() + size_t(t) * H * W * 3; }
  const float* frame(int t) const { return frames.data() + size_t(t) * H * W * 3; }
};

// Named color palette backing the caption grammar. Lookup is exact first,
// nearest (squared distance, first wins ties) otherwise.
struct PaletteEntry {
  const char* name;
  RGB color;
};
const std::vector<PaletteEntry>& palette();
std::string color_name(RGB c);

// Every word the caption grammar can emit (color names included, letters
// excluded). Used to freeze the vocabulary.
std::vector<std::string> caption_grammar_words();

std::string sample_word(uint64_t rng_seed, int min_len, int max_len);

RenderSample render(const TemplateSpec& tpl, const std::string& word, uint64_t seed,
                    int T, int H, int W);

CaptionSet make_captions(const TemplateSpec& tpl, const std::string& word);

std::vector<double> blur_mask(const std::vector<uint8_t>& mask, int H, int W, double sigma);

// Draws a valid template for the given canvas; pure function of seed.
TemplateSpec sample_template(uint64_t seed, int id, int T, int H, int W, int max_word_len);

// The fixed evaluation words: one per starting letter, A through Z,
// first letter capitalized, five letters or fewer.
const std::vector<std::string>& eval_words();

std::vector<RenderSample> make_eval_set(const std::vector<TemplateSpec>& templates,
                                        int T, int H, int W);

}  // namespace td::typogen

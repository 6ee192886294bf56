#include "typodiff/font.hpp"

#include "typodiff/core.hpp"

namespace td::typogen {

namespace {

// Each glyph is 7 strings of 5 chars, '#' = inked.
// Hand-tuned so all 52 patterns are pairwise distinct (unit tested).
const char* kGlyphArt[kNumGlyphs][kGlyphRows] = {
    // A
    {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"},
    // B
    {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."},
    // C
    {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."},
    // D
    {"###..", "#..#.", "#...#", "#...#", "#...#", "#..#.", "###.."},
    // E
    {"#####", "#....", "#....", "####.", "#....", "#....", "#####"},
    // F
    {"#####", "#....", "#....", "####.", "#....", "#....", "#...."},
    // G
    {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"},
    // H
    {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"},
    // I
    {".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."},
    // J
    {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."},
    // K
    {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"},
    // L
    {"#....", "#....", "#....", "#....", "#....", "#....", "#####"},
    // M
    {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"},
    // N
    {"#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"},
    // O
    {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."},
    // P
    {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."},
    // Q
    {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"},
    // R
    {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"},
    // S
    {".####", "#....", "#....", ".###.", "....#", "....#", "####."},
    // T
    {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."},
    // U
    {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."},
    // V
    {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."},
    // W
    {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"},
    // X
    {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"},
    // Y
    {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."},
    // Z
    {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"},
    // a
    {".....", ".....", ".###.", "....#", ".####", "#...#", ".####"},
    // b
    {"#....", "#....", "####.", "#...#", "#...#", "#...#", "####."},
    // c
    {".....", ".....", ".###.", "#...#", "#....", "#...#", ".###."},
    // d
    {"....#", "....#", ".####", "#...#", "#...#", "#...#", ".####"},
    // e
    {".....", ".....", ".###.", "#...#", "#####", "#....", ".###."},
    // f
    {"..##.", ".#..#", ".#...", "###..", ".#...", ".#...", ".#..."},
    // g
    {".....", ".####", "#...#", "#...#", ".####", "....#", ".###."},
    // h
    {"#....", "#....", "####.", "#...#", "#...#", "#...#", "#...#"},
    // i
    {"..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###."},
    // j
    {"...#.", ".....", "..##.", "...#.", "...#.", "#..#.", ".##.."},
    // k
    {"#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#."},
    // l
    {".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."},
    // m
    {".....", ".....", "##.#.", "#.#.#", "#.#.#", "#.#.#", "#.#.#"},
    // n
    {".....", ".....", "####.", "#...#", "#...#", "#...#", "#...#"},
    // o
    {".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###."},
    // p
    {".....", ".....", "####.", "#...#", "####.", "#....", "#...."},
    // q
    {".....", ".....", ".####", "#...#", ".####", "....#", "....#"},
    // r
    {".....", ".....", "#.##.", "##..#", "#....", "#....", "#...."},
    // s
    {".....", ".....", ".####", "#....", ".###.", "....#", "####."},
    // t
    {".#...", ".#...", "###..", ".#...", ".#...", ".#..#", "..##."},
    // u
    {".....", ".....", "#...#", "#...#", "#...#", "#..##", ".##.#"},
    // v
    {".....", ".....", "#...#", "#...#", "#...#", ".#.#.", "..#.."},
    // w
    {".....", ".....", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."},
    // x
    {".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#"},
    // y
    {".....", ".....", "#...#", "#...#", ".####", "....#", ".###."},
    // z
    {".....", ".....", "#####", "...#.", "..#..", ".#...", "#####"},
};

struct FontTables {
  std::array<GlyphBitmap, kNumGlyphs> bitmaps;
  FontTables() {
    for (int g = 0; g < kNumGlyphs; ++g)
      for (int r = 0; r < kGlyphRows; ++r)
        for (int c = 0; c < kGlyphCols; ++c)
          bitmaps[g][r][c] = kGlyphArt[g][r][c] == '#' ? 1 : 0;
  }
};

const FontTables& tables() {
  static FontTables t;
  return t;
}

}  // namespace

int glyph_index(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return 26 + (c - 'a');
  throw ArgumentError(std::string("not a letter: '") + c + "'");
}

char glyph_char(int index) {
  if (index < 0 || index >= kNumGlyphs) throw ArgumentError("glyph index out of range");
  return index < 26 ? char('A' + index) : char('a' + index - 26);
}

const GlyphBitmap& glyph_bitmap(int index) {
  if (index < 0 || index >= kNumGlyphs) throw ArgumentError("glyph index out of range");
  return tables().bitmaps[size_t(index)];
}

const GlyphBitmap& glyph_bitmap_for(char c) { return glyph_bitmap(glyph_index(c)); }

bool glyph_covers(const GlyphBitmap& bm, int fs, int lx, int ly) {
  if (lx < 0 || ly < 0 || lx >= kGlyphCols * fs || ly >= kGlyphRows * fs) return false;
  return bm[ly / fs][lx / fs] != 0;
}

bool glyph_stroke(const GlyphBitmap& bm, int fs, int lx, int ly) {
  if (glyph_covers(bm, fs, lx, ly)) return false;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      if ((dx | dy) && glyph_covers(bm, fs, lx + dx, ly + dy)) return true;
  return false;
}

const std::string& alphabet() {
  static const std::string a = [] {
    std::string s;
    for (int i = 0; i < kNumGlyphs; ++i) s += glyph_char(i);
    return s;
  }();
  return a;
}

}  // namespace td::typogen

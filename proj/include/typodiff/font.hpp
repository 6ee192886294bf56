#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace td::typogen {

// Fixed 5x7 bitmap font covering A-Z and a-z.
inline constexpr int kGlyphCols = 5;
inline constexpr int kGlyphRows = 7;
inline constexpr int kNumGlyphs = 52;

// Index 0..25 = 'A'..'Z', 26..51 = 'a'..'z'. Throws ArgumentError otherwise.
int glyph_index(char c);
char glyph_char(int index);

// Row-major bit pattern for one glyph; [row][col], 1 = inked.
using GlyphBitmap = std::array<std::array<uint8_t, kGlyphCols>, kGlyphRows>;

const GlyphBitmap& glyph_bitmap(int index);
const GlyphBitmap& glyph_bitmap_for(char c);

// Pixel-space queries for a glyph scaled to fs pixels per unit, local
// origin at the cell's top-left. glyph_covers = inked; glyph_stroke = the
// one-pixel outline ring (empty pixel 8-adjacent to an inked one, interior
// counters included). Both renderer and recognizer build on these, so the
// two always agree about what an outlined letter looks like.
bool glyph_covers(const GlyphBitmap& bm, int fs, int lx, int ly);
bool glyph_stroke(const GlyphBitmap& bm, int fs, int lx, int ly);

const std::string& alphabet();  // "AB...Zab...z"

}  // namespace td::typogen

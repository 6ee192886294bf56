#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "typodiff/core.hpp"

namespace td::evalsuite {

struct OcrResult {
  std::string recognized;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // (index into recognized, index into reference) pairs of the
  // order-preserving character alignment
  std::vector<std::pair<int, int>> matches;
};

// Binarized "text" pixels: max-channel distance from a per-row background
// estimate (edge columns), thresholded by Otsu with an absolute floor.
std::vector<uint8_t> binarize_text(const float* frame, int H, int W);

// Order-preserving character alignment (LCS) of a recognized string
// against the reference, scored as precision/recall/F1.
OcrResult score_match(const std::string& recognized, const std::string& reference);

// Template-matching OCR against the font's scaled glyphs; reference gives
// the line geometry and the F1 target. Never throws on messy frames.
OcrResult ocr_read(const float* frame, int H, int W, int font_scale,
                   const std::string& reference);

// Best font_scale for a frame judged by OCR score against the reference
// (ties -> smallest scale). Used on ground-truth renders for calibration.
int calibrate_font_scale(const float* frame, int H, int W, const std::string& reference);

double glyph_iou(const float* frame, int H, int W, const std::vector<uint8_t>& gt_mask);

inline constexpr uint64_t kExtractorSeed = 0x1a2b3c4d5e6f7788ull;
inline constexpr int kFeatureDim = 256;

struct FrechetStats {
  std::vector<double> mu;     // dim
  std::vector<double> sigma;  // dim x dim, row-major
  int dim = 0;
};

// 256-dim features from a fixed random-weight 3-layer spatiotemporal conv
// net (a stated stand-in for a pretrained video backbone).
std::vector<double> video_features(const float* video, int T, int H, int W,
                                   uint64_t extractor_seed = kExtractorSeed);

FrechetStats frechet_stats(const std::vector<const float*>& videos, int T, int H, int W,
                           uint64_t extractor_seed = kExtractorSeed);

double frechet_from_stats(const FrechetStats& a, const FrechetStats& b);

double frechet_distance(const std::vector<const float*>& a, const std::vector<const float*>& b,
                        int T, int H, int W, uint64_t extractor_seed = kExtractorSeed);

}  // namespace td::evalsuite

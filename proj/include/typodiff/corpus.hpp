#pragma once

#include <string>
#include <vector>

#include "typodiff/typogen.hpp"

namespace td::typogen {

// On-disk layout: one directory per sample holding
//   video.kty  "KTYV0001" + u32 dims (T,H,W,3) + float32 LE data
//   mask.ktm   "KTYM0001" + u32 dims (H,W) + uint8 data
//   meta.txt   key=value lines
// plus, at the corpus root, vocab.txt and manifest.txt (path + fnv64 per
// sample, protecting against silent drift between train and eval).

void write_video_tensor(const std::string& path, const float* data, int T, int H, int W);
std::vector<float> read_video_tensor(const std::string& path, int& T, int& H, int& W);

void write_sample_dir(const std::string& dir, const RenderSample& s);
RenderSample read_sample_dir(const std::string& dir);

struct Corpus {
  std::string root;
  std::vector<RenderSample> samples;
  std::string vocab_text;
};

void write_corpus(const std::string& root, const std::vector<RenderSample>& samples,
                  const std::string& vocab_text);
Corpus load_corpus(const std::string& root, bool verify_hashes = true);

}  // namespace td::typogen

#include "typodiff/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "typodiff/vocab.hpp"

namespace fs = std::filesystem;

namespace td::typogen {

namespace {

constexpr char kVideoMagic[9] = "KTYV0001";
constexpr char kMaskMagic[9] = "KTYM0001";

std::map<std::string, std::string> parse_meta(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("meta.txt: malformed line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& meta_get(const std::map<std::string, std::string>& kv,
                            const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw IoError("meta.txt: missing key " + key);
  return it->second;
}

uint64_t hash_file(const std::string& path) {
  auto bytes = read_file_bytes(path);
  return fnv1a64(bytes.data(), bytes.size());
}

uint64_t hash_sample_dir(const std::string& dir) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const char* f : {"video.kty", "mask.ktm", "meta.txt"}) {
    auto bytes = read_file_bytes(dir + "/" + f);
    h = fnv1a64(bytes.data(), bytes.size(), h);
  }
  return h;
}

std::string hex16(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
  return buf;
}

}  // namespace

void write_video_tensor(const std::string& path, const float* data, int T, int H, int W) {
  ByteWriter w;
  w.magic(kVideoMagic);
  w.u32(uint32_t(T));
  w.u32(uint32_t(H));
  w.u32(uint32_t(W));
  w.u32(3);
  w.raw(data, size_t(T) * H * W * 3 * sizeof(float));
  write_file_bytes(path, w.buf.data(), w.buf.size());
}

std::vector<float> read_video_tensor(const std::string& path, int& T, int& H, int& W) {
  auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  r.expect_magic(kVideoMagic);
  T = int(r.u32());
  H = int(r.u32());
  W = int(r.u32());
  uint32_t c = r.u32();
  if (c != 3) throw CompatibilityError("video tensor: channel dim must be 3");
  if (T < 1 || H < 1 || W < 1) throw CompatibilityError("video tensor: bad dims");
  std::vector<float> data(size_t(T) * H * W * 3);
  r.raw(data.data(), data.size() * sizeof(float));
  return data;
}

void write_sample_dir(const std::string& dir, const RenderSample& s) {
  fs::create_directories(dir);
  write_video_tensor(dir + "/video.kty", s.frames.data(), s.T, s.H, s.W);

  ByteWriter m;
  m.magic(kMaskMagic);
  m.u32(uint32_t(s.H));
  m.u32(uint32_t(s.W));
  m.raw(s.glyph_mask.data(), s.glyph_mask.size());
  write_file_bytes(dir + "/mask.ktm", m.buf.data(), m.buf.size());

  std::string meta;
  meta += "static_caption=" + s.captions.static_caption + "\n";
  meta += "dynamic_caption=" + s.captions.dynamic_caption + "\n";
  meta += "word=" + s.captions.word + "\n";
  meta += "word_caption=" + s.captions.word_caption + "\n";
  meta += "template_id=" + std::to_string(s.template_id) + "\n";
  meta += "seed=" + std::to_string(s.seed) + "\n";
  write_file_text(dir + "/meta.txt", meta);
}

RenderSample read_sample_dir(const std::string& dir) {
  RenderSample s;
  s.frames = read_video_tensor(dir + "/video.kty", s.T, s.H, s.W);

  auto mb = read_file_bytes(dir + "/mask.ktm");
  ByteReader r(mb);
  r.expect_magic(kMaskMagic);
  int mh = int(r.u32()), mw = int(r.u32());
  if (mh != s.H || mw != s.W) throw CompatibilityError("mask dims disagree with video dims");
  s.glyph_mask.resize(size_t(mh) * mw);
  r.raw(s.glyph_mask.data(), s.glyph_mask.size());

  auto kv = parse_meta(read_file_text(dir + "/meta.txt"));
  s.captions.static_caption = meta_get(kv, "static_caption");
  s.captions.dynamic_caption = meta_get(kv, "dynamic_caption");
  s.captions.word = meta_get(kv, "word");
  s.captions.word_caption = meta_get(kv, "word_caption");
  s.captions.word_encoded = textenc::encode_word_content(s.captions.word);
  s.word = s.captions.word;
  s.template_id = std::stoi(meta_get(kv, "template_id"));
  s.seed = std::stoull(meta_get(kv, "seed"));
  return s;
}

void write_corpus(const std::string& root, const std::vector<RenderSample>& samples,
                  const std::string& vocab_text) {
  fs::create_directories(root);
  write_file_text(root + "/vocab.txt", vocab_text);
  std::string manifest;
  for (size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%05zu", i);
    std::string dir = root + "/" + name;
    write_sample_dir(dir, samples[i]);
    manifest += std::string(name) + " " + hex16(hash_sample_dir(dir)) + "\n";
  }
  manifest += "vocab.txt " + hex16(hash_file(root + "/vocab.txt")) + "\n";
  write_file_text(root + "/manifest.txt", manifest);
}

Corpus load_corpus(const std::string& root, bool verify_hashes) {
  Corpus c;
  c.root = root;
  if (!fs::exists(root + "/manifest.txt")) throw IoError("corpus: missing manifest at " + root);
  c.vocab_text = read_file_text(root + "/vocab.txt");
  std::istringstream in(read_file_text(root + "/manifest.txt"));
  std::string name, hash;
  while (in >> name >> hash) {
    uint64_t expect = std::stoull(hash, nullptr, 16);
    if (name == "vocab.txt") {
      if (verify_hashes && hash_file(root + "/vocab.txt") != expect)
        throw CompatibilityError("corpus: vocab.txt hash mismatch");
      continue;
    }
    std::string dir = root + "/" + name;
    if (verify_hashes && hash_sample_dir(dir) != expect)
      throw CompatibilityError("corpus: sample hash mismatch at " + name);
    c.samples.push_back(read_sample_dir(dir));
  }
  if (c.samples.empty()) throw IoError("corpus: manifest lists no samples");
  return c;
}

}  // namespace td::typogen

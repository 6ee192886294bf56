#include "typodiff/gif.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "typodiff/core.hpp"

namespace td::typogen {

namespace {

struct BitPacker {
  std::vector<uint8_t> bytes;
  uint32_t acc = 0;
  int nbits = 0;
  void put(uint32_t code, int width) {
    acc |= code << nbits;
    nbits += width;
    while (nbits >= 8) {
      bytes.push_back(uint8_t(acc & 0xff));
      acc >>= 8;
      nbits -= 8;
    }
  }
  void flush() {
    if (nbits > 0) bytes.push_back(uint8_t(acc & 0xff));
    acc = 0;
    nbits = 0;
  }
};

// GIF-flavored LZW, min code size 8.
std::vector<uint8_t> lzw_encode(const std::vector<uint8_t>& pixels) {
  constexpr int kClear = 256, kEoi = 257;
  BitPacker bp;
  std::unordered_map<uint32_t, uint16_t> dict;
  int code_size = 9;
  int next_code = kEoi + 1;
  bp.put(kClear, code_size);
  uint32_t cur = pixels.empty() ? 0 : pixels[0];
  for (size_t i = 1; i < pixels.size(); ++i) {
    uint32_t k = pixels[i];
    uint32_t key = (cur << 8) | k;
    auto it = dict.find(key);
    if (it != dict.end()) {
      cur = it->second;
      continue;
    }
    bp.put(cur, code_size);
    if (next_code < 4096) {
      dict.emplace(key, uint16_t(next_code));
      if (next_code == (1 << code_size) && code_size < 12) ++code_size;
      ++next_code;
    } else {
      bp.put(kClear, code_size);
      dict.clear();
      code_size = 9;
      next_code = kEoi + 1;
    }
    cur = k;
  }
  if (!pixels.empty()) bp.put(cur, code_size);
  bp.put(kEoi, code_size);
  bp.flush();
  return std::move(bp.bytes);
}

void push_u16(std::vector<uint8_t>& v, uint16_t x) {
  v.push_back(uint8_t(x & 0xff));
  v.push_back(uint8_t(x >> 8));
}

}  // namespace

void write_gif(const std::string& path, const float* frames, int T, int H, int W,
               int delay_cs) {
  if (T < 1 || H < 1 || W < 1) throw ArgumentError("write_gif: bad dims");
  std::vector<uint8_t> out;
  out.insert(out.end(), {'G', 'I', 'F', '8', '9', 'a'});
  push_u16(out, uint16_t(W));
  push_u16(out, uint16_t(H));
  out.push_back(0xF7);  // global table, 256 entries
  out.push_back(0);
  out.push_back(0);
  for (int i = 0; i < 256; ++i) {  // 6x6x6 cube then black padding
    if (i < 216) {
      out.push_back(uint8_t((i / 36) * 51));
      out.push_back(uint8_t(((i / 6) % 6) * 51));
      out.push_back(uint8_t((i % 6) * 51));
    } else {
      out.insert(out.end(), {0, 0, 0});
    }
  }
  // loop forever
  const uint8_t netscape[] = {0x21, 0xFF, 0x0B, 'N', 'E', 'T', 'S', 'C', 'A', 'P',
                              'E',  '2',  '.',  '0', 3,   1,   0,   0,   0};
  out.insert(out.end(), netscape, netscape + sizeof netscape);

  std::vector<uint8_t> idx(size_t(H) * W);
  for (int t = 0; t < T; ++t) {
    const float* f = frames + size_t(t) * H * W * 3;
    for (size_t p = 0; p < idx.size(); ++p) {
      auto q = [&](float v) {
        return int(std::lround(std::clamp(v, 0.0f, 1.0f) * 5.0f));
      };
      idx[p] = uint8_t(36 * q(f[p * 3]) + 6 * q(f[p * 3 + 1]) + q(f[p * 3 + 2]));
    }
    const uint8_t gce[] = {0x21, 0xF9, 4, 0x04, uint8_t(delay_cs & 0xff),
                           uint8_t(delay_cs >> 8), 0, 0};
    out.insert(out.end(), gce, gce + sizeof gce);
    out.push_back(0x2C);
    push_u16(out, 0);
    push_u16(out, 0);
    push_u16(out, uint16_t(W));
    push_u16(out, uint16_t(H));
    out.push_back(0);
    out.push_back(8);  // min LZW code size
    auto data = lzw_encode(idx);
    for (size_t off = 0; off < data.size(); off += 255) {
      size_t n = std::min<size_t>(255, data.size() - off);
      out.push_back(uint8_t(n));
      out.insert(out.end(), data.begin() + long(off), data.begin() + long(off + n));
    }
    out.push_back(0);
  }
  out.push_back(0x3B);
  write_file_bytes(path, out.data(), out.size());
}

}  // namespace td::typogen

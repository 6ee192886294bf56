#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace td {

// Error taxonomy. The CLI maps these onto process exit codes, everything
// else just throws and lets the caller decide.
class ArgumentError : public std::runtime_error {
 public:
  explicit ArgumentError(const std::string& msg) : std::runtime_error(msg) {}
};

// Requested text/layout does not fit the canvas at the requested scale.
class LayoutError : public ArgumentError {
 public:
  explicit LayoutError(const std::string& msg) : ArgumentError(msg) {}
};

// Token not present in the vocabulary.
class VocabularyError : public ArgumentError {
 public:
  explicit VocabularyError(const std::string& msg) : ArgumentError(msg) {}
};

// Token sequence longer than the encoder context.
class TruncationError : public ArgumentError {
 public:
  explicit TruncationError(const std::string& msg) : ArgumentError(msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint/corpus produced under incompatible settings (vocabulary hash,
// format version, shape mismatch...).
class CompatibilityError : public std::runtime_error {
 public:
  explicit CompatibilityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Deterministic RNG used everywhere instead of <random> distributions, whose
// output is implementation-defined and would break byte-identical replays.
// splitmix64 core, Box-Muller for gaussians.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // (0, 1) -- low bit forced so log() never sees zero
  double uniform_pos() { return double((next_u64() >> 11) | 1ull) * 0x1.0p-53; }

  double normal() {
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // inclusive on both ends
  int64_t uniform_int(int64_t lo, int64_t hi) {
    if (hi < lo) throw ArgumentError("uniform_int: empty range");
    uint64_t span = uint64_t(hi - lo) + 1ull;
    return lo + int64_t(next_u64() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  uint64_t state_;
};

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const uint8_t* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// Seed derivation: fold words into an fnv state so sub-streams
// (per step, per sample, per parameter) never collide by construction.
inline uint64_t seed_mix(uint64_t a) {
  return fnv1a64(&a, sizeof a);
}
inline uint64_t seed_mix(uint64_t a, uint64_t b) {
  uint64_t h = fnv1a64(&a, sizeof a);
  return fnv1a64(&b, sizeof b, h);
}
inline uint64_t seed_mix(uint64_t a, uint64_t b, uint64_t c) {
  uint64_t h = fnv1a64(&a, sizeof a);
  h = fnv1a64(&b, sizeof b, h);
  return fnv1a64(&c, sizeof c, h);
}
inline uint64_t seed_mix(uint64_t a, const std::string& tag) {
  uint64_t h = fnv1a64(&a, sizeof a);
  return fnv1a64(tag.data(), tag.size(), h);
}
inline uint64_t seed_mix(uint64_t a, const std::string& tag, uint64_t b) {
  uint64_t h = fnv1a64(&a, sizeof a);
  h = fnv1a64(tag.data(), tag.size(), h);
  return fnv1a64(&b, sizeof b, h);
}

// ---- small file helpers (binary little-endian; this code never runs on BE) ----

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const void* data, size_t n);
std::string read_file_text(const std::string& path);
void write_file_text(const std::string& path, const std::string& text);

// Append/extract fixed-width little-endian values to a byte buffer.
struct ByteWriter {
  std::vector<uint8_t> buf;
  void raw(const void* p, size_t n) {
    const uint8_t* b = static_cast<const uint8_t*>(p);
    buf.insert(buf.end(), b, b + n);
  }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void i64(int64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void magic(const char tag[8]) { raw(tag, 8); }
};

struct ByteReader {
  const uint8_t* p;
  size_t n;
  size_t off = 0;
  ByteReader(const void* data, size_t size) : p(static_cast<const uint8_t*>(data)), n(size) {}
  explicit ByteReader(const std::vector<uint8_t>& v) : p(v.data()), n(v.size()) {}
  void raw(void* out, size_t k) {
    if (off + k > n) throw IoError("truncated input buffer");
    std::memcpy(out, p + off, k);
    off += k;
  }
  uint32_t u32() { uint32_t v; raw(&v, 4); return v; }
  uint64_t u64() { uint64_t v; raw(&v, 8); return v; }
  int64_t i64() { int64_t v; raw(&v, 8); return v; }
  double f64() { double v; raw(&v, 8); return v; }
  std::string str() {
    uint64_t k = u64();
    if (off + k > n) throw IoError("truncated string");
    std::string s(reinterpret_cast<const char*>(p + off), k);
    off += k;
    return s;
  }
  void expect_magic(const char tag[8]) {
    char got[8];
    raw(got, 8);
    if (std::memcmp(got, tag, 8) != 0)
      throw CompatibilityError("bad magic, expected " + std::string(tag, 8));
  }
};

}  // namespace td

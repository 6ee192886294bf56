#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "typodiff/core.hpp"

namespace td::textenc {

inline constexpr int kNMax = 77;

// Closed token set: specials, the 52 letters, the two word-content
// delimiters, then every caption grammar word (minus single letters the
// alphabet already covers, so the token->id map stays bijective).
struct Vocabulary {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;
  int pad_id = 0, start_id = 1, end_id = 2, null_id = 3;
  int letter_base = 4;  // id of 'A'; letters occupy 52 consecutive ids
  int bar_id = 0, caret_id = 0;

  static Vocabulary standard();
  static Vocabulary from_text(const std::string& text);  // one token per line
  std::string to_text() const;
  uint64_t hash() const { return fnv1a64(to_text()); }

  int size() const { return int(tokens.size()); }
  int lookup(const std::string& tok) const {
    auto it = index.find(tok);
    return it == index.end() ? -1 : it->second;
  }
  // Single-character tokens that concatenate without spaces (letters, |, ^).
  bool char_class(int id) const {
    return (id >= letter_base && id < letter_base + 52) || id == bar_id || id == caret_id;
  }
};

struct TokenSequence {
  std::vector<int32_t> ids;  // length n_max, padded
  int valid = 0;             // real tokens including start/end
};

// "Apple" -> "A^|p|p|l|e": letters joined by '|', '^' after each uppercase.
std::string encode_word_content(const std::string& word);
std::string decode_word_content(const std::string& encoded);
std::string make_word_caption(const std::string& word);  // "The word " + L'

TokenSequence tokenize(const std::string& caption, const Vocabulary& vocab, int n_max = kNMax);
std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab);
TokenSequence null_sequence(const Vocabulary& vocab, int n_max = kNMax);

}  // namespace td::textenc

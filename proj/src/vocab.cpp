#include "typodiff/vocab.hpp"

#include <sstream>

#include "typodiff/font.hpp"
#include "typodiff/typogen.hpp"

namespace td::textenc {

namespace {

const char* kSpecials[4] = {"<pad>", "<start>", "<end>", "<null>"};

bool is_letter(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); }

void finish(Vocabulary& v) {
  v.index.clear();
  for (int i = 0; i < int(v.tokens.size()); ++i) {
    auto [it, inserted] = v.index.emplace(v.tokens[size_t(i)], i);
    if (!inserted) throw CompatibilityError("vocabulary: duplicate token " + v.tokens[size_t(i)]);
  }
  v.pad_id = 0;
  v.start_id = 1;
  v.end_id = 2;
  v.null_id = 3;
  v.letter_base = 4;
  v.bar_id = 4 + 52;
  v.caret_id = v.bar_id + 1;
}

}  // namespace

Vocabulary Vocabulary::standard() {
  Vocabulary v;
  for (const char* s : kSpecials) v.tokens.push_back(s);
  for (char c : typogen::alphabet()) v.tokens.push_back(std::string(1, c));
  v.tokens.push_back("|");
  v.tokens.push_back("^");
  for (const auto& w : typogen::caption_grammar_words())
    if (!(w.size() == 1 && is_letter(w[0]))) v.tokens.push_back(w);
  finish(v);
  return v;
}

Vocabulary Vocabulary::from_text(const std::string& text) {
  Vocabulary v;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) v.tokens.push_back(line);
  if (v.tokens.size() < 4 + 52 + 2) throw CompatibilityError("vocabulary file too short");
  for (int i = 0; i < 4; ++i)
    if (v.tokens[size_t(i)] != kSpecials[i])
      throw CompatibilityError("vocabulary: special token mismatch at id " + std::to_string(i));
  for (int i = 0; i < 52; ++i)
    if (v.tokens[size_t(4 + i)] != std::string(1, typogen::alphabet()[size_t(i)]))
      throw CompatibilityError("vocabulary: letter block mismatch");
  if (v.tokens[56] != "|" || v.tokens[57] != "^")
    throw CompatibilityError("vocabulary: delimiter block mismatch");
  finish(v);
  return v;
}

std::string Vocabulary::to_text() const {
  std::string out;
  for (const auto& t : tokens) {
    out += t;
    out += '\n';
  }
  return out;
}

std::string encode_word_content(const std::string& word) {
  if (word.empty()) throw ArgumentError("encode_word_content: empty word");
  std::string out;
  for (size_t i = 0; i < word.size(); ++i) {
    char c = word[i];
    if (!is_letter(c))
      throw ArgumentError(std::string("encode_word_content: not a letter: '") + c + "'");
    if (i) out += '|';
    out += c;
    if (c >= 'A' && c <= 'Z') out += '^';
  }
  return out;
}

std::string decode_word_content(const std::string& encoded) {
  std::string word;
  size_t i = 0;
  while (i < encoded.size()) {
    if (!word.empty()) {
      if (encoded[i] != '|') throw ArgumentError("decode_word_content: expected '|'");
      ++i;
    }
    if (i >= encoded.size() || !is_letter(encoded[i]))
      throw ArgumentError("decode_word_content: expected a letter");
    char c = encoded[i++];
    word += c;
    if (c >= 'A' && c <= 'Z') {
      if (i >= encoded.size() || encoded[i] != '^')
        throw ArgumentError("decode_word_content: uppercase letter missing '^'");
      ++i;
    }
  }
  if (word.empty()) throw ArgumentError("decode_word_content: empty input");
  return word;
}

std::string make_word_caption(const std::string& word) {
  return "The word " + encode_word_content(word);
}

TokenSequence tokenize(const std::string& caption, const Vocabulary& vocab, int n_max) {
  if (n_max < 2) throw ArgumentError("tokenize: n_max too small");
  std::vector<int32_t> ids;
  ids.push_back(int32_t(vocab.start_id));
  std::istringstream in(caption);
  std::string tok;
  while (in >> tok) {
    int id = vocab.lookup(tok);
    if (id >= 0) {
      ids.push_back(int32_t(id));
      continue;
    }
    // not a vocabulary word: must be letter/delimiter characters (encoded
    // word contents like "A^|p|p|l|e")
    bool charwise = true;
    for (char c : tok)
      if (!is_letter(c) && c != '|' && c != '^') charwise = false;
    if (!charwise) throw VocabularyError("tokenize: out-of-vocabulary token: " + tok);
    for (char c : tok) {
      int cid = vocab.lookup(std::string(1, c));
      if (cid < 0) throw VocabularyError("tokenize: out-of-vocabulary token: " + tok);
      ids.push_back(int32_t(cid));
    }
  }
  ids.push_back(int32_t(vocab.end_id));
  if (int(ids.size()) > n_max)
    throw TruncationError("tokenize: caption needs " + std::to_string(ids.size()) +
                          " tokens, limit " + std::to_string(n_max));
  TokenSequence seq;
  seq.valid = int(ids.size());
  ids.resize(size_t(n_max), int32_t(vocab.pad_id));
  seq.ids = std::move(ids);
  return seq;
}

std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  bool prev_char = false;
  for (int i = 0; i < seq.valid; ++i) {
    int id = seq.ids[size_t(i)];
    if (id == vocab.start_id || id == vocab.end_id || id == vocab.pad_id) continue;
    if (id < 0 || id >= vocab.size()) throw ArgumentError("detokenize: id out of range");
    bool cur_char = vocab.char_class(id);
    if (!out.empty() && !(prev_char && cur_char)) out += ' ';
    out += vocab.tokens[size_t(id)];
    prev_char = cur_char;
  }
  return out;
}

TokenSequence null_sequence(const Vocabulary& vocab, int n_max) {
  TokenSequence seq;
  seq.ids.assign(size_t(n_max), int32_t(vocab.pad_id));
  seq.ids[0] = int32_t(vocab.start_id);
  seq.ids[1] = int32_t(vocab.null_id);
  seq.ids[2] = int32_t(vocab.end_id);
  seq.valid = 3;
  return seq;
}

}  // namespace td::textenc

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "altsg/cells.hpp"
#include "altsg/errors.hpp"

namespace altsg {

enum class VocabMode { Char, Word };

/// Token <-> id bijection. Ids are dense in [0, V); <unk> and <eos> always
/// occupy the lowest ids, the rest are frequency-sorted with lexicographic
/// tie-breaking.
class Vocab {
 public:
  VocabMode mode = VocabMode::Char;

  int unk_id() const { return 0; }
  int eos_id() const { return 1; }
  std::size_t size() const { return id_to_tok_.size(); }

  int lookup(const std::string& tok) const {
    auto it = tok_to_id_.find(tok);
    return it == tok_to_id_.end() ? unk_id() : it->second;
  }

  const std::string& token(std::size_t id) const { return id_to_tok_.at(id); }

  void set_tokens(std::vector<std::string> toks) {
    id_to_tok_ = std::move(toks);
    tok_to_id_.clear();
    for (std::size_t i = 0; i < id_to_tok_.size(); ++i) tok_to_id_[id_to_tok_[i]] = static_cast<int>(i);
  }

 private:
  std::vector<std::string> id_to_tok_;
  std::unordered_map<std::string, int> tok_to_id_;
};

inline Vocab build_vocab(const std::string& text, VocabMode mode, std::size_t max_size = 0) {
  if (text.empty()) throw DataError("build_vocab: empty text");
  std::unordered_map<std::string, long> freq;
  if (mode == VocabMode::Char) {
    for (char c : text) freq[std::string(1, c)] += 1;
  } else {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      std::istringstream ws(line);
      std::string tok;
      while (ws >> tok) freq[tok] += 1;
    }
  }
  std::vector<std::pair<std::string, long>> items(freq.begin(), freq.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> toks = {"<unk>", "<eos>"};
  for (const auto& [tok, n] : items) {
    if (max_size && toks.size() >= max_size) break;
    if (tok == "<unk>" || tok == "<eos>") continue;
    toks.push_back(tok);
  }
  Vocab v;
  v.mode = mode;
  v.set_tokens(std::move(toks));
  return v;
}

inline std::vector<std::int32_t> tokenize(const std::string& text, const Vocab& vocab) {
  std::vector<std::int32_t> ids;
  if (vocab.mode == VocabMode::Char) {
    ids.reserve(text.size());
    for (char c : text) ids.push_back(vocab.lookup(std::string(1, c)));
  } else {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      std::istringstream ws(line);
      std::string tok;
      while (ws >> tok) ids.push_back(vocab.lookup(tok));
      ids.push_back(vocab.eos_id());
    }
  }
  return ids;
}

inline std::string detokenize(const std::vector<std::int32_t>& ids, const Vocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string& tok = vocab.token(static_cast<std::size_t>(ids[i]));
    if (vocab.mode == VocabMode::Char) {
      out += tok;
    } else {
      if (ids[i] == vocab.eos_id()) {
        out += '\n';
      } else {
        if (!out.empty() && out.back() != '\n') out += ' ';
        out += tok;
      }
    }
  }
  return out;
}

/// Vocab export, one token per line, line number = id. Control characters in
/// char-mode tokens are escaped so the file stays line-oriented.
inline std::string escape_token(const std::string& tok) {
  std::string out;
  for (char c : tok) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

inline void save_vocab(const Vocab& vocab, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("save_vocab: cannot open " + path);
  for (std::size_t i = 0; i < vocab.size(); ++i) f << escape_token(vocab.token(i)) << '\n';
}

/// Contiguous-lane LM batching: the corpus is split into B contiguous lanes;
/// consecutive windows of a lane are consecutive in the corpus and targets
/// are inputs shifted by one position within each lane.
class BatchStream {
 public:
  BatchStream(std::vector<std::int32_t> ids, std::size_t batch, std::size_t trunc)
      : ids_(std::move(ids)), B_(batch), T_(trunc) {
    if (B_ == 0 || T_ == 0) throw ParameterError("batch and truncation length must be positive");
    lane_len_ = ids_.size() / B_;
    if (lane_len_ < 2) throw DataError("corpus too small for batch size " + std::to_string(B_));
  }

  std::size_t batch() const { return B_; }
  std::size_t trunc() const { return T_; }
  std::size_t lane_length() const { return lane_len_; }
  /// Tokens not covered by any lane (the remainder tail).
  std::size_t dropped_tokens() const { return ids_.size() - B_ * lane_len_; }
  /// Sum of window lengths over one epoch.
  std::size_t tokens_per_epoch() const { return lane_len_ - 1; }

  void reset() { cursor_ = 0; }

  /// Fills one window; returns false at end of epoch. The final window may be
  /// shorter than T.
  bool next_window(TokenBatch& inputs, std::vector<std::int32_t>& targets) {
    const std::size_t remaining = lane_len_ - 1 - cursor_;
    if (remaining == 0) return false;
    const std::size_t n = std::min(T_, remaining);
    inputs.T = n;
    inputs.B = B_;
    inputs.ids.assign(n * B_, 0);
    targets.assign(n * B_, 0);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t b = 0; b < B_; ++b) {
        inputs.ids[t * B_ + b] = ids_[b * lane_len_ + cursor_ + t];
        targets[t * B_ + b] = ids_[b * lane_len_ + cursor_ + t + 1];
      }
    cursor_ += n;
    return true;
  }

 private:
  std::vector<std::int32_t> ids_;
  std::size_t B_, T_, lane_len_, cursor_ = 0;
};

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open corpus file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace altsg

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "decatt/common.hpp"
#include "decatt/mat.hpp"

namespace decatt {

using TokenSeq = std::vector<std::string>;

inline constexpr std::size_t kMaxSeqLen = 64;

// Whitespace-split tokens, optionally ASCII-lowercased, truncated to
// max_seq_len. Throws EmptySequenceError if nothing survives.
TokenSeq tokenize(std::string_view text, bool lowercase = true,
                  std::size_t max_seq_len = kMaxSeqLen);

// "^" + token + "$" with literal '^'/'$' escaped as "\^"/"\$".
std::string mark_token(std::string_view token);

// All length-n code-point windows over the marked token, or the whole marked
// token when it is shorter than n.
std::vector<std::string> char_ngrams(std::string_view token, int n);

// Keys used to encode a token: char_ngrams for n >= 1, the whole marked token
// for the word-level order n == 0.
std::vector<std::string> token_keys(std::string_view token, int n);

class Vocab {
 public:
  Vocab(int n, int min_count) : n_(n), min_count_(min_count) {}

  int n() const { return n_; }
  int min_count() const { return min_count_; }
  std::size_t size() const { return keys_.size(); }

  // Dense id of key, or -1 if absent.
  int lookup(std::string_view key) const {
    auto it = index_.find(std::string(key));
    return it == index_.end() ? -1 : it->second;
  }
  const std::string& key_of(int id) const { return keys_.at(id); }
  std::int64_t count_of(int id) const { return counts_.at(id); }

  // Appends a key with the next id. Exposed for loaders; build_vocab is the
  // normal construction path.
  void add(std::string key, std::int64_t count);

  void save(const std::string& path) const;
  // File format carries no n-gram order; the caller supplies it.
  static Vocab load(const std::string& path, int n);

  // Fingerprint of the canonical "key\tid\tcount" serialization.
  std::uint64_t hash() const;

 private:
  int n_;
  int min_count_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> keys_;
  std::vector<std::int64_t> counts_;
};

// Keys occurring >= min_count times, ids in descending frequency, ties broken
// lexicographically. Throws EmptyCorpusError on an empty corpus.
Vocab build_vocab(const std::vector<TokenSeq>& corpus, int n, int min_count);

// In-vocab key ids per token, sorted ascending so summation order is fixed.
std::vector<std::vector<int>> lookup_ids(const TokenSeq& seq, const Vocab& vocab);

// Row i = sum of table rows listed in ids[i]; empty list -> zero row.
template <typename T>
Mat<T> sum_rows(const std::vector<std::vector<int>>& ids, const Mat<T>& table);

// Per-token vectors as rows: each token is the sum of the embedding rows of
// its in-vocab keys; unknown keys are dropped.
template <typename T>
Mat<T> encode_sequence(const TokenSeq& seq, const Vocab& vocab,
                       const Mat<T>& table) {
  if (table.rows() != static_cast<Index>(vocab.size())) {
    throw ShapeError("embedding table has " + std::to_string(table.rows()) +
                     " rows for vocab of size " + std::to_string(vocab.size()));
  }
  return sum_rows<T>(lookup_ids(seq, vocab), table);
}

// Text embedding file: one "word v1 v2 ... vd" per line, space-separated.
// Produces a word-level vocab (n = 0, keys are marked tokens) and its table.
struct LoadedEmbeddings {
  Vocab vocab;
  Mat<float> table;
};
LoadedEmbeddings load_embeddings_text(const std::string& path);

// Whole-file fingerprint for run manifests.
std::uint64_t hash_file(const std::string& path);

}  // namespace decatt

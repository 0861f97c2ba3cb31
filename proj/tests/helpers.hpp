#pragma once

// Shared scaffolding for the test binaries: tiny word-level vocabularies,
// random sequences, and temp-file plumbing.

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "decatt/corpus.hpp"
#include "decatt/model.hpp"
#include "decatt/text.hpp"

namespace testutil {

// Word-level vocabulary over tokens "w0" .. "w<k-1>".
inline decatt::Vocab word_vocab(std::size_t k) {
  decatt::Vocab v(0, 1);
  for (std::size_t i = 0; i < k; ++i) {
    v.add(decatt::mark_token("w" + std::to_string(i)),
          static_cast<std::int64_t>(k - i));
  }
  return v;
}

inline decatt::TokenSeq random_seq(decatt::Rng& rng, std::size_t vocab_size,
                                   std::size_t min_len, std::size_t max_len) {
  const std::size_t len = min_len + rng.below(max_len - min_len + 1);
  decatt::TokenSeq seq;
  for (std::size_t i = 0; i < len; ++i) {
    seq.push_back("w" + std::to_string(rng.below(vocab_size)));
  }
  return seq;
}

// Token rows as plain vectors: each row is the sum of the embedding rows of
// the token's in-vocab keys (all in-vocab for word_vocab tokens).
inline std::vector<std::vector<double>> encode_rows(
    const decatt::TokenSeq& seq, const decatt::Vocab& vocab,
    const decatt::Mat<double>& table) {
  std::vector<std::vector<double>> rows;
  for (const auto& token : seq) {
    std::vector<double> row(static_cast<std::size_t>(table.cols()), 0.0);
    for (const auto& key : decatt::token_keys(token, vocab.n())) {
      const int id = vocab.lookup(key);
      if (id < 0) continue;
      for (decatt::Index j = 0; j < table.cols(); ++j) {
        row[static_cast<std::size_t>(j)] += table(id, j);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Unique scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("decatt-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace testutil

#include "decatt/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace decatt {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

// Byte offsets of code-point starts, plus the end offset.
std::vector<std::size_t> codepoint_starts(std::string_view s) {
  std::vector<std::size_t> starts;
  for (std::size_t pos = 0; pos < s.size(); pos += utf8_advance(s, pos)) {
    starts.push_back(pos);
  }
  starts.push_back(s.size());
  return starts;
}

}  // namespace

TokenSeq tokenize(std::string_view text, bool lowercase,
                  std::size_t max_seq_len) {
  TokenSeq tokens;
  std::size_t i = 0;
  while (i < text.size() && tokens.size() < max_seq_len) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) {
      std::string tok(text.substr(start, i - start));
      if (lowercase) {
        for (char& c : tok) {
          c = static_cast<char>(
              std::tolower(static_cast<unsigned char>(c)));
        }
      }
      tokens.push_back(std::move(tok));
    }
  }
  if (tokens.empty()) {
    throw EmptySequenceError("no tokens in input text");
  }
  return tokens;
}

std::string mark_token(std::string_view token) {
  std::string out;
  out.reserve(token.size() + 2);
  out.push_back('^');
  for (char c : token) {
    if (c == '^' || c == '$') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('$');
  return out;
}

std::vector<std::string> char_ngrams(std::string_view token, int n) {
  if (token.empty()) throw EmptySequenceError("char_ngrams on empty token");
  if (n < 1) throw ConfigError("n-gram order must be >= 1");
  const std::string marked = mark_token(token);
  const auto starts = codepoint_starts(marked);
  const std::size_t len = starts.size() - 1;  // code points
  std::vector<std::string> grams;
  if (len < static_cast<std::size_t>(n)) {
    grams.push_back(marked);  // backoff: the whole marked token
    return grams;
  }
  for (std::size_t i = 0; i + n <= len; ++i) {
    grams.push_back(marked.substr(starts[i], starts[i + n] - starts[i]));
  }
  return grams;
}

std::vector<std::string> token_keys(std::string_view token, int n) {
  if (n == 0) return {mark_token(token)};
  return char_ngrams(token, n);
}

void Vocab::add(std::string key, std::int64_t count) {
  auto [it, inserted] = index_.emplace(key, static_cast<int>(keys_.size()));
  if (!inserted) {
    throw FormatError("duplicate vocab key: " + key);
  }
  keys_.push_back(std::move(key));
  counts_.push_back(count);
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocab file: " + path);
  for (std::size_t id = 0; id < keys_.size(); ++id) {
    out << keys_[id] << '\t' << id << '\t' << counts_[id] << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Vocab Vocab::load(const std::string& path, int n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vocab file: " + path);
  Vocab vocab(n, 0);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos
                               ? std::string::npos
                               : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": expected ngram<TAB>id<TAB>count");
    }
    std::string key = line.substr(0, t1);
    long id = -1;
    long long count = 0;
    try {
      id = std::stol(line.substr(t1 + 1, t2 - t1 - 1));
      count = std::stoll(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": bad id or count");
    }
    if (id != static_cast<long>(vocab.size())) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": ids must be contiguous from 0");
    }
    vocab.add(std::move(key), count);
  }
  if (vocab.size() == 0) throw FormatError("empty vocab file: " + path);
  return vocab;
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t id = 0; id < keys_.size(); ++id) {
    std::string row = keys_[id] + '\t' + std::to_string(id) + '\t' +
                      std::to_string(counts_[id]) + '\n';
    h = fnv1a64(row, h);
  }
  return h;
}

Vocab build_vocab(const std::vector<TokenSeq>& corpus, int n, int min_count) {
  std::unordered_map<std::string, std::int64_t> freq;
  for (const TokenSeq& seq : corpus) {
    for (const std::string& tok : seq) {
      for (std::string& key : token_keys(tok, n)) {
        freq[std::move(key)] += 1;
      }
    }
  }
  if (freq.empty()) throw EmptyCorpusError("no tokens in vocab corpus");

  std::vector<std::pair<std::string, std::int64_t>> entries;
  entries.reserve(freq.size());
  for (auto& [key, count] : freq) {
    if (count >= min_count) entries.emplace_back(key, count);
  }
  if (entries.empty()) {
    throw EmptyCorpusError("min_count " + std::to_string(min_count) +
                           " removed every key");
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab vocab(n, min_count);
  for (auto& [key, count] : entries) {
    vocab.add(std::move(key), count);
  }
  return vocab;
}

std::vector<std::vector<int>> lookup_ids(const TokenSeq& seq,
                                         const Vocab& vocab) {
  std::vector<std::vector<int>> ids;
  ids.reserve(seq.size());
  for (const std::string& tok : seq) {
    std::vector<int> row;
    for (const std::string& key : token_keys(tok, vocab.n())) {
      const int id = vocab.lookup(key);
      if (id >= 0) row.push_back(id);
    }
    std::sort(row.begin(), row.end());
    ids.push_back(std::move(row));
  }
  return ids;
}

template <typename T>
Mat<T> sum_rows(const std::vector<std::vector<int>>& ids, const Mat<T>& table) {
  Mat<T> out = Mat<T>::Zero(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (int id : ids[i]) {
      out.row(static_cast<Index>(i)) += table.row(id);
    }
  }
  return out;
}

template Mat<float> sum_rows<float>(const std::vector<std::vector<int>>&,
                                    const Mat<float>&);
template Mat<double> sum_rows<double>(const std::vector<std::vector<int>>&,
                                      const Mat<double>&);

LoadedEmbeddings load_embeddings_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read embedding file: " + path);

  Vocab vocab(0, 0);
  std::vector<std::vector<float>> rows;
  Index dim = -1;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    std::vector<float> values;
    float v;
    while (ss >> v) values.push_back(v);
    if (values.empty()) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": no embedding values");
    }
    if (dim < 0) {
      dim = static_cast<Index>(values.size());
    } else if (static_cast<Index>(values.size()) != dim) {
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": expected " + std::to_string(dim) + " values, got " +
                        std::to_string(values.size()));
    }
    vocab.add(mark_token(word), 1);
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw FormatError("empty embedding file: " + path);

  Mat<float> table(static_cast<Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Index j = 0; j < dim; ++j) {
      table(static_cast<Index>(i), j) = rows[i][j];
    }
  }
  return LoadedEmbeddings{std::move(vocab), std::move(table)};
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())),
                h);
  }
  return h;
}

}  // namespace decatt

#include "decatt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

namespace decatt {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  if (!fields.empty() && !fields.back().empty() &&
      fields.back().back() == '\r') {
    fields.back().pop_back();
  }
  return fields;
}

std::string join_tokens(const TokenSeq& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out.push_back(' ');
    out += seq[i];
  }
  return out;
}

std::string pair_key(const TokenSeq& a, const TokenSeq& b) {
  return join_tokens(a) + '\t' + join_tokens(b);
}

std::size_t shared_word_count(const TokenSeq& a, const TokenSeq& b) {
  std::set<std::string> sa(a.begin(), a.end());
  std::set<std::string> sb(b.begin(), b.end());
  std::size_t shared = 0;
  for (const auto& w : sa) shared += sb.count(w);
  return shared;
}

}  // namespace

LoadResult load_pairs_tsv(const std::string& path, TsvFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read pairs file: " + path);

  LoadResult result;
  std::string line;
  bool header_pending = format == TsvFormat::kQuora;
  while (std::getline(in, line)) {
    if (header_pending) {
      header_pending = false;
      continue;
    }
    if (line.empty() || line == "\r") continue;
    const auto fields = split_tabs(line);
    const std::size_t want = format == TsvFormat::kQuora ? 6 : 3;
    if (fields.size() != want) {
      ++result.skipped;
      continue;
    }
    const std::string& f1 = format == TsvFormat::kQuora ? fields[3] : fields[0];
    const std::string& f2 = format == TsvFormat::kQuora ? fields[4] : fields[1];
    const std::string& fl = format == TsvFormat::kQuora ? fields[5] : fields[2];
    if (fl != "0" && fl != "1") {
      ++result.skipped;
      continue;
    }
    try {
      LabeledPair pair;
      pair.q1 = tokenize(f1);
      pair.q2 = tokenize(f2);
      pair.label = fl == "1" ? 1 : 0;
      result.pairs.push_back(std::move(pair));
    } catch (const EmptySequenceError&) {
      ++result.skipped;
    }
  }
  const std::size_t total = result.pairs.size() + result.skipped;
  if (total > 0 && result.skipped * 2 > total) {
    throw FormatError(path + ": " + std::to_string(result.skipped) + " of " +
                      std::to_string(total) + " lines malformed");
  }
  return result;
}

void save_pairs_tsv(const std::string& path,
                    const std::vector<LabeledPair>& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write pairs file: " + path);
  for (const auto& p : pairs) {
    out << join_tokens(p.q1) << '\t' << join_tokens(p.q2) << '\t' << p.label
        << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<LabeledPair> duplicate_reversed(
    const std::vector<LabeledPair>& pairs) {
  std::vector<LabeledPair> out;
  out.reserve(pairs.size() * 2);
  out = pairs;
  for (const auto& p : pairs) {
    out.push_back(LabeledPair{p.q2, p.q1, p.label});
  }
  return out;
}

std::vector<TokenSeq> question_pool(const std::vector<LabeledPair>& pairs) {
  std::vector<TokenSeq> pool;
  pool.reserve(pairs.size() * 2);
  for (const auto& p : pairs) {
    pool.push_back(p.q1);
    pool.push_back(p.q2);
  }
  return pool;
}

std::vector<LabeledPair> sample_negatives(
    const std::vector<TokenSeq>& pool, std::size_t count,
    std::uint64_t rng_seed, const std::vector<LabeledPair>& positives,
    NegativeStats* stats) {
  if (pool.size() < 2) {
    throw PoolError("negative sampling needs at least 2 questions, got " +
                    std::to_string(pool.size()));
  }
  std::unordered_set<std::string> taken;
  for (const auto& p : positives) {
    taken.insert(pair_key(p.q1, p.q2));
    taken.insert(pair_key(p.q2, p.q1));
  }
  std::vector<std::string> vocabulary;
  {
    std::set<std::string> words;
    for (const auto& q : pool) words.insert(q.begin(), q.end());
    vocabulary.assign(words.begin(), words.end());
  }

  Rng rng(rng_seed);
  std::vector<LabeledPair> out;
  out.reserve(count);

  auto emit = [&](TokenSeq q1, TokenSeq q2) -> bool {
    if (taken.count(pair_key(q1, q2))) return false;
    out.push_back(LabeledPair{std::move(q1), std::move(q2), 0});
    return true;
  };

  for (std::size_t i = 0; i < count; ++i) {
    const int type = static_cast<int>(i % 3);
    bool done = false;
    for (int attempt = 0; attempt < 1000 && !done; ++attempt) {
      if (type == 0) {
        const TokenSeq& a = pool[rng.below(pool.size())];
        const TokenSeq& b = pool[rng.below(pool.size())];
        if (a == b) continue;
        done = emit(a, b);
      } else if (type == 1) {
        const TokenSeq& a = pool[rng.below(pool.size())];
        bool relaxed = false;
        const TokenSeq* match = nullptr;
        for (int tries = 0; tries < 200 && match == nullptr; ++tries) {
          const TokenSeq& b = pool[rng.below(pool.size())];
          if (a == b) continue;
          const std::size_t shared = shared_word_count(a, b);
          if (shared == 1) {
            match = &b;
          } else if (tries >= 100 && shared >= 1) {
            match = &b;
            relaxed = true;
          }
        }
        if (match == nullptr) continue;
        done = emit(a, *match);
        if (done && relaxed && stats) ++stats->type2_relaxed;
      } else {
        const TokenSeq& src = pool[rng.below(pool.size())];
        TokenSeq copy = src;
        const std::size_t pos = rng.below(copy.size());
        std::string replacement = vocabulary[rng.below(vocabulary.size())];
        if (replacement == copy[pos]) continue;
        copy[pos] = std::move(replacement);
        done = emit(src, copy);
      }
    }
    if (!done) {
      throw PoolError("could not draw a type-" + std::to_string(type + 1) +
                      " negative from this pool");
    }
    if (stats) ++stats->type_counts[static_cast<std::size_t>(type)];
  }
  return out;
}

namespace {

struct SynthLexicon {
  std::vector<std::string> starters;
  std::vector<std::string> content;
  // Index into content of each word's paraphrase partner, -1 if none.
  std::vector<int> partner;
};

// Depends on vocab_size only, so every corpus over the same vocabulary size
// shares words and synonym structure regardless of sampling seed.
SynthLexicon make_lexicon(std::size_t vocab_size) {
  static const char* kConsonants = "bdfgklmnprstvz";
  static const char* kVowels = "aeiou";
  static const std::vector<std::string> kSuffixes = {"s", "n", "ri"};

  SynthLexicon lex;
  lex.starters = {"what", "how",   "why", "when", "where",
                  "which", "who",  "is",  "can",  "does"};

  Rng rng(0xC0FFEE5EEDULL + vocab_size);
  std::unordered_set<std::string> seen(lex.starters.begin(),
                                       lex.starters.end());
  auto fresh_word = [&]() {
    while (true) {
      std::string w;
      const int syllables = 2 + static_cast<int>(rng.below(2));
      for (int s = 0; s < syllables; ++s) {
        w.push_back(kConsonants[rng.below(14)]);
        w.push_back(kVowels[rng.below(5)]);
      }
      if (seen.insert(w).second) return w;
    }
  };

  // Roughly a third of the words come in (base, inflected-variant) pairs
  // that the generator treats as interchangeable.
  const std::size_t n_pairs = vocab_size / 6;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    std::string base = fresh_word();
    std::string variant = base + kSuffixes[rng.below(kSuffixes.size())];
    if (!seen.insert(variant).second) {
      variant = base + "ne";
      seen.insert(variant);
    }
    const int bi = static_cast<int>(lex.content.size());
    lex.content.push_back(std::move(base));
    lex.content.push_back(std::move(variant));
    lex.partner.push_back(bi + 1);
    lex.partner.push_back(bi);
  }
  while (lex.content.size() < vocab_size) {
    lex.content.push_back(fresh_word());
    lex.partner.push_back(-1);
  }
  return lex;
}

TokenSeq make_question(const SynthLexicon& lex, Rng& rng,
                       std::vector<int>* content_ids) {
  TokenSeq q;
  q.push_back(lex.starters[rng.below(lex.starters.size())]);
  const std::size_t len = 4 + rng.below(4);
  for (std::size_t i = 0; i < len; ++i) {
    const int id = static_cast<int>(rng.below(lex.content.size()));
    q.push_back(lex.content[id]);
    if (content_ids) content_ids->push_back(id);
  }
  return q;
}

// A paraphrase of q: partner substitutions plus maybe one adjacent swap of
// content words; guaranteed to differ from q.
TokenSeq make_paraphrase(const SynthLexicon& lex, const TokenSeq& q,
                         const std::vector<int>& content_ids, Rng& rng) {
  TokenSeq out = q;
  bool changed = false;
  for (std::size_t i = 0; i < content_ids.size(); ++i) {
    const int partner = lex.partner[content_ids[i]];
    if (partner >= 0 && rng.uniform() < 0.35) {
      out[i + 1] = lex.content[partner];
      changed = true;
    }
  }
  const std::size_t n_content = content_ids.size();
  if ((rng.uniform() < 0.5 || !changed) && n_content >= 2) {
    const std::size_t at = 1 + rng.below(n_content - 1);
    if (out[at] != out[at + 1]) {
      std::swap(out[at], out[at + 1]);
      changed = true;
    }
  }
  if (!changed) {
    // Degenerate draw (all swaps blocked, no partners hit): substitute the
    // first partnered word, or repeat a content word as a last resort.
    for (std::size_t i = 0; i < content_ids.size() && !changed; ++i) {
      const int partner = lex.partner[content_ids[i]];
      if (partner >= 0) {
        out[i + 1] = lex.content[partner];
        changed = true;
      }
    }
    if (!changed) out.push_back(out.back());
  }
  return out;
}

}  // namespace

CorpusSplit synth_corpus(std::size_t n_pairs, std::size_t vocab_size,
                         std::uint64_t rng_seed) {
  if (n_pairs < 10) throw ConfigError("synth corpus needs at least 10 pairs");
  if (vocab_size < 20) throw ConfigError("synth vocab too small");

  const SynthLexicon lex = make_lexicon(vocab_size);
  Rng rng(rng_seed);

  const std::size_t n_bases = std::max<std::size_t>(40, n_pairs / 3);
  std::vector<TokenSeq> bases;
  std::vector<std::vector<int>> base_content;
  bases.reserve(n_bases);
  for (std::size_t i = 0; i < n_bases; ++i) {
    std::vector<int> ids;
    bases.push_back(make_question(lex, rng, &ids));
    base_content.push_back(std::move(ids));
  }

  const std::size_t n_pos = (n_pairs * 36 + 50) / 100;
  std::vector<LabeledPair> positives;
  positives.reserve(n_pos);
  for (std::size_t i = 0; i < n_pos; ++i) {
    const std::size_t at = rng.below(bases.size());
    TokenSeq para = make_paraphrase(lex, bases[at], base_content[at], rng);
    positives.push_back(LabeledPair{bases[at], std::move(para), 1});
  }

  std::vector<LabeledPair> negatives = sample_negatives(
      bases, n_pairs - n_pos, rng.next_u64(), positives, nullptr);

  std::vector<LabeledPair> all = std::move(positives);
  all.insert(all.end(), std::make_move_iterator(negatives.begin()),
             std::make_move_iterator(negatives.end()));
  rng.shuffle(all);

  CorpusSplit split;
  split.provenance = "synth";
  const std::size_t n_train = n_pairs * 5 / 6;
  split.train.assign(all.begin(), all.begin() + n_train);
  split.dev.assign(all.begin() + n_train, all.end());
  return split;
}

}  // namespace decatt

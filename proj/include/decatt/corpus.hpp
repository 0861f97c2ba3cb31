#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "decatt/text.hpp"

namespace decatt {

struct LabeledPair {
  TokenSeq q1;
  TokenSeq q2;
  int label = 0;  // 1 = paraphrase
};

struct CorpusSplit {
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> dev;
  std::vector<LabeledPair> test;
  std::string provenance;
};

enum class TsvFormat { kQuora, kGeneric };

struct LoadResult {
  std::vector<LabeledPair> pairs;
  std::size_t skipped = 0;  // malformed lines
};

// Quora format: header line, then id/qid1/qid2/question1/question2/is_duplicate.
// Generic format: question1<TAB>question2<TAB>label, no header. Malformed
// lines are skipped and counted; more than half malformed is an error.
LoadResult load_pairs_tsv(const std::string& path, TsvFormat format);

// Writes the generic 3-column format.
void save_pairs_tsv(const std::string& path,
                    const std::vector<LabeledPair>& pairs);

// Input followed by every pair with the questions swapped, labels kept.
std::vector<LabeledPair> duplicate_reversed(
    const std::vector<LabeledPair>& pairs);

struct NegativeStats {
  std::size_t type2_relaxed = 0;  // pairs that fell back to >=1 shared word
  std::array<std::size_t, 3> type_counts = {0, 0, 0};
};

// `count` label-0 pairs over the question pool, the three construction types
// in as-equal-as-possible proportions:
//   1. two random distinct questions,
//   2. two questions sharing exactly one word (>=1 after 100 rejections),
//   3. a question next to a copy with one random token substituted.
// Never emits a pair present in `positives` (either order).
std::vector<LabeledPair> sample_negatives(
    const std::vector<TokenSeq>& pool, std::size_t count,
    std::uint64_t rng_seed,
    const std::vector<LabeledPair>& positives = {},
    NegativeStats* stats = nullptr);

// Deterministic synthetic paraphrase corpus: template questions over a
// generated lexicon, positives by synonym substitution and adjacent swaps,
// negatives via sample_negatives, 36/64 label balance, split 5:1 train/dev.
// The lexicon depends only on vocab_size, so corpora drawn with different
// seeds share their vocabulary.
CorpusSplit synth_corpus(std::size_t n_pairs, std::size_t vocab_size,
                         std::uint64_t rng_seed);

// All token sequences of a pair list, q1 then q2 per pair.
std::vector<TokenSeq> question_pool(const std::vector<LabeledPair>& pairs);

}  // namespace decatt

#pragma once

#include <string>
#include <vector>

#include "decatt/train.hpp"

namespace decatt {

struct PairRecord {
  double score = 0.0;
  int gold = 0;
  int predicted = 0;
};

struct EvalReport {
  double accuracy = 0.0;
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  double threshold = 0.0;
  std::vector<PairRecord> records;
};

// Worker count for read-only scoring: DECATT_THREADS caps it, deterministic
// mode forces one. Scoring is index-addressed, so results are identical at
// any count.
int worker_count(std::size_t jobs, bool deterministic);

// Thresholds already-computed scores against gold labels.
EvalReport report_from_scores(const std::vector<double>& scores,
                              const std::vector<int>& golds, double threshold);

// Scores every pair in order (no reversal augmentation) with the
// checkpoint's own model and vocab, then thresholds and aggregates.
EvalReport evaluate(const Checkpoint& ckpt,
                    const std::vector<LabeledPair>& pairs, double threshold,
                    int threads = 1);

struct SweepRow {
  double threshold = 0.0;
  double accuracy = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double best_threshold = 0.0;
  double best_accuracy = 0.0;
};

// One scoring pass, one accuracy per grid point; ties prefer the smaller
// threshold.
SweepResult threshold_sweep(const Checkpoint& ckpt,
                            const std::vector<LabeledPair>& pairs,
                            const std::vector<double>& grid, int threads = 1);

// Up to k pairs where any model disagrees with gold or the models disagree
// with each other; one line per model plus the gold label.
std::string error_report(const std::vector<const Checkpoint*>& ckpts,
                         const std::vector<LabeledPair>& pairs, std::size_t k,
                         double threshold = 0.3, int threads = 1);

std::string report_tsv(const EvalReport& report);
std::string report_summary(const EvalReport& report);

}  // namespace decatt

#include "decatt/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace decatt {

int worker_count(std::size_t jobs, bool deterministic) {
  if (deterministic || jobs <= 1) return 1;
  unsigned count = std::thread::hardware_concurrency();
  if (count == 0) count = 1;
  if (const char* env = std::getenv("DECATT_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1) {
      throw ConfigError("DECATT_THREADS must be a positive integer");
    }
    count = std::min<unsigned>(count, static_cast<unsigned>(cap));
  }
  count = std::min<unsigned>(count, 16);
  return static_cast<int>(
      std::min<std::size_t>(count, jobs));
}

namespace {

// Scoring never mutates the model; forward() is non-const only because its
// record keeps pointers for the (unused) backward path.
std::vector<double> score_all(const Checkpoint& ckpt,
                              const std::vector<LabeledPair>& pairs,
                              int threads) {
  auto& model = const_cast<ModelParams<float>&>(ckpt.model);
  std::vector<double> scores(pairs.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < pairs.size(); i += stride) {
      scores[i] =
          score_pair(model, ckpt.vocab, pairs[i].q1, pairs[i].q2, 0.5)
              .p_paraphrase;
    }
  };
  if (threads <= 1) {
    work(0, 1);
    return scores;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mu;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w]() {
      try {
        work(static_cast<std::size_t>(w), static_cast<std::size_t>(threads));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return scores;
}

EvalReport aggregate(const std::vector<double>& scores,
                     const std::vector<LabeledPair>& pairs, double threshold) {
  std::vector<int> golds;
  golds.reserve(pairs.size());
  for (const auto& p : pairs) golds.push_back(p.label);
  return report_from_scores(scores, golds, threshold);
}

}  // namespace

EvalReport report_from_scores(const std::vector<double>& scores,
                              const std::vector<int>& golds,
                              double threshold) {
  if (scores.size() != golds.size()) {
    throw ShapeError("scores and golds differ in length");
  }
  if (scores.empty()) throw EmptyCorpusError("nothing to evaluate");
  EvalReport report;
  report.threshold = threshold;
  report.records.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    PairRecord rec;
    rec.score = scores[i];
    rec.gold = golds[i];
    rec.predicted = classify(scores[i], threshold) ? 1 : 0;
    if (rec.predicted == 1) {
      rec.gold == 1 ? ++report.tp : ++report.fp;
    } else {
      rec.gold == 0 ? ++report.tn : ++report.fn;
    }
    report.records.push_back(rec);
  }
  report.accuracy = static_cast<double>(report.tp + report.tn) /
                    static_cast<double>(scores.size());
  return report;
}

EvalReport evaluate(const Checkpoint& ckpt,
                    const std::vector<LabeledPair>& pairs, double threshold,
                    int threads) {
  if (pairs.empty()) throw EmptyCorpusError("nothing to evaluate");
  return aggregate(score_all(ckpt, pairs, threads), pairs, threshold);
}

SweepResult threshold_sweep(const Checkpoint& ckpt,
                            const std::vector<LabeledPair>& pairs,
                            const std::vector<double>& grid, int threads) {
  if (pairs.empty()) throw EmptyCorpusError("nothing to evaluate");
  if (grid.empty()) throw ConfigError("threshold grid is empty");
  for (double t : grid) {
    if (t < 0.0 || t > 1.0) {
      throw ConfigError("threshold " + std::to_string(t) + " outside [0, 1]");
    }
  }
  const auto scores = score_all(ckpt, pairs, threads);
  SweepResult result;
  result.best_accuracy = -1.0;
  for (double t : grid) {
    const EvalReport rep = aggregate(scores, pairs, t);
    result.rows.push_back(SweepRow{t, rep.accuracy});
    if (rep.accuracy > result.best_accuracy ||
        (rep.accuracy == result.best_accuracy && t < result.best_threshold)) {
      result.best_accuracy = rep.accuracy;
      result.best_threshold = t;
    }
  }
  return result;
}

std::string error_report(const std::vector<const Checkpoint*>& ckpts,
                         const std::vector<LabeledPair>& pairs, std::size_t k,
                         double threshold, int threads) {
  if (k < 1) throw ConfigError("error report needs k >= 1");
  if (ckpts.empty()) throw ConfigError("error report needs a checkpoint");

  std::vector<std::vector<double>> scores;
  scores.reserve(ckpts.size());
  for (const Checkpoint* c : ckpts) {
    scores.push_back(score_all(*c, pairs, threads));
  }

  auto join = [](const TokenSeq& q) {
    std::string s;
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (i) s.push_back(' ');
      s += q[i];
    }
    return s;
  };

  std::ostringstream out;
  std::size_t found = 0, shown = 0;
  std::ostringstream body;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    bool wrong = false;
    bool split_vote = false;
    int first_label = -1;
    for (std::size_t m = 0; m < ckpts.size(); ++m) {
      const int label = classify(scores[m][i], threshold) ? 1 : 0;
      wrong = wrong || label != pairs[i].label;
      if (first_label < 0) {
        first_label = label;
      } else if (label != first_label) {
        split_vote = true;
      }
    }
    if (!wrong && !split_vote) continue;
    ++found;
    if (shown >= k) continue;
    ++shown;
    body << "[" << i << "] gold=" << pairs[i].label
         << (split_vote ? " (models disagree)" : "") << "\n"
         << "  q1: " << join(pairs[i].q1) << "\n"
         << "  q2: " << join(pairs[i].q2) << "\n";
    for (std::size_t m = 0; m < ckpts.size(); ++m) {
      const int label = classify(scores[m][i], threshold) ? 1 : 0;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.4f", scores[m][i]);
      body << "  model-" << (m + 1) << ": " << label << " (p=" << buf << ")\n";
    }
  }
  out << "# " << shown << " of " << found
      << " disagreements (threshold=" << threshold << ")\n"
      << body.str();
  return out.str();
}

std::string report_tsv(const EvalReport& report) {
  std::ostringstream out;
  out << "score\tgold\tpredicted\n";
  for (const auto& rec : report.records) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", rec.score);
    out << buf << '\t' << rec.gold << '\t' << rec.predicted << '\n';
  }
  return out.str();
}

std::string report_summary(const EvalReport& report) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "accuracy %.4f  (tp %zu  tn %zu  fp %zu  fn %zu  threshold "
                "%.3f  pairs %zu)",
                report.accuracy, report.tp, report.tn, report.fp, report.fn,
                report.threshold, report.records.size());
  out << buf << '\n';
  return out.str();
}

}  // namespace decatt

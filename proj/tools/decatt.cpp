// Command-line surface for the paraphrase models: corpus construction,
// vocabulary building, training regimes, evaluation, and prediction.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "decatt/corpus.hpp"
#include "decatt/eval.hpp"
#include "decatt/model.hpp"
#include "decatt/train.hpp"
#include "decatt/version.hpp"

using nlohmann::json;

namespace {

decatt::TsvFormat parse_format(const std::string& f) {
  if (f == "generic") return decatt::TsvFormat::kGeneric;
  if (f == "quora") return decatt::TsvFormat::kQuora;
  throw decatt::ConfigError("unknown format: " + f);
}

std::vector<decatt::Index> parse_widths(const std::string& s) {
  std::vector<decatt::Index> widths;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string part =
        s.substr(start, comma == std::string::npos ? comma : comma - start);
    try {
      widths.push_back(std::stol(part));
    } catch (const std::exception&) {
      throw decatt::ConfigError("bad width list: " + s);
    }
    if (widths.back() < 1) throw decatt::ConfigError("widths must be >= 1");
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (widths.empty()) throw decatt::ConfigError("empty width list");
  return widths;
}

template <typename T>
std::vector<T> parse_number_list(const std::string& s, const char* what) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string part =
        s.substr(start, comma == std::string::npos ? comma : comma - start);
    try {
      if constexpr (std::is_floating_point_v<T>) {
        out.push_back(static_cast<T>(std::stod(part)));
      } else {
        out.push_back(static_cast<T>(std::stoull(part)));
      }
    } catch (const std::exception&) {
      throw decatt::ConfigError(std::string("bad ") + what + " list: " + s);
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) {
    throw decatt::ConfigError(std::string("empty ") + what + " list");
  }
  return out;
}

// CLI11 reads config files only on the root app, so subcommand configs are
// applied by hand: unknown keys are usage errors, command-line flags win.
void apply_config_file(CLI::App* sub) {
  const CLI::Option* copt = sub->get_config_ptr();
  if (copt == nullptr || copt->count() == 0) return;
  const std::string path = copt->as<std::string>();
  std::ifstream in(path);
  if (!in) throw decatt::ConfigError("cannot read config file: " + path);

  auto trim = [](const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;

    const std::string where = path + ":" + std::to_string(lineno);
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw decatt::ConfigError(where + ": expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) throw decatt::ConfigError(where + ": empty key");

    CLI::Option* op = sub->get_option_no_throw("--" + key);
    if (op == nullptr || op == copt) {
      throw decatt::ConfigError(where + ": unknown key '" + key + "'");
    }
    if (op->count() > 0) continue;  // explicit flags beat the file
    try {
      op->add_result(value);
      op->run_callback();
    } catch (const CLI::Error& e) {
      throw decatt::ConfigError(where + ": " + e.what());
    }
  }
}

// Written beside every file-producing run so it can be replayed exactly.
void write_manifest(const std::string& out_path, const std::string& command,
                    const std::vector<std::string>& argv, const json& config,
                    const std::vector<std::string>& inputs) {
  json m = {
      {"command", command},
      {"argv", argv},
      {"build", decatt::kBuildStamp},
      {"config", config},
      {"inputs", json::object()},
  };
  for (const auto& path : inputs) {
    m["inputs"][path] = decatt::to_hex(decatt::hash_file(path));
  }
  const std::string path = out_path + ".manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw decatt::IoError("cannot write manifest: " + path);
  out << m.dump(2) << '\n';
}

struct TrainCli {
  std::string data, dev, test, vocab_path, checkpoint, out;
  std::string format = "generic";
  std::uint64_t seed = 1;
  double lr = 0.1;
  int batch = 64;
  int epochs = 10;
  double dropout = 0.1;
  double threshold = 0.3;
  std::string self_attention;  // "on" | "off" | "" (stage default)
  int ngram = 5;
  int dim = 300;
  int context = 1;
  std::string widths = "400,200";
  std::string arch = "decatt";
  std::string embeddings;  // optional word-embedding text file
  int min_count = 1;
  int eval_every = 0;
  bool sgd = false;
  bool freeze = false;
  bool deterministic = false;
  std::string reverse;  // "on" | "off" | "" (stage default)
  bool quiet = false;
};

void add_common_train_flags(CLI::App* cmd, TrainCli& o) {
  cmd->add_option("--data", o.data, "training pairs TSV")->required();
  cmd->add_option("--dev", o.dev, "development pairs TSV");
  cmd->add_option("--test", o.test, "test pairs TSV (evaluated after training)");
  cmd->add_option("--vocab", o.vocab_path, "vocabulary file (built from --data when absent)");
  cmd->add_option("--out", o.out, "output checkpoint path")->required();
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--lr", o.lr, "learning rate");
  cmd->add_option("--batch", o.batch, "mini-batch size");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--dropout", o.dropout, "dropout rate on hidden activations");
  cmd->add_option("--threshold", o.threshold, "positive-score threshold");
  cmd->add_option("--self-attention", o.self_attention,
                  "intra-sentence attention: on|off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--ngram", o.ngram, "character n-gram order (0 = word level)");
  cmd->add_option("--dim", o.dim, "token vector width");
  cmd->add_option("--context", o.context, "context window radius");
  cmd->add_option("--widths", o.widths, "hidden widths, comma separated");
  cmd->add_option("--arch", o.arch, "model architecture")
      ->check(CLI::IsMember({"decatt", "ffnn"}));
  cmd->add_option("--embeddings", o.embeddings,
                  "word embedding text file (sets --ngram 0)");
  cmd->add_option("--min-count", o.min_count, "vocabulary frequency cutoff");
  cmd->add_option("--eval-every", o.eval_every,
                  "dev-eval period in steps (0 = each epoch)");
  cmd->add_flag("--sgd", o.sgd, "plain SGD instead of the adaptive update");
  cmd->add_option("--reverse-train", o.reverse,
                  "duplicate training pairs in reverse order: on|off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_flag("--deterministic", o.deterministic,
                "single-threaded bitwise-reproducible run");
  cmd->add_flag("--quiet", o.quiet, "suppress progress output");
}

json train_config_json(const TrainCli& o, const decatt::ModelConfig& mcfg,
                       const decatt::TrainConfig& tcfg, bool reverse) {
  return json{{"data", o.data},
              {"dev", o.dev},
              {"test", o.test},
              {"vocab", o.vocab_path},
              {"format", o.format},
              {"arch", mcfg.arch},
              {"dim", mcfg.dim},
              {"context", mcfg.context},
              {"ngram", mcfg.ngram},
              {"self_attention", mcfg.self_attention},
              {"widths", mcfg.widths},
              {"embeddings", o.embeddings},
              {"min_count", o.min_count},
              {"seed", tcfg.seed},
              {"lr", tcfg.lr},
              {"batch", tcfg.batch_size},
              {"epochs", tcfg.epochs},
              {"dropout", tcfg.dropout},
              {"threshold", tcfg.threshold},
              {"eval_every", tcfg.eval_every},
              {"sgd", tcfg.sgd},
              {"freeze_except_embeddings", tcfg.freeze_except_embeddings},
              {"reverse_train", reverse},
              {"deterministic", o.deterministic}};
}

// Shared by the train/pretrain/finetune subcommands; `stage` picks defaults.
int run_train_stage(const std::string& stage, const TrainCli& o,
                    const std::vector<std::string>& argv) {
  using namespace decatt;

  auto loaded = load_pairs_tsv(o.data, parse_format(o.format));
  if (loaded.skipped > 0) {
    std::fprintf(stderr, "note: skipped %zu malformed lines in %s\n",
                 loaded.skipped, o.data.c_str());
  }
  std::vector<LabeledPair> train_pairs = std::move(loaded.pairs);
  if (train_pairs.empty()) throw EmptyCorpusError(o.data + " has no pairs");

  std::vector<LabeledPair> dev_pairs;
  if (!o.dev.empty()) {
    dev_pairs = load_pairs_tsv(o.dev, parse_format(o.format)).pairs;
  }

  const bool reverse = o.reverse.empty() ? stage != "pretrain"
                                         : o.reverse == "on";
  if (reverse) train_pairs = duplicate_reversed(train_pairs);

  TrainConfig tcfg;
  tcfg.stage = stage;
  tcfg.lr = o.lr;
  tcfg.batch_size = o.batch;
  tcfg.dropout = o.dropout;
  tcfg.epochs = o.epochs;
  tcfg.seed = o.seed;
  tcfg.eval_every = o.eval_every;
  tcfg.threshold = o.threshold;
  tcfg.freeze_except_embeddings = o.freeze;
  tcfg.sgd = o.sgd;
  tcfg.quiet = o.quiet;

  Checkpoint ckpt;
  std::vector<std::string> inputs = {o.data};
  if (!o.dev.empty()) inputs.push_back(o.dev);

  decatt::ModelConfig mcfg;
  if (stage == "finetune") {
    if (o.checkpoint.empty()) {
      throw ConfigError("finetune needs --checkpoint");
    }
    Checkpoint start = load_checkpoint(o.checkpoint);
    inputs.push_back(o.checkpoint);
    if (!o.vocab_path.empty()) {
      Vocab external = Vocab::load(o.vocab_path, start.model.config.ngram);
      if (external.hash() != start.vocab_hash) {
        throw VocabError(
            "vocabulary does not match the checkpoint; both stages must use a "
            "vocabulary built on the union of their corpora");
      }
      inputs.push_back(o.vocab_path);
    }
    mcfg = start.model.config;
    ckpt = train(std::move(start.model), std::move(start.vocab), train_pairs,
                 dev_pairs, tcfg);
  } else {
    mcfg.arch = o.arch;
    mcfg.dim = o.dim;
    mcfg.context = o.context;
    mcfg.ngram = o.ngram;
    mcfg.widths = parse_widths(o.widths);
    if (o.arch == "ffnn" && o.widths == "400,200") {
      mcfg.widths = {800, 400, 200};  // baseline default trunk
    }
    const bool sa_default = stage == "pretrain";
    mcfg.self_attention = o.self_attention.empty() ? sa_default
                                                   : o.self_attention == "on";
    if (mcfg.arch == "ffnn") mcfg.self_attention = false;

    Vocab vocab(0, 0);
    std::optional<Mat<float>> preset_embeddings;
    if (!o.embeddings.empty()) {
      auto loaded_emb = load_embeddings_text(o.embeddings);
      vocab = std::move(loaded_emb.vocab);
      preset_embeddings = std::move(loaded_emb.table);
      mcfg.ngram = 0;
      mcfg.dim = static_cast<int>(preset_embeddings->cols());
      inputs.push_back(o.embeddings);
    } else if (!o.vocab_path.empty()) {
      vocab = Vocab::load(o.vocab_path, mcfg.ngram);
      inputs.push_back(o.vocab_path);
    } else {
      vocab = build_vocab(question_pool(train_pairs), mcfg.ngram, o.min_count);
    }

    ModelParams<float> model =
        ModelParams<float>::init(mcfg, vocab.size(), o.seed);
    if (preset_embeddings) {
      model.embeddings->value = *preset_embeddings;
    }
    ckpt = train(std::move(model), std::move(vocab), train_pairs, dev_pairs,
                 tcfg);
  }

  save_checkpoint(o.out, ckpt);
  write_manifest(o.out, stage, argv, train_config_json(o, mcfg, tcfg, reverse),
                 inputs);

  if (!dev_pairs.empty()) {
    std::printf("best dev accuracy %.4f at step %lld\n",
                dev_accuracy(ckpt.model, ckpt.vocab, dev_pairs, o.threshold),
                static_cast<long long>(ckpt.step));
  }
  if (!o.test.empty()) {
    auto test_pairs = load_pairs_tsv(o.test, parse_format(o.format)).pairs;
    const EvalReport rep =
        evaluate(ckpt, test_pairs, o.threshold,
                 worker_count(test_pairs.size(), o.deterministic));
    std::printf("test %s", report_summary(rep).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"character n-gram attention models for question paraphrase "
               "identification"};
  app.require_subcommand(1);
  const std::vector<std::string> argv_copy(argv, argv + argc);

  // ---- build-vocab ----
  auto* cmd_vocab = app.add_subcommand("build-vocab",
                                       "build an n-gram vocabulary from pairs");
  struct {
    std::string data, out, format = "generic";
    int ngram = 5;
    int min_count = 1;
  } vo;
  cmd_vocab->add_option("--data", vo.data, "pairs TSV")->required();
  cmd_vocab->add_option("--out", vo.out, "output vocabulary file")->required();
  cmd_vocab->add_option("--format", vo.format)->check(CLI::IsMember({"generic", "quora"}));
  cmd_vocab->add_option("--ngram", vo.ngram, "n-gram order (0 = word level)");
  cmd_vocab->add_option("--min-count", vo.min_count, "frequency cutoff");

  // ---- sample-negatives ----
  auto* cmd_neg = app.add_subcommand(
      "sample-negatives", "draw artificial negatives from a question pool");
  struct {
    std::string data, positives, out;
    std::size_t count = 0;
    std::uint64_t seed = 1;
  } no;
  cmd_neg->add_option("--data", no.data, "question pool, one per line")->required();
  cmd_neg->add_option("--count", no.count, "number of negatives")->required();
  cmd_neg->add_option("--positives", no.positives,
                      "generic TSV of positives to exclude");
  cmd_neg->add_option("--out", no.out, "output TSV")->required();
  cmd_neg->add_option("--seed", no.seed, "RNG seed");

  // ---- synth ----
  auto* cmd_synth = app.add_subcommand("synth",
                                       "generate a synthetic paraphrase corpus");
  struct {
    std::string out;
    std::size_t pairs = 2400;
    std::size_t vocab = 300;
    std::uint64_t seed = 1;
  } so;
  cmd_synth->add_option("--pairs", so.pairs, "total pairs (split 5:1 train/dev)");
  cmd_synth->add_option("--synth-vocab", so.vocab, "synthetic lexicon size");
  cmd_synth->add_option("--seed", so.seed, "RNG seed");
  cmd_synth->add_option("--out", so.out, "output directory")->required();

  // ---- train / pretrain / finetune ----
  TrainCli tr;
  auto* cmd_train = app.add_subcommand("train", "train a model from scratch");
  add_common_train_flags(cmd_train, tr);
  cmd_train->add_option("--format", tr.format)->check(CLI::IsMember({"generic", "quora"}));

  TrainCli pr;
  pr.batch = 256;
  pr.dropout = 0.0;
  auto* cmd_pretrain = app.add_subcommand(
      "pretrain", "train on a noisy automatically labeled corpus");
  add_common_train_flags(cmd_pretrain, pr);
  cmd_pretrain->add_option("--format", pr.format)->check(CLI::IsMember({"generic", "quora"}));
  cmd_pretrain->add_flag("--freeze-except-embeddings", pr.freeze,
                         "update only the embedding table");

  TrainCli fi;
  auto* cmd_finetune = app.add_subcommand(
      "finetune", "continue training a pretrained checkpoint on labeled pairs");
  add_common_train_flags(cmd_finetune, fi);
  cmd_finetune->add_option("--format", fi.format)->check(CLI::IsMember({"generic", "quora"}));
  cmd_finetune->add_option("--checkpoint", fi.checkpoint,
                           "pretrained checkpoint to start from")
      ->required();

  // ---- eval ----
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on pairs");
  struct {
    std::string checkpoint, data, vocab, out, format = "generic";
    double threshold = 0.3;
    bool deterministic = false;
  } eo;
  cmd_eval->add_option("--checkpoint", eo.checkpoint)->required();
  cmd_eval->add_option("--data", eo.data, "pairs TSV")->required();
  cmd_eval->add_option("--vocab", eo.vocab, "vocabulary file to cross-check");
  cmd_eval->add_option("--out", eo.out, "write per-pair TSV here");
  cmd_eval->add_option("--format", eo.format)->check(CLI::IsMember({"generic", "quora"}));
  cmd_eval->add_option("--threshold", eo.threshold);
  cmd_eval->add_flag("--deterministic", eo.deterministic);

  // ---- sweep ----
  auto* cmd_sweep = app.add_subcommand("sweep", "accuracy across thresholds");
  struct {
    std::string checkpoint, data, out, format = "generic";
    std::string grid =
        "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,"
        "0.8,0.85,0.9,0.95";
    bool deterministic = false;
  } wo;
  cmd_sweep->add_option("--checkpoint", wo.checkpoint)->required();
  cmd_sweep->add_option("--data", wo.data)->required();
  cmd_sweep->add_option("--grid", wo.grid, "comma-separated thresholds");
  cmd_sweep->add_option("--out", wo.out, "write threshold/accuracy TSV here");
  cmd_sweep->add_option("--format", wo.format)->check(CLI::IsMember({"generic", "quora"}));
  cmd_sweep->add_flag("--deterministic", wo.deterministic);

  // ---- curve ----
  auto* cmd_curve = app.add_subcommand(
      "curve", "dev accuracy as a function of labeled training size");
  TrainCli cu;
  cu.epochs = 5;
  add_common_train_flags(cmd_curve, cu);
  cmd_curve->add_option("--format", cu.format)->check(CLI::IsMember({"generic", "quora"}));
  std::string curve_sizes = "500,2000,8000";
  cmd_curve->add_option("--sizes", curve_sizes, "ascending subsample sizes");
  cmd_curve->add_option("--checkpoint", cu.checkpoint,
                        "pretrained checkpoint (scratch runs when absent)");

  // ---- report ----
  auto* cmd_report = app.add_subcommand(
      "report", "qualitative wins and losses of one or more checkpoints");
  struct {
    std::vector<std::string> checkpoints;
    std::string data, out, format = "generic";
    std::size_t k = 20;
    double threshold = 0.3;
    bool deterministic = false;
  } ro;
  cmd_report->add_option("--checkpoint", ro.checkpoints,
                         "checkpoint (repeat for several models)")
      ->required();
  cmd_report->add_option("--data", ro.data)->required();
  cmd_report->add_option("--k", ro.k, "max pairs to show");
  cmd_report->add_option("--threshold", ro.threshold);
  cmd_report->add_option("--out", ro.out, "write the report here");
  cmd_report->add_option("--format", ro.format)->check(CLI::IsMember({"generic", "quora"}));
  cmd_report->add_flag("--deterministic", ro.deterministic);

  // ---- predict ----
  auto* cmd_predict = app.add_subcommand(
      "predict", "read q1<TAB>q2 lines from stdin, write score<TAB>label");
  struct {
    std::string checkpoint;
    double threshold = 0.3;
  } po;
  cmd_predict->add_option("--checkpoint", po.checkpoint)->required();
  cmd_predict->add_option("--threshold", po.threshold);

  for (CLI::App* sub :
       {cmd_vocab, cmd_neg, cmd_synth, cmd_train, cmd_pretrain, cmd_finetune,
        cmd_eval, cmd_sweep, cmd_curve, cmd_report, cmd_predict}) {
    sub->set_config("--config", "", "line-based key = value config file");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // any usage problem is exit 1
  }

  try {
    using namespace decatt;

    for (CLI::App* sub : app.get_subcommands()) apply_config_file(sub);

    if (cmd_vocab->parsed()) {
      auto loaded = load_pairs_tsv(vo.data, parse_format(vo.format));
      Vocab vocab =
          build_vocab(question_pool(loaded.pairs), vo.ngram, vo.min_count);
      vocab.save(vo.out);
      write_manifest(vo.out, "build-vocab", argv_copy,
                     json{{"data", vo.data},
                          {"format", vo.format},
                          {"ngram", vo.ngram},
                          {"min_count", vo.min_count}},
                     {vo.data});
      std::printf("%zu keys (hash %s)\n", vocab.size(),
                  to_hex(vocab.hash()).c_str());
      return 0;
    }

    if (cmd_neg->parsed()) {
      std::ifstream in(no.data, std::ios::binary);
      if (!in) throw IoError("cannot read question pool: " + no.data);
      std::vector<TokenSeq> pool;
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        pool.push_back(tokenize(line));
      }
      std::vector<LabeledPair> positives;
      if (!no.positives.empty()) {
        positives =
            load_pairs_tsv(no.positives, TsvFormat::kGeneric).pairs;
      }
      NegativeStats stats;
      auto negatives =
          sample_negatives(pool, no.count, no.seed, positives, &stats);
      save_pairs_tsv(no.out, negatives);
      std::vector<std::string> inputs = {no.data};
      if (!no.positives.empty()) inputs.push_back(no.positives);
      write_manifest(no.out, "sample-negatives", argv_copy,
                     json{{"data", no.data},
                          {"count", no.count},
                          {"seed", no.seed},
                          {"positives", no.positives}},
                     inputs);
      std::printf("%zu negatives (%zu relaxed to >=1 shared word)\n",
                  negatives.size(), stats.type2_relaxed);
      return 0;
    }

    if (cmd_synth->parsed()) {
      const CorpusSplit split = synth_corpus(so.pairs, so.vocab, so.seed);
      std::filesystem::create_directories(so.out);
      const std::string train_path = so.out + "/train.tsv";
      const std::string dev_path = so.out + "/dev.tsv";
      save_pairs_tsv(train_path, split.train);
      save_pairs_tsv(dev_path, split.dev);
      write_manifest(train_path, "synth", argv_copy,
                     json{{"pairs", so.pairs},
                          {"synth_vocab", so.vocab},
                          {"seed", so.seed}},
                     {});
      std::printf("%zu train / %zu dev pairs in %s\n", split.train.size(),
                  split.dev.size(), so.out.c_str());
      return 0;
    }

    if (cmd_train->parsed()) return run_train_stage("train", tr, argv_copy);
    if (cmd_pretrain->parsed()) {
      return run_train_stage("pretrain", pr, argv_copy);
    }
    if (cmd_finetune->parsed()) {
      return run_train_stage("finetune", fi, argv_copy);
    }

    if (cmd_eval->parsed()) {
      Checkpoint ckpt = load_checkpoint(eo.checkpoint);
      if (!eo.vocab.empty()) {
        Vocab external = Vocab::load(eo.vocab, ckpt.model.config.ngram);
        if (external.hash() != ckpt.vocab_hash) {
          throw VocabError("vocabulary " + eo.vocab +
                           " does not match the checkpoint");
        }
      }
      auto pairs = load_pairs_tsv(eo.data, parse_format(eo.format)).pairs;
      const EvalReport rep =
          evaluate(ckpt, pairs, eo.threshold,
                   worker_count(pairs.size(), eo.deterministic));
      std::fputs(report_summary(rep).c_str(), stdout);
      if (!eo.out.empty()) {
        std::ofstream out(eo.out, std::ios::binary);
        if (!out) throw IoError("cannot write report: " + eo.out);
        out << report_tsv(rep);
        std::vector<std::string> inputs = {eo.checkpoint, eo.data};
        if (!eo.vocab.empty()) inputs.push_back(eo.vocab);
        write_manifest(eo.out, "eval", argv_copy,
                       json{{"checkpoint", eo.checkpoint},
                            {"data", eo.data},
                            {"vocab", eo.vocab},
                            {"threshold", eo.threshold},
                            {"deterministic", eo.deterministic}},
                       inputs);
      } else {
        std::fputs(report_tsv(rep).c_str(), stdout);
      }
      return 0;
    }

    if (cmd_sweep->parsed()) {
      Checkpoint ckpt = load_checkpoint(wo.checkpoint);
      auto pairs = load_pairs_tsv(wo.data, parse_format(wo.format)).pairs;
      const auto grid = parse_number_list<double>(wo.grid, "threshold");
      const SweepResult sweep =
          threshold_sweep(ckpt, pairs, grid,
                          worker_count(pairs.size(), wo.deterministic));
      std::string tsv = "threshold\taccuracy\n";
      for (const auto& row : sweep.rows) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.4f\t%.4f\n", row.threshold,
                      row.accuracy);
        tsv += buf;
      }
      if (!wo.out.empty()) {
        std::ofstream out(wo.out, std::ios::binary);
        if (!out) throw IoError("cannot write sweep: " + wo.out);
        out << tsv;
        write_manifest(wo.out, "sweep", argv_copy,
                       json{{"checkpoint", wo.checkpoint},
                            {"data", wo.data},
                            {"grid", wo.grid}},
                       {wo.checkpoint, wo.data});
      } else {
        std::fputs(tsv.c_str(), stdout);
      }
      std::printf("best threshold %.4f (accuracy %.4f)\n",
                  sweep.best_threshold, sweep.best_accuracy);
      return 0;
    }

    if (cmd_curve->parsed()) {
      auto loaded = load_pairs_tsv(cu.data, parse_format(cu.format));
      CorpusSplit corpus;
      corpus.train = std::move(loaded.pairs);
      if (cu.dev.empty()) throw ConfigError("curve needs --dev");
      corpus.dev = load_pairs_tsv(cu.dev, parse_format(cu.format)).pairs;
      const auto sizes =
          parse_number_list<std::size_t>(curve_sizes, "size");

      TrainConfig tcfg;
      tcfg.stage = "train";
      tcfg.lr = cu.lr;
      tcfg.batch_size = cu.batch;
      tcfg.dropout = cu.dropout;
      tcfg.epochs = cu.epochs;
      tcfg.seed = cu.seed;
      tcfg.threshold = cu.threshold;
      tcfg.sgd = cu.sgd;
      tcfg.quiet = cu.quiet;

      std::vector<CurveRow> rows;
      std::vector<std::string> inputs = {cu.data, cu.dev};
      if (!cu.checkpoint.empty()) {
        Checkpoint pre = load_checkpoint(cu.checkpoint);
        inputs.push_back(cu.checkpoint);
        rows = learning_curve(pre.model.config, pre.vocab, corpus, sizes, &pre,
                              tcfg);
      } else {
        ModelConfig mcfg;
        mcfg.arch = cu.arch;
        mcfg.dim = cu.dim;
        mcfg.context = cu.context;
        mcfg.ngram = cu.ngram;
        mcfg.self_attention = cu.self_attention == "on";
        mcfg.widths = parse_widths(cu.widths);
        Vocab vocab =
            build_vocab(question_pool(corpus.train), mcfg.ngram, cu.min_count);
        rows = learning_curve(mcfg, vocab, corpus, sizes, nullptr, tcfg);
      }
      std::string tsv = "size\taccuracy\tvariant\n";
      for (const auto& row : rows) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%zu\t%.4f\t%s\n", row.size,
                      row.accuracy, row.variant.c_str());
        tsv += buf;
      }
      if (!cu.out.empty()) {
        std::ofstream out(cu.out, std::ios::binary);
        if (!out) throw IoError("cannot write curve: " + cu.out);
        out << tsv;
        write_manifest(cu.out, "curve", argv_copy,
                       json{{"data", cu.data},
                            {"dev", cu.dev},
                            {"sizes", curve_sizes},
                            {"checkpoint", cu.checkpoint},
                            {"seed", cu.seed},
                            {"epochs", cu.epochs}},
                       inputs);
      } else {
        std::fputs(tsv.c_str(), stdout);
      }
      return 0;
    }

    if (cmd_report->parsed()) {
      std::vector<Checkpoint> owned;
      owned.reserve(ro.checkpoints.size());
      for (const auto& path : ro.checkpoints) {
        owned.push_back(load_checkpoint(path));
      }
      std::vector<const Checkpoint*> ckpts;
      for (const auto& c : owned) ckpts.push_back(&c);
      auto pairs = load_pairs_tsv(ro.data, parse_format(ro.format)).pairs;
      const std::string text =
          error_report(ckpts, pairs, ro.k, ro.threshold,
                       worker_count(pairs.size(), ro.deterministic));
      if (!ro.out.empty()) {
        std::ofstream out(ro.out, std::ios::binary);
        if (!out) throw IoError("cannot write report: " + ro.out);
        out << text;
        std::vector<std::string> inputs = ro.checkpoints;
        inputs.push_back(ro.data);
        write_manifest(ro.out, "report", argv_copy,
                       json{{"checkpoints", ro.checkpoints},
                            {"data", ro.data},
                            {"k", ro.k},
                            {"threshold", ro.threshold}},
                       inputs);
      } else {
        std::fputs(text.c_str(), stdout);
      }
      return 0;
    }

    if (cmd_predict->parsed()) {
      Checkpoint ckpt = load_checkpoint(po.checkpoint);
      std::string line;
      while (std::getline(std::cin, line)) {
        if (line.empty() || line == "\r") continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
          throw FormatError("predict input needs q1<TAB>q2, got: " + line);
        }
        const TokenSeq q1 = tokenize(line.substr(0, tab));
        const TokenSeq q2 = tokenize(line.substr(tab + 1));
        const PairScore s =
            score_pair(ckpt.model, ckpt.vocab, q1, q2, po.threshold);
        std::printf("%.6f\t%d\n", s.p_paraphrase, s.label ? 1 : 0);
      }
      return 0;
    }
  } catch (const decatt::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}

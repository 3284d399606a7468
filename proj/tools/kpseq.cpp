#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "kpseq/corpus.hpp"
#include "kpseq/decoding.hpp"
#include "kpseq/evaluation.hpp"
#include "kpseq/pipeline.hpp"
#include "kpseq/training.hpp"

namespace {

using namespace kpseq;

// Bad command-line values discovered after CLI11 parsing still exit 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<int> parse_int_list(const std::string& text, const std::string& flag) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    try {
      size_t used = 0;
      int v = std::stoi(piece, &used);
      if (used != piece.size()) throw std::invalid_argument(piece);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError(flag + ": expected a comma-separated list of integers, got \"" + text + "\"");
    }
  }
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    if (!piece.empty()) out.push_back(piece);
  }
  return out;
}

void log_config(const std::string& command, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::cerr << "[kpseq] " << command << " resolved config:";
  for (const auto& [k, v] : kv) std::cerr << " " << k << "=" << v;
  std::cerr << "\n";
}

const std::vector<std::string> kOrderNames = {"random", "no-sort", "length",
                                              "alpha",  "appear-pre", "appear-ap"};

struct TrainFlags {
  std::string config_path;
  std::string order;
  int epochs = -1;
  int batch_size = -1;
  double lr = -1;
  double clip = -1;
  double lambda = -1;
  int64_t seed = -1;
  int validation_size = -1;
  int eval_every = -1;
  std::string preset;
  int vocab_size = 50000;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "train config JSON (kebab-case keys)");
    cmd->add_option("--order", order, "target phrase ordering")->check(CLI::IsMember(kOrderNames));
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--batch-size", batch_size, "examples per optimizer step");
    cmd->add_option("--lr", lr, "learning rate");
    cmd->add_option("--clip", clip, "global gradient clip norm");
    cmd->add_option("--lambda", lambda, "coverage loss weight");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--validation-size", validation_size, "held-out validation documents");
    cmd->add_option("--eval-every", eval_every, "steps between validation decodes");
    cmd->add_option("--preset", preset, "model preset")->check(CLI::IsMember({"base", "big"}));
    cmd->add_option("--vocab-size", vocab_size, "maximum vocabulary size");
  }

  TrainConfig resolve() const {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = TrainConfig::from_json_file(config_path);
    if (!order.empty()) cfg.ordering = ordering_from_name(order);
    if (epochs >= 0) cfg.epochs = epochs;
    if (batch_size >= 0) cfg.batch_size = batch_size;
    if (lr >= 0) cfg.learning_rate = lr;
    if (clip >= 0) cfg.gradient_clip_norm = clip;
    if (lambda >= 0) cfg.lambda = lambda;
    if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
    if (validation_size >= 0) cfg.validation_size = validation_size;
    if (eval_every >= 0) cfg.eval_every = eval_every;
    if (!preset.empty()) cfg.model_preset = preset;
    cfg.validate();
    return cfg;
  }
};

void emit_report(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report: " + out_path);
    out << text;
  }
}

int run(int argc, char** argv) {
  CLI::App app{"kpseq: One2Seq keyphrase generation toolkit"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic JSONL corpus");
  SyntheticSpec sspec;
  std::string synth_out;
  int64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output JSONL path")->required();
  synth->add_option("--docs", sspec.num_docs, "number of documents");
  synth->add_option("--vocab-pool", sspec.vocab_pool, "token pool size");
  synth->add_option("--doc-len-min", sspec.doc_len_min, "min abstract length");
  synth->add_option("--doc-len-max", sspec.doc_len_max, "max abstract length");
  synth->add_option("--phrases-min", sspec.phrases_min, "min phrases per document");
  synth->add_option("--phrases-max", sspec.phrases_max, "max phrases per document");
  synth->add_option("--absent-frac", sspec.absent_fraction, "fraction of absent phrases");
  synth->add_option("--seed", synth_seed, "random seed");

  // ---- preprocess ----
  auto* preprocess = app.add_subcommand("preprocess", "build a vocabulary file from a corpus");
  std::string pre_data, pre_out;
  int pre_max_size = 50000;
  preprocess->add_option("--data", pre_data, "corpus JSONL")->required();
  preprocess->add_option("--out", pre_out, "vocabulary output path")->required();
  preprocess->add_option("--max-size", pre_max_size, "maximum vocabulary size");

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train a One2Seq model");
  std::string train_data, train_valid, train_out;
  TrainFlags train_flags;
  train_cmd->add_option("--data", train_data, "training corpus JSONL")->required();
  train_cmd->add_option("--valid", train_valid, "validation corpus JSONL (default: split)");
  train_cmd->add_option("--out", train_out, "checkpoint output directory")->required();
  train_flags.add_options(train_cmd);

  // ---- decode ----
  auto* decode_cmd = app.add_subcommand("decode", "beam-search a corpus into predictions");
  std::string dec_ckpt, dec_data, dec_out, dec_mode = "overgen";
  BeamConfig dec_bc;
  decode_cmd->add_option("--checkpoint", dec_ckpt, "checkpoint directory")->required();
  decode_cmd->add_option("--data", dec_data, "corpus JSONL")->required();
  decode_cmd->add_option("--out", dec_out, "predictions JSONL output")->required();
  decode_cmd->add_option("--beam", dec_bc.beam_width, "beam width");
  decode_cmd->add_option("--max-len", dec_bc.max_length, "maximum decode length");
  decode_cmd->add_option("--mode", dec_mode, "phrase collection mode")
      ->check(CLI::IsMember({"overgen", "self-term"}));
  decode_cmd->add_flag("--early-stop,!--no-early-stop", dec_bc.early_stop,
                       "stop once the best hypothesis is completed");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against references");
  std::vector<std::string> eval_preds, eval_refs, eval_names;
  std::string eval_ks = "5,10", eval_absent_ks = "10,50", eval_format = "markdown", eval_out;
  eval_cmd->add_option("--pred", eval_preds, "predictions JSONL (repeatable)")->required();
  eval_cmd->add_option("--ref", eval_refs, "reference JSONL (repeatable)")->required();
  eval_cmd->add_option("--dataset", eval_names, "dataset display names (repeatable)");
  eval_cmd->add_option("--ks", eval_ks, "present-phrase cutoffs");
  eval_cmd->add_option("--absent-ks", eval_absent_ks, "absent-phrase cutoffs");
  eval_cmd->add_option("--format", eval_format, "report format")
      ->check(CLI::IsMember({"markdown", "md", "csv"}));
  eval_cmd->add_option("--out", eval_out, "report path (default stdout)");

  // ---- stats ----
  auto* stats_cmd = app.add_subcommand("stats", "aggregate prediction statistics over a predictions file");
  std::string stats_pred, stats_out;
  stats_cmd->add_option("--pred", stats_pred, "predictions JSONL")->required();
  stats_cmd->add_option("--out", stats_out, "output path (default stdout)");

  // ---- compare ----
  auto* compare_cmd = app.add_subcommand("compare", "ordering x beam-width comparison matrix");
  std::string cmp_data, cmp_test, cmp_out_dir;
  std::string cmp_orders = "all", cmp_beams = "10,25,50", cmp_modes = "overgen";
  std::string cmp_ks = "5,10", cmp_absent_ks = "10,50", cmp_seeds;
  int cmp_max_len = kMaxTargetTokens;
  TrainFlags cmp_flags;
  compare_cmd->add_option("--data", cmp_data, "training corpus JSONL")->required();
  compare_cmd->add_option("--test", cmp_test, "test corpus JSONL (default: training corpus)");
  compare_cmd->add_option("--out", cmp_out_dir, "output directory")->required();
  compare_cmd->add_option("--orders", cmp_orders, "comma list of orderings, or 'all'");
  compare_cmd->add_option("--beams", cmp_beams, "comma list of beam widths");
  compare_cmd->add_option("--modes", cmp_modes, "comma list of decode modes");
  compare_cmd->add_option("--ks", cmp_ks, "present-phrase cutoffs");
  compare_cmd->add_option("--absent-ks", cmp_absent_ks, "absent-phrase cutoffs");
  compare_cmd->add_option("--max-len", cmp_max_len, "maximum decode length");
  compare_cmd->add_option("--seeds", cmp_seeds, "comma list of seeds, one matrix per seed");
  bool cmp_train = false;
  compare_cmd->add_flag("--train", cmp_train,
                        "train the per-ordering models (otherwise reuse checkpoints in --out)");
  cmp_flags.add_options(compare_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*synth) {
    sspec.seed = static_cast<uint64_t>(synth_seed);
    log_config("synth", {{"out", synth_out},
                         {"docs", std::to_string(sspec.num_docs)},
                         {"vocab-pool", std::to_string(sspec.vocab_pool)},
                         {"doc-len", std::to_string(sspec.doc_len_min) + ".." + std::to_string(sspec.doc_len_max)},
                         {"phrases", std::to_string(sspec.phrases_min) + ".." + std::to_string(sspec.phrases_max)},
                         {"absent-frac", std::to_string(sspec.absent_fraction)},
                         {"seed", std::to_string(sspec.seed)}});
    std::vector<Document> docs = generate_synthetic(sspec);
    save_jsonl(docs, synth_out);
    std::cerr << "[kpseq] wrote " << docs.size() << " documents to " << synth_out << "\n";
    return 0;
  }

  if (*preprocess) {
    log_config("preprocess",
               {{"data", pre_data}, {"out", pre_out}, {"max-size", std::to_string(pre_max_size)}});
    std::vector<Document> docs = load_jsonl(pre_data);
    Vocabulary vocab = build_vocabulary(docs, pre_max_size);
    vocab.save(pre_out);
    std::cerr << "[kpseq] vocabulary of " << vocab.size() << " tokens written to " << pre_out
              << "\n";
    return 0;
  }

  if (*train_cmd) {
    TrainConfig cfg = train_flags.resolve();
    log_config("train", {{"data", train_data},
                         {"valid", train_valid.empty() ? "(split)" : train_valid},
                         {"out", train_out},
                         {"vocab-size", std::to_string(train_flags.vocab_size)},
                         {"config", cfg.to_json()}});
    std::vector<Document> docs = load_jsonl(train_data);
    std::vector<Document> valid;
    const std::vector<Document>* valid_ptr = nullptr;
    if (!train_valid.empty()) {
      valid = load_jsonl(train_valid);
      valid_ptr = &valid;
    }
    TrainResult result = train(docs, cfg, train_flags.vocab_size, valid_ptr);
    save_checkpoint(result.best, train_out);
    std::cerr << "[kpseq] " << result.best.params.total_parameters() << " parameters, "
              << result.steps << " steps, best validation F1@5 "
              << format_score(result.best.meta.validation_f1_at_5) << " at step "
              << result.best.meta.step << "; checkpoint written to " << train_out << "\n";
    return 0;
  }

  if (*decode_cmd) {
    dec_bc.mode = mode_from_name(dec_mode);
    log_config("decode", {{"checkpoint", dec_ckpt},
                          {"data", dec_data},
                          {"out", dec_out},
                          {"beam", std::to_string(dec_bc.beam_width)},
                          {"max-len", std::to_string(dec_bc.max_length)},
                          {"mode", dec_mode},
                          {"early-stop", dec_bc.early_stop ? "true" : "false"}});
    Checkpoint ckpt = load_checkpoint(dec_ckpt);
    std::vector<Document> docs = load_jsonl(dec_data);
    std::vector<DocPrediction> preds = decode_corpus(ckpt, docs, dec_bc);
    save_predictions_jsonl(preds, dec_out);
    std::cerr << "[kpseq] decoded " << preds.size() << " documents to " << dec_out << "\n";
    return 0;
  }

  if (*eval_cmd) {
    if (eval_refs.size() != eval_preds.size()) {
      throw UsageError("--ref must be given once per --pred");
    }
    if (!eval_names.empty() && eval_names.size() != eval_preds.size()) {
      throw UsageError("--dataset must be given once per --pred");
    }
    std::vector<int> ks = parse_int_list(eval_ks, "--ks");
    std::vector<int> aks = parse_int_list(eval_absent_ks, "--absent-ks");
    log_config("eval", {{"ks", eval_ks},
                        {"absent-ks", eval_absent_ks},
                        {"format", eval_format},
                        {"out", eval_out.empty() ? "(stdout)" : eval_out}});
    std::vector<DatasetEval> evals;
    for (size_t i = 0; i < eval_preds.size(); i++) {
      std::vector<DocPrediction> preds = load_predictions_jsonl(eval_preds[i]);
      std::vector<Document> refs = load_jsonl(eval_refs[i]);
      std::string name = i < eval_names.size()
                             ? eval_names[i]
                             : std::filesystem::path(eval_refs[i]).stem().string();
      evals.push_back(evaluate_dataset(name, make_records(preds, refs), ks, aks));
    }
    emit_report(render_report(macro_report(evals), eval_format), eval_out);
    return 0;
  }

  if (*stats_cmd) {
    log_config("stats", {{"pred", stats_pred}, {"out", stats_out.empty() ? "(stdout)" : stats_out}});
    std::vector<DocPrediction> preds = load_predictions_jsonl(stats_pred);
    if (preds.empty()) throw std::runtime_error("predictions file is empty: " + stats_pred);
    double beams = 0, len = 0, uniq = 0, total = 0;
    for (const auto& p : preds) {
      beams += p.beams;
      len += p.mean_beam_len;
      uniq += p.unique_kp;
      total += p.total_kp;
    }
    double n = static_cast<double>(preds.size());
    std::ostringstream out;
    out << "| #(Beam) | Len(Beam) | #(UniqKP) | #(KP) |\n|---|---|---|---|\n| "
        << format_score(beams / n) << " | " << format_score(len / n) << " | "
        << format_score(uniq / n) << " | " << format_score(total / n) << " |\n";
    emit_report(out.str(), stats_out);
    return 0;
  }

  if (*compare_cmd) {
    TrainConfig cfg = cmp_flags.resolve();
    CompareSpec spec;
    if (cmp_orders != "all") {
      spec.orderings.clear();
      for (const auto& name : split_commas(cmp_orders)) {
        try {
          spec.orderings.push_back(ordering_from_name(name));
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
      }
    }
    spec.beam_widths = parse_int_list(cmp_beams, "--beams");
    spec.modes.clear();
    for (const auto& name : split_commas(cmp_modes)) {
      try {
        spec.modes.push_back(mode_from_name(name));
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    }
    spec.present_ks = parse_int_list(cmp_ks, "--ks");
    spec.absent_ks = parse_int_list(cmp_absent_ks, "--absent-ks");
    spec.max_length = cmp_max_len;
    if (!cmp_seeds.empty()) {
      for (int s : parse_int_list(cmp_seeds, "--seeds")) {
        if (s < 0) throw UsageError("--seeds: seeds must be non-negative");
        spec.seeds.push_back(static_cast<uint64_t>(s));
      }
    }
    log_config("compare", {{"data", cmp_data},
                           {"test", cmp_test.empty() ? "(training corpus)" : cmp_test},
                           {"out", cmp_out_dir},
                           {"orders", cmp_orders},
                           {"beams", cmp_beams},
                           {"modes", cmp_modes},
                           {"ks", cmp_ks},
                           {"absent-ks", cmp_absent_ks},
                           {"vocab-size", std::to_string(cmp_flags.vocab_size)},
                           {"config", cfg.to_json()}});
    std::vector<Document> train_docs = load_jsonl(cmp_data);
    std::vector<Document> test_docs = cmp_test.empty() ? train_docs : load_jsonl(cmp_test);
    CompareOutcome outcome =
        compare(train_docs, test_docs, spec, cfg, cmp_flags.vocab_size, cmp_out_dir, cmp_train);
    for (const auto& f : outcome.files_written) std::cerr << "[kpseq] wrote " << f << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

#pragma once

#include <map>
#include <string>
#include <vector>

#include "kpseq/corpus.hpp"
#include "kpseq/decoding.hpp"

namespace kpseq {

enum class GoldPartition { kPresent, kAbsent };

struct MetricResult {
  int k = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  GoldPartition partition = GoldPartition::kPresent;
  int docs = 0;  // contributing documents
};

// Stemmed lowercase token-sequence equality.
bool phrase_match(const Phrase& pred, const Phrase& gold);

// One-to-one matching of the top-min(k, |pred|) predictions against gold.
// precision = correct / min(k, |pred|), recall = correct / |gold|.
MetricResult prf_at_k(const std::vector<Phrase>& ranked_preds, const std::vector<Phrase>& gold,
                      int k, GoldPartition partition = GoldPartition::kPresent);

MetricResult recall_at_k(const std::vector<Phrase>& ranked_preds, const std::vector<Phrase>& gold,
                         int k, GoldPartition partition = GoldPartition::kAbsent);

// Classifies each prediction with the stemmed-subsequence test against the
// document source; rank order is preserved within each side.
std::pair<std::vector<Phrase>, std::vector<Phrase>> partition_predictions(
    const std::vector<Phrase>& preds, const Document& doc);

struct PredictionRecord {
  std::string id;
  std::vector<Phrase> predictions;  // ranked unique
  std::vector<Phrase> gold_present;
  std::vector<Phrase> gold_absent;
  std::vector<Token> source_tokens;
  int beams = 0;
  double mean_beam_len = 0.0;
  int unique_kp = 0;
  int total_kp = 0;
};

// Joins predictions with their reference documents by id.
std::vector<PredictionRecord> make_records(const std::vector<DocPrediction>& preds,
                                           const std::vector<Document>& refs);

struct PredictionStats {
  double mean_beams = 0.0;
  double mean_beam_len = 0.0;
  double mean_unique = 0.0;
  double mean_total = 0.0;
  int docs = 0;
};

PredictionStats compute_stats(const std::vector<PredictionRecord>& records);

struct DatasetEval {
  std::string name;
  std::map<int, MetricResult> present;  // k -> macro-averaged P/R/F1
  std::map<int, MetricResult> absent;   // k -> macro-averaged recall
  PredictionStats stats;
};

// Macro average over documents; documents with an empty gold partition are
// skipped for that partition.
DatasetEval evaluate_dataset(const std::string& name, const std::vector<PredictionRecord>& records,
                             const std::vector<int>& present_ks, const std::vector<int>& absent_ks);

struct EvalReport {
  std::vector<int> present_ks;
  std::vector<int> absent_ks;
  std::vector<DatasetEval> datasets;
  DatasetEval average;  // unweighted mean of the per-dataset averages
};

EvalReport macro_report(const std::vector<DatasetEval>& datasets);

// Scores rounded to 3 decimals, half-up.
std::string format_score(double score);

// format: "markdown" or "csv"
std::string render_report(const EvalReport& report, const std::string& format);
std::string render_comparison(const std::vector<std::pair<std::string, EvalReport>>& rows,
                              const std::string& format);

}  // namespace kpseq

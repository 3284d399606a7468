#include "kpseq/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace kpseq {

bool phrase_match(const Phrase& pred, const Phrase& gold) {
  if (pred.size() != gold.size()) return false;
  for (size_t i = 0; i < pred.size(); i++) {
    if (stem(pred[i]) != stem(gold[i])) return false;
  }
  return true;
}

MetricResult prf_at_k(const std::vector<Phrase>& ranked_preds, const std::vector<Phrase>& gold,
                      int k, GoldPartition partition) {
  if (k <= 0) throw std::invalid_argument("prf_at_k: k must be positive");
  MetricResult r;
  r.k = k;
  r.partition = partition;
  r.docs = 1;
  // gold is a set: duplicated entries are never counted twice
  std::vector<Phrase> gold_stems;
  gold_stems.reserve(gold.size());
  for (const auto& g : gold) {
    Phrase s = stem_phrase(g);
    if (std::find(gold_stems.begin(), gold_stems.end(), s) == gold_stems.end()) {
      gold_stems.push_back(std::move(s));
    }
  }
  size_t top = std::min<size_t>(static_cast<size_t>(k), ranked_preds.size());
  std::vector<bool> used(gold_stems.size(), false);
  int correct = 0;
  for (size_t i = 0; i < top; i++) {
    Phrase p = stem_phrase(ranked_preds[i]);
    for (size_t j = 0; j < gold_stems.size(); j++) {
      if (!used[j] && gold_stems[j] == p) {
        used[j] = true;
        correct++;
        break;
      }
    }
  }
  r.precision = top == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(top);
  r.recall = gold_stems.empty()
                 ? 0.0
                 : static_cast<double>(correct) / static_cast<double>(gold_stems.size());
  r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                                        : 0.0;
  return r;
}

MetricResult recall_at_k(const std::vector<Phrase>& ranked_preds, const std::vector<Phrase>& gold,
                         int k, GoldPartition partition) {
  return prf_at_k(ranked_preds, gold, k, partition);
}

std::pair<std::vector<Phrase>, std::vector<Phrase>> partition_predictions(
    const std::vector<Phrase>& preds, const Document& doc) {
  std::vector<Token> source_stems;
  source_stems.reserve(doc.source_tokens.size());
  for (const auto& t : doc.source_tokens) source_stems.push_back(stem(t));
  std::vector<Phrase> present, absent;
  for (const auto& p : preds) {
    if (find_stemmed(source_stems, stem_phrase(p))) {
      present.push_back(p);
    } else {
      absent.push_back(p);
    }
  }
  return {present, absent};
}

std::vector<PredictionRecord> make_records(const std::vector<DocPrediction>& preds,
                                           const std::vector<Document>& refs) {
  std::unordered_map<std::string, const Document*> by_id;
  for (const auto& doc : refs) by_id[doc.id] = &doc;
  std::vector<PredictionRecord> records;
  records.reserve(preds.size());
  for (const auto& pred : preds) {
    auto it = by_id.find(pred.id);
    if (it == by_id.end()) {
      throw std::runtime_error("no reference document for prediction id \"" + pred.id + "\"");
    }
    const Document& doc = *it->second;
    PhrasePartition gold = split_present_absent(doc);
    PredictionRecord rec;
    rec.id = pred.id;
    rec.predictions = pred.phrases;
    for (const auto& p : gold.present) rec.gold_present.push_back(p.phrase);
    rec.gold_absent = gold.absent;
    rec.source_tokens = doc.source_tokens;
    rec.beams = pred.beams;
    rec.mean_beam_len = pred.mean_beam_len;
    rec.unique_kp = pred.unique_kp;
    rec.total_kp = pred.total_kp;
    records.push_back(std::move(rec));
  }
  return records;
}

PredictionStats compute_stats(const std::vector<PredictionRecord>& records) {
  if (records.empty()) throw std::invalid_argument("compute_stats: no records");
  PredictionStats s;
  for (const auto& r : records) {
    s.mean_beams += r.beams;
    s.mean_beam_len += r.mean_beam_len;
    s.mean_unique += r.unique_kp;
    s.mean_total += r.total_kp;
  }
  double n = static_cast<double>(records.size());
  s.mean_beams /= n;
  s.mean_beam_len /= n;
  s.mean_unique /= n;
  s.mean_total /= n;
  s.docs = static_cast<int>(records.size());
  return s;
}

DatasetEval evaluate_dataset(const std::string& name, const std::vector<PredictionRecord>& records,
                             const std::vector<int>& present_ks,
                             const std::vector<int>& absent_ks) {
  if (records.empty()) throw std::invalid_argument("evaluate_dataset: no records for " + name);
  DatasetEval eval;
  eval.name = name;
  for (int k : present_ks) {
    MetricResult agg;
    agg.k = k;
    agg.partition = GoldPartition::kPresent;
    eval.present[k] = agg;
  }
  for (int k : absent_ks) {
    MetricResult agg;
    agg.k = k;
    agg.partition = GoldPartition::kAbsent;
    eval.absent[k] = agg;
  }

  for (const auto& rec : records) {
    Document doc;  // partition_predictions needs only the source tokens
    doc.source_tokens = rec.source_tokens;
    auto [present_preds, absent_preds] = partition_predictions(rec.predictions, doc);
    if (!rec.gold_present.empty()) {
      for (int k : present_ks) {
        MetricResult r = prf_at_k(present_preds, rec.gold_present, k, GoldPartition::kPresent);
        MetricResult& agg = eval.present[k];
        agg.precision += r.precision;
        agg.recall += r.recall;
        agg.f1 += r.f1;
        agg.docs++;
      }
    }
    if (!rec.gold_absent.empty()) {
      for (int k : absent_ks) {
        MetricResult r = recall_at_k(absent_preds, rec.gold_absent, k, GoldPartition::kAbsent);
        MetricResult& agg = eval.absent[k];
        agg.precision += r.precision;
        agg.recall += r.recall;
        agg.f1 += r.f1;
        agg.docs++;
      }
    }
  }
  for (auto& [k, agg] : eval.present) {
    if (agg.docs > 0) {
      agg.precision /= agg.docs;
      agg.recall /= agg.docs;
      agg.f1 /= agg.docs;
    }
  }
  for (auto& [k, agg] : eval.absent) {
    if (agg.docs > 0) {
      agg.precision /= agg.docs;
      agg.recall /= agg.docs;
      agg.f1 /= agg.docs;
    }
  }
  eval.stats = compute_stats(records);
  return eval;
}

EvalReport macro_report(const std::vector<DatasetEval>& datasets) {
  if (datasets.empty()) throw std::invalid_argument("macro_report: no datasets");
  EvalReport report;
  report.datasets = datasets;
  for (const auto& [k, r] : datasets.front().present) report.present_ks.push_back(k);
  for (const auto& [k, r] : datasets.front().absent) report.absent_ks.push_back(k);

  int contributing = 0;
  for (const auto& ds : datasets) {
    for (const auto& [k, r] : ds.present) contributing += r.docs;
    for (const auto& [k, r] : ds.absent) contributing += r.docs;
  }
  if (contributing == 0) throw std::runtime_error("macro_report: zero contributing documents");

  DatasetEval& avg = report.average;
  avg.name = "Average";
  auto average_side = [&](bool present_side) {
    const auto& ks = present_side ? report.present_ks : report.absent_ks;
    for (int k : ks) {
      MetricResult agg;
      agg.k = k;
      agg.partition = present_side ? GoldPartition::kPresent : GoldPartition::kAbsent;
      int n = 0;
      for (const auto& ds : datasets) {
        const auto& side = present_side ? ds.present : ds.absent;
        auto it = side.find(k);
        if (it == side.end() || it->second.docs == 0) continue;
        agg.precision += it->second.precision;
        agg.recall += it->second.recall;
        agg.f1 += it->second.f1;
        agg.docs += it->second.docs;
        n++;
      }
      if (n > 0) {
        agg.precision /= n;
        agg.recall /= n;
        agg.f1 /= n;
      }
      (present_side ? avg.present : avg.absent)[k] = agg;
    }
  };
  average_side(true);
  average_side(false);

  int stat_datasets = 0;
  for (const auto& ds : datasets) {
    avg.stats.mean_beams += ds.stats.mean_beams;
    avg.stats.mean_beam_len += ds.stats.mean_beam_len;
    avg.stats.mean_unique += ds.stats.mean_unique;
    avg.stats.mean_total += ds.stats.mean_total;
    avg.stats.docs += ds.stats.docs;
    stat_datasets++;
  }
  if (stat_datasets > 0) {
    avg.stats.mean_beams /= stat_datasets;
    avg.stats.mean_beam_len /= stat_datasets;
    avg.stats.mean_unique /= stat_datasets;
    avg.stats.mean_total /= stat_datasets;
  }
  return report;
}

std::string format_score(double score) {
  double scaled = std::floor(score * 1000.0 + 0.5 + 1e-9);  // half-up at 3 decimals
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", scaled / 1000.0);
  return buf;
}

namespace {

void render_markdown(std::ostringstream& out,
                     const std::vector<std::pair<std::string, EvalReport>>& rows) {
  const EvalReport& first = rows.front().second;

  out << "## Present keyphrases (F1@k)\n\n";
  out << "| Method |";
  for (const auto& ds : first.datasets) {
    for (int k : first.present_ks) out << " " << ds.name << " F1@" << k << " |";
  }
  for (int k : first.present_ks) out << " Average F1@" << k << " |";
  out << "\n|---|";
  size_t cols = first.datasets.size() * first.present_ks.size() + first.present_ks.size();
  for (size_t i = 0; i < cols; i++) out << "---|";
  out << "\n";
  for (const auto& [label, report] : rows) {
    out << "| " << label << " |";
    for (const auto& ds : report.datasets) {
      for (int k : report.present_ks) out << " " << format_score(ds.present.at(k).f1) << " |";
    }
    for (int k : report.present_ks) out << " " << format_score(report.average.present.at(k).f1) << " |";
    out << "\n";
  }

  if (!first.absent_ks.empty()) {
    out << "\n## Absent keyphrases (Recall@k)\n\n";
    out << "| Method |";
    for (const auto& ds : first.datasets) {
      for (int k : first.absent_ks) out << " " << ds.name << " R@" << k << " |";
    }
    for (int k : first.absent_ks) out << " Average R@" << k << " |";
    out << "\n|---|";
    cols = first.datasets.size() * first.absent_ks.size() + first.absent_ks.size();
    for (size_t i = 0; i < cols; i++) out << "---|";
    out << "\n";
    for (const auto& [label, report] : rows) {
      out << "| " << label << " |";
      for (const auto& ds : report.datasets) {
        for (int k : report.absent_ks) out << " " << format_score(ds.absent.at(k).recall) << " |";
      }
      for (int k : report.absent_ks) {
        out << " " << format_score(report.average.absent.at(k).recall) << " |";
      }
      out << "\n";
    }
  }

  out << "\n## Prediction statistics\n\n";
  out << "| Method | #(Beam) | Len(Beam) | #(UniqKP) | #(KP) |\n|---|---|---|---|---|\n";
  for (const auto& [label, report] : rows) {
    const PredictionStats& s = report.average.stats;
    out << "| " << label << " | " << format_score(s.mean_beams) << " | "
        << format_score(s.mean_beam_len) << " | " << format_score(s.mean_unique) << " | "
        << format_score(s.mean_total) << " |\n";
  }
}

void render_csv(std::ostringstream& out,
                const std::vector<std::pair<std::string, EvalReport>>& rows) {
  const EvalReport& first = rows.front().second;
  out << "method";
  for (const auto& ds : first.datasets) {
    for (int k : first.present_ks) out << "," << ds.name << "-f1@" << k;
  }
  for (int k : first.present_ks) out << ",average-f1@" << k;
  for (const auto& ds : first.datasets) {
    for (int k : first.absent_ks) out << "," << ds.name << "-recall@" << k;
  }
  for (int k : first.absent_ks) out << ",average-recall@" << k;
  out << ",beams,beam-len,uniq-kp,kp\n";
  for (const auto& [label, report] : rows) {
    out << label;
    for (const auto& ds : report.datasets) {
      for (int k : report.present_ks) out << "," << format_score(ds.present.at(k).f1);
    }
    for (int k : report.present_ks) out << "," << format_score(report.average.present.at(k).f1);
    for (const auto& ds : report.datasets) {
      for (int k : report.absent_ks) out << "," << format_score(ds.absent.at(k).recall);
    }
    for (int k : report.absent_ks) out << "," << format_score(report.average.absent.at(k).recall);
    const PredictionStats& s = report.average.stats;
    out << "," << format_score(s.mean_beams) << "," << format_score(s.mean_beam_len) << ","
        << format_score(s.mean_unique) << "," << format_score(s.mean_total) << "\n";
  }
}

}  // namespace

std::string render_comparison(const std::vector<std::pair<std::string, EvalReport>>& rows,
                              const std::string& format) {
  if (rows.empty()) throw std::invalid_argument("render: no reports");
  for (const auto& [label, report] : rows) {
    if (report.datasets.empty()) throw std::invalid_argument("render: report has no datasets");
  }
  std::ostringstream out;
  if (format == "markdown" || format == "md") {
    render_markdown(out, rows);
  } else if (format == "csv") {
    render_csv(out, rows);
  } else {
    throw std::invalid_argument("unknown report format \"" + format +
                                "\"; valid formats: markdown csv");
  }
  return out.str();
}

std::string render_report(const EvalReport& report, const std::string& format) {
  return render_comparison({{"run", report}}, format);
}

}  // namespace kpseq

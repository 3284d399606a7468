#include <doctest.h>

#include <set>

#include "kpseq/evaluation.hpp"
#include "kpseq/rng.hpp"

using namespace kpseq;

namespace {

std::vector<Phrase> phrases(std::initializer_list<const char*> words) {
  std::vector<Phrase> out;
  for (const char* w : words) out.push_back(tokenize(w));
  return out;
}

PredictionRecord record(std::vector<Phrase> preds, std::vector<Phrase> gold_present,
                        std::vector<Phrase> gold_absent, std::vector<Token> source) {
  PredictionRecord r;
  r.id = "r";
  r.predictions = std::move(preds);
  r.gold_present = std::move(gold_present);
  r.gold_absent = std::move(gold_absent);
  r.source_tokens = std::move(source);
  r.beams = 2;
  r.mean_beam_len = 4.0;
  r.unique_kp = static_cast<int>(r.predictions.size());
  r.total_kp = r.unique_kp;
  return r;
}

}  // namespace

TEST_SUITE_BEGIN("evaluation");

TEST_CASE("phrase_match uses stemmed equality") {
  CHECK(phrase_match({"neural", "networks"}, {"neural", "network"}));
  CHECK_FALSE(phrase_match({"neural"}, {"neural", "network"}));
  CHECK(phrase_match({}, {}));
  CHECK(phrase_match({"Caresses"}, {"caress"}));
}

TEST_CASE("prf_at_k hand-worked fixtures") {
  // 5 predictions, 2 correct, 4 gold
  std::vector<Phrase> preds = phrases({"a", "b", "c", "d", "e"});
  std::vector<Phrase> gold = phrases({"a", "c", "x", "y"});
  MetricResult r = prf_at_k(preds, gold, 5);
  CHECK(r.precision == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(r.recall == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.f1 == doctest::Approx(4.0 / 9.0).epsilon(1e-12));

  // 3 predictions: F@5 equals F@10 because the denominator is min(k, |pred|)
  std::vector<Phrase> three = phrases({"a", "q", "c"});
  MetricResult at5 = prf_at_k(three, gold, 5);
  MetricResult at10 = prf_at_k(three, gold, 10);
  CHECK(at5.precision == at10.precision);
  CHECK(at5.recall == at10.recall);
  CHECK(at5.f1 == at10.f1);
  CHECK(at5.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  // no predictions
  MetricResult zero = prf_at_k({}, gold, 5);
  CHECK(zero.precision == 0.0);
  CHECK(zero.recall == 0.0);
  CHECK(zero.f1 == 0.0);

  CHECK_THROWS_AS(prf_at_k(preds, gold, 0), std::invalid_argument);
  CHECK_THROWS_AS(prf_at_k(preds, gold, -3), std::invalid_argument);
}

TEST_CASE("one-to-one matching never double counts gold") {
  std::vector<Phrase> preds = phrases({"a", "a", "a"});
  std::vector<Phrase> gold = phrases({"a"});
  MetricResult r = prf_at_k(preds, gold, 3);
  CHECK(r.recall == 1.0);
  CHECK(r.precision == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("recall_at_k fixtures") {
  std::vector<Phrase> gold_absent = phrases({"p q", "r"});
  std::vector<Phrase> preds = phrases({"z", "p q", "m", "n", "o", "u", "v", "w", "x", "y"});
  MetricResult r = recall_at_k(preds, gold_absent, 10);
  CHECK(r.recall == doctest::Approx(0.5).epsilon(1e-12));

  // fewer than 10 predictions: R@10 == R@50
  std::vector<Phrase> small = phrases({"p q", "z"});
  CHECK(recall_at_k(small, gold_absent, 10).recall == recall_at_k(small, gold_absent, 50).recall);
}

TEST_CASE("partition_predictions splits on the source and keeps rank order") {
  Document doc = Document::make("d", {}, {"a", "b"}, {});
  auto [present, absent] = partition_predictions(phrases({"a", "z"}), doc);
  CHECK(present == phrases({"a"}));
  CHECK(absent == phrases({"z"}));

  auto [p2, a2] = partition_predictions(phrases({"q", "a b", "b"}), doc);
  CHECK(p2 == phrases({"a b", "b"}));  // order preserved
  CHECK(a2 == phrases({"q"}));

  auto [p3, a3] = partition_predictions(phrases({"a", "b"}), doc);
  CHECK(a3.empty());
}

TEST_CASE("evaluate_dataset macro averages and skip rules") {
  std::vector<PredictionRecord> records;
  // doc 1: present gold {a}, predicted present {a} -> F1@5 = 1; absent gold empty (skipped)
  records.push_back(record(phrases({"a"}), phrases({"a"}), {}, {"a", "b"}));
  // doc 2: present gold {c}, predictions miss entirely -> F1@5 = 0; absent {q} hit at rank 1
  records.push_back(record(phrases({"q", "c"}), phrases({"c"}), phrases({"q"}), {"a", "b"}));
  // note: "c" is not in doc 2's source, so it lands in the absent side of the
  // prediction partition and cannot match the present gold
  DatasetEval eval = evaluate_dataset("unit", records, {5}, {10});
  CHECK(eval.present.at(5).docs == 2);
  CHECK(eval.present.at(5).f1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(eval.absent.at(10).docs == 1);
  CHECK(eval.absent.at(10).recall == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(eval.stats.mean_beams == doctest::Approx(2.0));

  CHECK_THROWS_AS(evaluate_dataset("empty", {}, {5}, {10}), std::invalid_argument);
}

TEST_CASE("macro_report averages dataset averages") {
  std::vector<PredictionRecord> ds1 = {record(phrases({"a"}), phrases({"a"}), {}, {"a"})};
  std::vector<PredictionRecord> ds2 = {record(phrases({"z"}), phrases({"c"}), {}, {"c"})};
  DatasetEval e1 = evaluate_dataset("one", ds1, {5}, {});
  DatasetEval e2 = evaluate_dataset("two", ds2, {5}, {});
  EvalReport report = macro_report({e1, e2});
  CHECK(report.average.present.at(5).f1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(report.average.present.at(5).docs == 2);

  // two docs with F1 {0.2-ish, 0.4-ish}: mean of per-document scores
  std::vector<PredictionRecord> pair = {
      record(phrases({"a", "x", "y", "z", "w"}), phrases({"a", "b", "c", "d", "e"}), {},
             {"a", "b", "c", "d", "e", "x", "y", "z", "w"}),
      record(phrases({"a", "b", "x", "y", "z"}), phrases({"a", "b", "c", "d", "e"}), {},
             {"a", "b", "c", "d", "e", "x", "y", "z"}),
  };
  DatasetEval both = evaluate_dataset("pair", pair, {5}, {});
  double f1_one = prf_at_k(pair[0].predictions, pair[0].gold_present, 5).f1;
  double f1_two = prf_at_k(pair[1].predictions, pair[1].gold_present, 5).f1;
  CHECK(both.present.at(5).f1 == doctest::Approx((f1_one + f1_two) / 2).epsilon(1e-12));
}

TEST_CASE("macro_report rejects zero contributing documents") {
  std::vector<PredictionRecord> records = {record(phrases({"a"}), {}, {}, {"a"})};
  DatasetEval eval = evaluate_dataset("none", records, {5}, {10});
  CHECK_THROWS_AS(macro_report({eval}), std::runtime_error);
}

TEST_CASE("compute_stats means") {
  std::vector<PredictionRecord> records;
  PredictionRecord a = record({}, {}, {}, {});
  a.beams = 2;
  PredictionRecord b = record({}, {}, {}, {});
  b.beams = 4;
  records = {a, b};
  CHECK(compute_stats(records).mean_beams == doctest::Approx(3.0));
  CHECK_THROWS_AS(compute_stats({}), std::invalid_argument);
}

TEST_CASE("score formatting rounds half-up to three decimals") {
  CHECK(format_score(0.3444) == "0.344");
  CHECK(format_score(0.3445) == "0.345");
  CHECK(format_score(4.0 / 9.0) == "0.444");
  CHECK(format_score(0.0) == "0.000");
  CHECK(format_score(1.0) == "1.000");
  CHECK(format_score(23.729999) == "23.730");
}

TEST_CASE("render formats") {
  std::vector<PredictionRecord> records = {record(phrases({"a"}), phrases({"a"}), {}, {"a"})};
  EvalReport report = macro_report({evaluate_dataset("unit", records, {5, 10}, {})});
  std::string md = render_report(report, "markdown");
  CHECK(md.find("| Method |") != std::string::npos);
  CHECK(md.find("unit F1@5") != std::string::npos);
  CHECK(md.find("1.000") != std::string::npos);
  std::string csv = render_report(report, "csv");
  CHECK(csv.find("method,unit-f1@5,unit-f1@10,average-f1@5,average-f1@10") == 0);
  CHECK_THROWS_AS(render_report(report, "xml"), std::invalid_argument);
  CHECK_THROWS_AS(render_report(EvalReport{}, "markdown"), std::invalid_argument);

  // identical inputs render identical bytes
  CHECK(render_report(report, "markdown") == md);
}

TEST_CASE("duplicate injection never changes @k scores") {
  Rng rng(404);
  for (int iter = 0; iter < 50; iter++) {
    std::vector<Phrase> gold;
    int n_gold = 1 + rng.uniform_int(6);
    for (int i = 0; i < n_gold; i++) {
      gold.push_back({"g" + std::to_string(rng.uniform_int(8))});
    }
    std::vector<Phrase> preds;
    int n_pred = rng.uniform_int(8);
    for (int i = 0; i < n_pred; i++) {
      preds.push_back({"g" + std::to_string(rng.uniform_int(12))});
    }
    // dedup'd baseline
    std::vector<Phrase> unique;
    std::set<Phrase> seen;
    for (const auto& p : preds) {
      if (seen.insert(stem_phrase(p)).second) unique.push_back(p);
    }
    for (int k : {1, 5, 10}) {
      MetricResult base = prf_at_k(unique, gold, k);
      // duplicates appended after the unique list cannot inflate correct@k
      std::vector<Phrase> with_dups = unique;
      for (const auto& p : unique) with_dups.push_back(p);
      MetricResult dup = prf_at_k(with_dups, gold, k);
      size_t top_base = std::min<size_t>(static_cast<size_t>(k), unique.size());
      size_t top_dup = std::min<size_t>(static_cast<size_t>(k), with_dups.size());
      if (top_base == top_dup) {
        CHECK(dup.precision == base.precision);
        CHECK(dup.recall == base.recall);
      } else {
        // extra duplicate slots can only add non-matching predictions
        CHECK(dup.recall == base.recall);
      }
    }
  }
}

TEST_CASE("cutoff locality: ranks beyond k cannot change @k") {
  Rng rng(505);
  for (int iter = 0; iter < 50; iter++) {
    std::vector<Phrase> gold = {{"a"}, {"b"}, {"c"}};
    std::vector<Phrase> preds;
    for (int i = 0; i < 7; i++) preds.push_back({std::string(1, static_cast<char>('a' + rng.uniform_int(6)))});
    std::vector<Phrase> unique;
    std::set<Phrase> seen;
    for (const auto& p : preds) {
      if (seen.insert(p).second) unique.push_back(p);
    }
    int k = 3;
    MetricResult before = prf_at_k(unique, gold, k);
    std::vector<Phrase> changed = unique;
    if (static_cast<int>(changed.size()) > k) {
      changed.resize(static_cast<size_t>(k));
      changed.push_back({"zzz"});
      MetricResult after = prf_at_k(changed, gold, k);
      CHECK(after.precision == before.precision);
      CHECK(after.recall == before.recall);
      CHECK(after.f1 == before.f1);
    }
  }
}

TEST_CASE("score bounds") {
  Rng rng(606);
  for (int iter = 0; iter < 100; iter++) {
    std::vector<Phrase> gold, preds;
    int n_gold = 1 + rng.uniform_int(5);
    for (int i = 0; i < n_gold; i++) gold.push_back({"g" + std::to_string(rng.uniform_int(6))});
    int n_pred = rng.uniform_int(8);
    for (int i = 0; i < n_pred; i++) preds.push_back({"g" + std::to_string(rng.uniform_int(10))});
    MetricResult r = prf_at_k(preds, gold, 1 + rng.uniform_int(10));
    CHECK(r.precision >= 0.0);
    CHECK(r.precision <= 1.0);
    CHECK(r.recall >= 0.0);
    CHECK(r.recall <= 1.0);
    CHECK(r.f1 <= 2.0 * r.precision + 1e-12);
    CHECK(r.f1 <= 2.0 * r.recall + 1e-12);
    if (r.f1 == 0.0) CHECK((r.precision == 0.0 || r.recall == 0.0));
  }
}

TEST_SUITE_END();

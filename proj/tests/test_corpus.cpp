#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "kpseq/corpus.hpp"
#include "kpseq/rng.hpp"

using namespace kpseq;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

Document doc_from(const std::vector<Token>& source, const std::vector<Phrase>& gold) {
  return Document::make("d", {}, source, gold);
}

}  // namespace

TEST_SUITE_BEGIN("corpus");

TEST_CASE("document source is title then abstract") {
  Document d = Document::make("x", {"a", "b"}, {"c"}, {{{"a"}}});
  CHECK(d.source_tokens == std::vector<Token>{"a", "b", "c"});
}

TEST_CASE("split_present_absent spec examples") {
  {
    PhrasePartition p = split_present_absent(doc_from({"a", "b", "c"}, {{"b", "c"}, {"x"}}));
    REQUIRE(p.present.size() == 1);
    CHECK(p.present[0].phrase == Phrase{"b", "c"});
    CHECK(p.present[0].first_occurrence == 1);
    REQUIRE(p.absent.size() == 1);
    CHECK(p.absent[0] == Phrase{"x"});
  }
  {
    PhrasePartition p = split_present_absent(doc_from({"a", "b", "a", "b"}, {{"a", "b"}}));
    REQUIRE(p.present.size() == 1);
    CHECK(p.present[0].first_occurrence == 0);  // earliest match
  }
  {
    PhrasePartition p =
        split_present_absent(doc_from({"neural", "networks"}, {{"neural", "network"}}));
    REQUIRE(p.present.size() == 1);  // stemmed match
    CHECK(p.present[0].first_occurrence == 0);
  }
}

TEST_CASE("split dedups by stemmed form") {
  PhrasePartition p =
      split_present_absent(doc_from({"x"}, {{"network"}, {"networks"}, {"network"}}));
  CHECK(p.present.size() + p.absent.size() == 1);
}

TEST_CASE("partition totality and occurrence soundness on random docs") {
  Rng rng(41);
  for (int iter = 0; iter < 50; iter++) {
    SyntheticSpec spec;
    spec.num_docs = 1;
    spec.vocab_pool = 60;
    spec.doc_len_min = 8;
    spec.doc_len_max = 20;
    spec.phrases_min = 2;
    spec.phrases_max = 5;
    spec.absent_fraction = 0.4;
    spec.seed = rng.next_u64();
    Document doc = generate_synthetic(spec)[0];
    PhrasePartition p = split_present_absent(doc);

    std::set<Phrase> distinct;
    for (const auto& g : doc.gold_phrases) distinct.insert(stem_phrase(g));
    CHECK(p.present.size() + p.absent.size() == distinct.size());

    std::vector<Token> stems;
    for (const auto& t : doc.source_tokens) stems.push_back(stem(t));
    for (const auto& pp : p.present) {
      Phrase ps = stem_phrase(pp.phrase);
      REQUIRE(pp.first_occurrence + ps.size() <= stems.size());
      for (size_t k = 0; k < ps.size(); k++) {
        CHECK(stems[static_cast<size_t>(pp.first_occurrence) + k] == ps[k]);
      }
      // minimality
      int found = -1;
      CHECK(find_stemmed(stems, ps, &found));
      CHECK(found == pp.first_occurrence);
    }
  }
}

TEST_CASE("build_vocabulary frequency, ties and truncation") {
  std::vector<Document> docs = {doc_from({"a", "a", "a", "b"}, {})};
  Vocabulary v = build_vocabulary(docs, 7);
  CHECK(v.size() == 7);
  CHECK(v.id_of("a") == 5);
  CHECK(v.id_of("b") == 6);

  Vocabulary small = build_vocabulary(docs, 6);
  CHECK(small.size() == 6);
  CHECK(small.id_of("b") == kUnk);

  std::vector<Document> tied = {doc_from({"b", "a", "b", "a"}, {})};
  Vocabulary tv = build_vocabulary(tied, 10);
  CHECK(tv.id_of("a") == 5);  // lexicographic tie-break
  CHECK(tv.id_of("b") == 6);
}

TEST_CASE("vocabulary counts gold phrase tokens too") {
  std::vector<Document> docs = {doc_from({"a"}, {{"q", "q", "q"}})};
  Vocabulary v = build_vocabulary(docs, 10);
  CHECK(v.id_of("q") == 5);
}

TEST_CASE("vocabulary specials and round trip") {
  Vocabulary v = build_vocabulary({}, 100);
  CHECK(v.size() == kNumSpecials);
  CHECK(v.token_of(kPad) == "<pad>");
  CHECK(v.token_of(kUnk) == "<unk>");
  CHECK(v.token_of(kBos) == "<bos>");
  CHECK(v.token_of(kEos) == "<eos>");
  CHECK(v.token_of(kSep) == "<sep>");
  CHECK_THROWS(build_vocabulary({}, kNumSpecials));

  std::vector<Document> docs = {doc_from({"gamma", "beta", "beta"}, {})};
  Vocabulary built = build_vocabulary(docs, 50);
  for (int i = 0; i < built.size(); i++) CHECK(built.id_of(built.token_of(i)) == i);

  auto path = write_temp("kpseq_vocab_test.txt", "");
  built.save(path);
  Vocabulary loaded = Vocabulary::load(path);
  CHECK(loaded.size() == built.size());
  for (int i = 0; i < built.size(); i++) CHECK(loaded.token_of(i) == built.token_of(i));
  std::remove(path.c_str());
}

TEST_CASE("load_jsonl spec examples") {
  auto path = write_temp("kpseq_corpus_ok.jsonl",
                         R"({"title":"t","abstract":"a","keywords":"x;y z"})" "\n");
  std::vector<Document> docs = load_jsonl(path);
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].gold_phrases == std::vector<Phrase>{{"x"}, {"y", "z"}});
  CHECK(docs[0].source_tokens == std::vector<Token>{"t", "a"});
  CHECK(docs[0].id == "1");
  std::remove(path.c_str());

  auto empty = write_temp("kpseq_corpus_empty.jsonl", "");
  CHECK(load_jsonl(empty).empty());
  std::remove(empty.c_str());

  auto bad = write_temp("kpseq_corpus_bad.jsonl", "not json\n");
  CHECK_THROWS_WITH_AS(load_jsonl(bad), doctest::Contains("line 1"), std::runtime_error);
  std::remove(bad.c_str());

  auto missing = write_temp("kpseq_corpus_missing.jsonl", R"({"title":"t","keywords":""})" "\n");
  CHECK_THROWS_WITH_AS(load_jsonl(missing), doctest::Contains("abstract"), std::runtime_error);
  std::remove(missing.c_str());
}

TEST_CASE("jsonl round trip preserves documents") {
  SyntheticSpec spec;
  spec.num_docs = 5;
  spec.vocab_pool = 40;
  spec.seed = 3;
  std::vector<Document> docs = generate_synthetic(spec);
  auto path = write_temp("kpseq_corpus_rt.jsonl", "");
  save_jsonl(docs, path);
  std::vector<Document> loaded = load_jsonl(path);
  REQUIRE(loaded.size() == docs.size());
  for (size_t i = 0; i < docs.size(); i++) {
    CHECK(loaded[i].id == docs[i].id);
    CHECK(loaded[i].source_tokens == docs[i].source_tokens);
    CHECK(loaded[i].gold_phrases == docs[i].gold_phrases);
  }
  std::remove(path.c_str());
}

TEST_CASE("generate_synthetic determinism and construction") {
  SyntheticSpec spec;
  spec.num_docs = 100;
  spec.vocab_pool = 120;
  spec.seed = 7;

  std::vector<Document> a = generate_synthetic(spec);
  std::vector<Document> b = generate_synthetic(spec);
  REQUIRE(a.size() == 100);
  for (size_t i = 0; i < a.size(); i++) {
    CHECK(a[i].source_tokens == b[i].source_tokens);
    CHECK(a[i].gold_phrases == b[i].gold_phrases);
  }

  spec.absent_fraction = 0.0;
  for (const auto& doc : generate_synthetic(spec)) {
    PhrasePartition p = split_present_absent(doc);
    CHECK(p.absent.empty());
  }
}

TEST_CASE("generate_synthetic recovers the intended partition") {
  SyntheticSpec spec;
  spec.num_docs = 30;
  spec.vocab_pool = 80;
  spec.absent_fraction = 0.5;
  spec.seed = 11;
  for (const auto& doc : generate_synthetic(spec)) {
    PhrasePartition p = split_present_absent(doc);
    // absent phrases draw on a token pool disjoint from the source
    std::set<Token> source(doc.source_tokens.begin(), doc.source_tokens.end());
    for (const auto& ab : p.absent) {
      for (const auto& t : ab) CHECK(source.count(t) == 0);
    }
    CHECK(p.present.size() + p.absent.size() == doc.gold_phrases.size());
  }
}

TEST_CASE("generate_synthetic rejects bad specs") {
  SyntheticSpec spec;
  spec.num_docs = 0;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec = SyntheticSpec{};
  spec.absent_fraction = 1.5;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec = SyntheticSpec{};
  spec.doc_len_min = 10;
  spec.doc_len_max = 5;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec = SyntheticSpec{};
  spec.doc_len_min = 1;  // cannot fit multi-token phrases
  spec.doc_len_max = 1;
  spec.phrases_min = 3;
  spec.phrases_max = 3;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
}

TEST_SUITE_END();

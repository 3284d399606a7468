#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "kpseq/ordering.hpp"

using namespace kpseq;

namespace {

std::multiset<Phrase> as_multiset(const std::vector<Phrase>& v) {
  return {v.begin(), v.end()};
}

PhrasePartition partition_of(const std::vector<std::pair<Phrase, int>>& present,
                             const std::vector<Phrase>& absent) {
  PhrasePartition p;
  for (const auto& [phrase, pos] : present) p.present.push_back({phrase, pos});
  p.absent = absent;
  return p;
}

// random docs for property sweeps
struct RandomCase {
  PhrasePartition partition;
  std::vector<Phrase> original;
};

RandomCase random_case(Rng& rng) {
  RandomCase rc;
  int n = 1 + rng.uniform_int(8);
  std::set<Phrase> used;
  for (int i = 0; i < n; i++) {
    Phrase p;
    int len = 1 + rng.uniform_int(3);
    for (int j = 0; j < len; j++) {
      p.push_back(std::string(1, static_cast<char>('a' + rng.uniform_int(6))) +
                  static_cast<char>('k' + rng.uniform_int(6)));
    }
    if (!used.insert(p).second) continue;
    rc.original.push_back(p);
    if (rng.uniform() < 0.6) {
      rc.partition.present.push_back({p, rng.uniform_int(50)});
    } else {
      rc.partition.absent.push_back(p);
    }
  }
  return rc;
}

}  // namespace

TEST_SUITE_BEGIN("ordering");

TEST_CASE("strategy names round trip") {
  for (OrderingStrategy s : all_orderings()) {
    CHECK(ordering_from_name(ordering_name(s)) == s);
  }
  CHECK_THROWS_WITH_AS(ordering_from_name("sideways"), doctest::Contains("appear-ap"),
                       std::invalid_argument);
}

TEST_CASE("alpha ordering spec example") {
  std::vector<Phrase> in = {{"neural", "nets"}, {"attention"}, {"beam", "search"}};
  Rng rng(0);
  auto out = order_phrases(OrderingStrategy::kAlpha, {}, in, rng);
  CHECK(out == std::vector<Phrase>{{"attention"}, {"beam", "search"}, {"neural", "nets"}});
}

TEST_CASE("length ordering is a stable sort") {
  std::vector<Phrase> in = {{"a", "b"}, {"c"}, {"d", "e"}};
  Rng rng(0);
  auto out = order_phrases(OrderingStrategy::kLength, {}, in, rng);
  CHECK(out == std::vector<Phrase>{{"c"}, {"a", "b"}, {"d", "e"}});
}

TEST_CASE("appear-ap spec example") {
  PhrasePartition part = partition_of({{{"c"}, 2}, {{"a", "b"}, 0}}, {{"x"}});
  std::vector<Phrase> original = {{"c"}, {"a", "b"}, {"x"}};
  Rng rng(5);
  auto out = order_phrases(OrderingStrategy::kAppearAp, part, original, rng);
  CHECK(out == std::vector<Phrase>{{"a", "b"}, {"c"}, {"x"}});
}

TEST_CASE("appear-pre puts shuffled absent first") {
  PhrasePartition part = partition_of({{{"p"}, 3}, {{"q"}, 1}}, {{"x"}, {"y"}});
  std::vector<Phrase> original = {{"p"}, {"q"}, {"x"}, {"y"}};
  Rng rng(5);
  auto out = order_phrases(OrderingStrategy::kAppearPre, part, original, rng);
  REQUIRE(out.size() == 4);
  CHECK(out[2] == Phrase{"q"});
  CHECK(out[3] == Phrase{"p"});
  std::multiset<Phrase> head = {out[0], out[1]};
  CHECK(head == std::multiset<Phrase>{{"x"}, {"y"}});
}

TEST_CASE("no-sort keeps author order and empty input is fine") {
  std::vector<Phrase> in = {{"b"}, {"a"}};
  Rng rng(0);
  CHECK(order_phrases(OrderingStrategy::kNoSort, {}, in, rng) == in);
  CHECK(order_phrases(OrderingStrategy::kRandom, {}, {}, rng).empty());
}

TEST_CASE("ordering properties hold over random cases") {
  Rng master(2024);
  for (int iter = 0; iter < 300; iter++) {
    RandomCase rc = random_case(master);
    uint64_t seed = master.next_u64();
    for (OrderingStrategy s : all_orderings()) {
      CAPTURE(static_cast<int>(s));
      Rng r1(seed), r2(seed);
      auto out = order_phrases(s, rc.partition, rc.original, r1);
      auto out2 = order_phrases(s, rc.partition, rc.original, r2);
      CHECK(out == out2);  // seeded determinism
      CHECK(as_multiset(out) == as_multiset(rc.original));  // permutation

      if (s == OrderingStrategy::kLength) {
        for (size_t i = 1; i < out.size(); i++) CHECK(out[i - 1].size() <= out[i].size());
      }
      if (s == OrderingStrategy::kAlpha) {
        for (size_t i = 1; i < out.size(); i++) CHECK(out[i - 1][0] <= out[i][0]);
      }
      if (s == OrderingStrategy::kAppearPre || s == OrderingStrategy::kAppearAp) {
        // present phrases in nondecreasing first-occurrence order
        std::map<Phrase, int> occurrence;
        for (const auto& pp : rc.partition.present) occurrence[pp.phrase] = pp.first_occurrence;
        int last = -1;
        for (const auto& p : out) {
          auto it = occurrence.find(p);
          if (it == occurrence.end()) continue;
          CHECK(it->second >= last);
          last = it->second;
        }
      }
    }
    // seed-independence of the deterministic strategies
    for (OrderingStrategy s : {OrderingStrategy::kNoSort, OrderingStrategy::kLength,
                               OrderingStrategy::kAlpha}) {
      Rng ra(1), rb(999);
      CHECK(order_phrases(s, rc.partition, rc.original, ra) ==
            order_phrases(s, rc.partition, rc.original, rb));
    }
  }
}

TEST_CASE("encode_source spec examples") {
  Vocabulary v;
  v.add("a");
  Document d = Document::make("x", {}, {"a", "zzz", "a", "yyy", "zzz"}, {});
  SourceEncoding enc = encode_source(d, v);
  CHECK(enc.ids == std::vector<int>{v.id_of("a"), v.size() + 0, v.id_of("a"), v.size() + 1,
                                    v.size() + 0});
  CHECK(enc.oov == std::vector<Token>{"zzz", "yyy"});

  Document in_vocab = Document::make("y", {}, {"a", "a"}, {});
  CHECK(encode_source(in_vocab, v).oov.empty());

  Document empty = Document::make("z", {}, {}, {});
  SourceEncoding enc_empty = encode_source(empty, v);
  CHECK(enc_empty.ids.empty());
  CHECK(enc_empty.oov.empty());
}

TEST_CASE("assemble_target spec examples") {
  Vocabulary v;
  v.add("a");
  v.add("b");
  v.add("c");
  Document d = Document::make("x", {}, {"zzz"}, {});

  TargetSequence t1 = assemble_target({{"a"}, {"b", "c"}}, v, d);
  CHECK(t1.ids == std::vector<int>{v.id_of("a"), kSep, v.id_of("b"), v.id_of("c"), kEos});
  CHECK(t1.phrase_count == 2);

  TargetSequence t2 = assemble_target({}, v, d);
  CHECK(t2.ids == std::vector<int>{kEos});

  TargetSequence t3 = assemble_target({{"zzz"}}, v, d);
  CHECK(t3.ids == std::vector<int>{v.size() + 0, kEos});

  TargetSequence t4 = assemble_target({{"unseen"}}, v, d);
  CHECK(t4.ids == std::vector<int>{kUnk, kEos});
}

TEST_CASE("target length invariant and SEP round trip") {
  Rng rng(17);
  Vocabulary v;
  for (char c = 'a'; c <= 'j'; c++) v.add(std::string(1, c));
  for (int iter = 0; iter < 100; iter++) {
    int n = rng.uniform_int(5);
    std::vector<Phrase> phrases;
    size_t token_sum = 0;
    for (int i = 0; i < n; i++) {
      Phrase p;
      int len = 1 + rng.uniform_int(3);
      for (int j = 0; j < len; j++) p.push_back(std::string(1, static_cast<char>('a' + rng.uniform_int(10))));
      token_sum += p.size();
      phrases.push_back(p);
    }
    Document d = Document::make("x", {}, {"a"}, {});
    TargetSequence t = assemble_target(phrases, v, d);
    size_t expect = token_sum + (n > 0 ? static_cast<size_t>(n) - 1 : 0) + 1;
    CHECK(t.ids.size() == expect);

    // splitting on SEP and dropping EOS recovers the ordered phrases
    std::vector<std::vector<int>> segments(1);
    for (int id : t.ids) {
      if (id == kEos) continue;
      if (id == kSep) {
        segments.emplace_back();
      } else {
        segments.back().push_back(id);
      }
    }
    if (n == 0) {
      CHECK(segments.size() == 1);
      CHECK(segments[0].empty());
    } else {
      REQUIRE(segments.size() == phrases.size());
      for (size_t i = 0; i < phrases.size(); i++) {
        REQUIRE(segments[i].size() == phrases[i].size());
        for (size_t j = 0; j < phrases[i].size(); j++) {
          CHECK(v.token_of(segments[i][j]) == phrases[i][j]);
        }
      }
    }
  }
}

TEST_SUITE_END();

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kpseq/corpus.hpp"
#include "kpseq/rng.hpp"

namespace kpseq {

enum class OrderingStrategy {
  kRandom,
  kNoSort,
  kLength,
  kAlpha,
  kAppearPre,
  kAppearAp,
};

constexpr int kNumOrderings = 6;

// Canonical CLI/config names: random, no-sort, length, alpha, appear-pre, appear-ap.
const std::string& ordering_name(OrderingStrategy s);
OrderingStrategy ordering_from_name(const std::string& name);  // throws on unknown
const std::vector<OrderingStrategy>& all_orderings();

// Gold phrases deduplicated by stemmed form, first occurrence kept, original
// order preserved. This is the phrase set every ordering permutes.
std::vector<Phrase> dedup_phrases(const std::vector<Phrase>& gold);

// The six concatenation orders. `original_order` must be consistent with
// `partition` (same dedup'd phrase set). Only Random and the absent part of
// Appear-Pre/Ap consume the rng.
std::vector<Phrase> order_phrases(OrderingStrategy strategy, const PhrasePartition& partition,
                                  const std::vector<Phrase>& original_order, Rng& rng);

struct SourceEncoding {
  std::vector<int> ids;        // extended ids: vocab id, or vocab.size()+oov index
  std::vector<Token> oov;      // distinct out-of-vocabulary source tokens, in order seen
};

SourceEncoding encode_source(const Document& doc, const Vocabulary& vocab);

struct TargetSequence {
  std::vector<int> ids;  // p1 SEP p2 SEP ... pn EOS, over the extended vocabulary
  int phrase_count = 0;
  OrderingStrategy ordering = OrderingStrategy::kNoSort;
  uint64_t rng_seed = 0;
};

// In-vocab tokens map to their ids, source OOV tokens to extended ids, and
// anything else to UNK.
TargetSequence assemble_target(const std::vector<Phrase>& ordered, const Vocabulary& vocab,
                               const SourceEncoding& source);
TargetSequence assemble_target(const std::vector<Phrase>& ordered, const Vocabulary& vocab,
                               const Document& doc);

}  // namespace kpseq

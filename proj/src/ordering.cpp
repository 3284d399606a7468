#include "kpseq/ordering.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace kpseq {

namespace {
const std::vector<std::string> kOrderingNames = {"random", "no-sort", "length",
                                                 "alpha",  "appear-pre", "appear-ap"};
}

const std::string& ordering_name(OrderingStrategy s) {
  return kOrderingNames[static_cast<size_t>(s)];
}

OrderingStrategy ordering_from_name(const std::string& name) {
  for (size_t i = 0; i < kOrderingNames.size(); i++) {
    if (kOrderingNames[i] == name) return static_cast<OrderingStrategy>(i);
  }
  std::string msg = "unknown ordering \"" + name + "\"; valid orderings:";
  for (const auto& n : kOrderingNames) msg += " " + n;
  throw std::invalid_argument(msg);
}

const std::vector<OrderingStrategy>& all_orderings() {
  static const std::vector<OrderingStrategy> all = {
      OrderingStrategy::kRandom,    OrderingStrategy::kNoSort, OrderingStrategy::kLength,
      OrderingStrategy::kAlpha,     OrderingStrategy::kAppearPre,
      OrderingStrategy::kAppearAp};
  return all;
}

std::vector<Phrase> dedup_phrases(const std::vector<Phrase>& gold) {
  std::vector<Phrase> out;
  std::set<Phrase> seen;
  for (const auto& p : gold) {
    if (p.empty()) continue;
    if (seen.insert(stem_phrase(p)).second) out.push_back(p);
  }
  return out;
}

namespace {

// first word, then second word, then original order via stable sort
bool alpha_less(const Phrase& a, const Phrase& b) {
  const std::string& a0 = a[0];
  const std::string& b0 = b[0];
  if (a0 != b0) return a0 < b0;
  const std::string a1 = a.size() > 1 ? a[1] : std::string();
  const std::string b1 = b.size() > 1 ? b[1] : std::string();
  return a1 < b1;
}

}  // namespace

std::vector<Phrase> order_phrases(OrderingStrategy strategy, const PhrasePartition& partition,
                                  const std::vector<Phrase>& original_order, Rng& rng) {
  switch (strategy) {
    case OrderingStrategy::kRandom: {
      std::vector<Phrase> out = original_order;
      rng.shuffle(out);
      return out;
    }
    case OrderingStrategy::kNoSort:
      return original_order;
    case OrderingStrategy::kLength: {
      std::vector<Phrase> out = original_order;
      std::stable_sort(out.begin(), out.end(),
                       [](const Phrase& a, const Phrase& b) { return a.size() < b.size(); });
      return out;
    }
    case OrderingStrategy::kAlpha: {
      std::vector<Phrase> out = original_order;
      std::stable_sort(out.begin(), out.end(), alpha_less);
      return out;
    }
    case OrderingStrategy::kAppearPre:
    case OrderingStrategy::kAppearAp: {
      std::vector<PresentPhrase> present = partition.present;
      std::stable_sort(present.begin(), present.end(),
                       [](const PresentPhrase& a, const PresentPhrase& b) {
                         return a.first_occurrence < b.first_occurrence;
                       });
      std::vector<Phrase> absent = partition.absent;
      rng.shuffle(absent);
      std::vector<Phrase> out;
      out.reserve(present.size() + absent.size());
      if (strategy == OrderingStrategy::kAppearPre) {
        out.insert(out.end(), absent.begin(), absent.end());
        for (auto& p : present) out.push_back(p.phrase);
      } else {
        for (auto& p : present) out.push_back(p.phrase);
        out.insert(out.end(), absent.begin(), absent.end());
      }
      return out;
    }
  }
  throw std::logic_error("unreachable ordering strategy");
}

SourceEncoding encode_source(const Document& doc, const Vocabulary& vocab) {
  SourceEncoding enc;
  enc.ids.reserve(doc.source_tokens.size());
  std::unordered_map<Token, int> oov_index;
  for (const auto& tok : doc.source_tokens) {
    if (vocab.contains(tok)) {
      enc.ids.push_back(vocab.id_of(tok));
    } else {
      auto [it, inserted] = oov_index.try_emplace(tok, static_cast<int>(enc.oov.size()));
      if (inserted) enc.oov.push_back(tok);
      enc.ids.push_back(vocab.size() + it->second);
    }
  }
  return enc;
}

TargetSequence assemble_target(const std::vector<Phrase>& ordered, const Vocabulary& vocab,
                               const SourceEncoding& source) {
  std::unordered_map<Token, int> oov_index;
  for (size_t i = 0; i < source.oov.size(); i++) oov_index[source.oov[i]] = static_cast<int>(i);

  TargetSequence target;
  target.phrase_count = static_cast<int>(ordered.size());
  for (size_t i = 0; i < ordered.size(); i++) {
    if (i) target.ids.push_back(kSep);
    for (const auto& tok : ordered[i]) {
      if (vocab.contains(tok)) {
        target.ids.push_back(vocab.id_of(tok));
      } else if (auto it = oov_index.find(tok); it != oov_index.end()) {
        target.ids.push_back(vocab.size() + it->second);
      } else {
        target.ids.push_back(kUnk);
      }
    }
  }
  target.ids.push_back(kEos);
  return target;
}

TargetSequence assemble_target(const std::vector<Phrase>& ordered, const Vocabulary& vocab,
                               const Document& doc) {
  return assemble_target(ordered, vocab, encode_source(doc, vocab));
}

}  // namespace kpseq

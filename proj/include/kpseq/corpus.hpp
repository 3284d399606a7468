#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kpseq/text.hpp"

namespace kpseq {

// One source text (title + abstract) with its gold keyphrases.
struct Document {
  std::string id;
  std::vector<Token> title_tokens;
  std::vector<Token> abstract_tokens;
  std::vector<Token> source_tokens;  // title followed by abstract
  std::vector<Phrase> gold_phrases;

  static Document make(std::string id, std::vector<Token> title,
                       std::vector<Token> abstract, std::vector<Phrase> gold);
};

struct PresentPhrase {
  Phrase phrase;
  int first_occurrence = 0;  // token index into source_tokens (stemmed match)
};

struct PhrasePartition {
  std::vector<PresentPhrase> present;
  std::vector<Phrase> absent;
};

// Reserved ids, fixed for every vocabulary.
enum SpecialToken : int {
  kPad = 0,
  kUnk = 1,
  kBos = 2,
  kEos = 3,
  kSep = 4,
  kNumSpecials = 5,
};

extern const char* const kSpecialNames[kNumSpecials];  // "<pad>", "<unk>", ...

class Vocabulary {
 public:
  Vocabulary();  // specials only

  // id of token, or kUnk
  int id_of(const Token& token) const;
  bool contains(const Token& token) const { return token_to_id_.count(token) > 0; }
  const Token& token_of(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }

  // Appends a non-special token; returns its id. Throws on duplicates.
  int add(const Token& token);

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::unordered_map<Token, int> token_to_id_;
  std::vector<Token> id_to_token_;
};

struct SyntheticSpec {
  int num_docs = 100;
  int vocab_pool = 300;
  int doc_len_min = 20;  // abstract length in tokens
  int doc_len_max = 40;
  int phrases_min = 3;
  int phrases_max = 6;
  double absent_fraction = 0.2;
  uint64_t seed = 0;
};

// Dedups gold phrases by stemmed form and classifies each as present
// (contiguous stemmed match in source, earliest index) or absent.
PhrasePartition split_present_absent(const Document& doc);

// True iff the stemmed phrase occurs contiguously in the stemmed source;
// when found, *first sets the earliest match start.
bool find_stemmed(const std::vector<Token>& source_stems, const Phrase& phrase_stems,
                  int* first = nullptr);

// Specials first, then corpus tokens (source + gold) by descending frequency,
// ties broken lexicographically, truncated to max_size.
Vocabulary build_vocabulary(const std::vector<Document>& docs, int max_size);

// One JSON object per line with string fields "title", "abstract",
// "keywords" (semicolon-separated) and optional "id".
std::vector<Document> load_jsonl(const std::string& path);
void save_jsonl(const std::vector<Document>& docs, const std::string& path);

std::vector<Document> generate_synthetic(const SyntheticSpec& spec);

}  // namespace kpseq

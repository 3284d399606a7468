#include "kpseq/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "kpseq/rng.hpp"

namespace kpseq {

const char* const kSpecialNames[kNumSpecials] = {"<pad>", "<unk>", "<bos>", "<eos>", "<sep>"};

Document Document::make(std::string id, std::vector<Token> title,
                        std::vector<Token> abstract, std::vector<Phrase> gold) {
  Document d;
  d.id = std::move(id);
  d.title_tokens = std::move(title);
  d.abstract_tokens = std::move(abstract);
  d.source_tokens = d.title_tokens;
  d.source_tokens.insert(d.source_tokens.end(), d.abstract_tokens.begin(),
                         d.abstract_tokens.end());
  for (const auto& p : gold) {
    if (p.empty()) continue;  // gold phrases are non-empty by contract
    d.gold_phrases.push_back(p);
  }
  return d;
}

Vocabulary::Vocabulary() {
  for (int i = 0; i < kNumSpecials; i++) {
    id_to_token_.emplace_back(kSpecialNames[i]);
    token_to_id_[kSpecialNames[i]] = i;
  }
}

int Vocabulary::id_of(const Token& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const Token& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocabulary id out of range");
  return id_to_token_[static_cast<size_t>(id)];
}

int Vocabulary::add(const Token& token) {
  if (token_to_id_.count(token)) throw std::invalid_argument("duplicate vocabulary token: " + token);
  int id = size();
  id_to_token_.push_back(token);
  token_to_id_[token] = id;
  return id;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
  for (const auto& tok : id_to_token_) out << tok << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocabulary file: " + path);
  Vocabulary v;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    if (line_no < kNumSpecials) {
      if (line != kSpecialNames[line_no]) {
        throw std::runtime_error("vocabulary file " + path + ": line " +
                                 std::to_string(line_no) + " must be " + kSpecialNames[line_no]);
      }
    } else {
      v.add(line);
    }
    line_no++;
  }
  if (line_no < kNumSpecials) {
    throw std::runtime_error("vocabulary file " + path + ": missing special tokens");
  }
  return v;
}

bool find_stemmed(const std::vector<Token>& source_stems, const Phrase& phrase_stems,
                  int* first) {
  if (phrase_stems.empty() || phrase_stems.size() > source_stems.size()) return false;
  size_t n = source_stems.size() - phrase_stems.size();
  for (size_t start = 0; start <= n; start++) {
    bool match = true;
    for (size_t k = 0; k < phrase_stems.size(); k++) {
      if (source_stems[start + k] != phrase_stems[k]) {
        match = false;
        break;
      }
    }
    if (match) {
      if (first) *first = static_cast<int>(start);
      return true;
    }
  }
  return false;
}

PhrasePartition split_present_absent(const Document& doc) {
  std::vector<Token> source_stems;
  source_stems.reserve(doc.source_tokens.size());
  for (const auto& t : doc.source_tokens) source_stems.push_back(stem(t));

  PhrasePartition part;
  std::set<Phrase> seen;  // stemmed forms, for dedup
  for (const auto& phrase : doc.gold_phrases) {
    Phrase stems = stem_phrase(phrase);
    if (!seen.insert(stems).second) continue;
    int pos = 0;
    if (find_stemmed(source_stems, stems, &pos)) {
      part.present.push_back({phrase, pos});
    } else {
      part.absent.push_back(phrase);
    }
  }
  return part;
}

Vocabulary build_vocabulary(const std::vector<Document>& docs, int max_size) {
  if (max_size <= kNumSpecials) {
    throw std::invalid_argument("vocabulary max_size must exceed the number of special tokens");
  }
  std::map<Token, int64_t> freq;  // ordered: lexicographic tie-break falls out of stable sort
  for (const auto& doc : docs) {
    for (const auto& t : doc.source_tokens) freq[t]++;
    for (const auto& p : doc.gold_phrases) {
      for (const auto& t : p) freq[t]++;
    }
  }
  std::vector<std::pair<Token, int64_t>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  for (const auto& [tok, count] : items) {
    (void)count;
    if (v.size() >= max_size) break;
    if (!v.contains(tok)) v.add(tok);
  }
  return v;
}

namespace {

std::vector<Phrase> parse_keywords(const std::string& raw) {
  std::vector<Phrase> phrases;
  std::string piece;
  std::stringstream ss(raw);
  while (std::getline(ss, piece, ';')) {
    Phrase p = tokenize(piece);
    if (!p.empty()) phrases.push_back(std::move(p));
  }
  return phrases;
}

std::string require_string_field(const nlohmann::json& obj, const char* name, int line_no) {
  if (!obj.contains(name)) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": missing field \"" +
                             name + "\"");
  }
  if (!obj[name].is_string()) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": field \"" + name +
                             "\" must be a string");
  }
  return obj[name].get<std::string>();
}

}  // namespace

std::vector<Document> load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<Document> docs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(path + ": parse error at line " + std::to_string(line_no) +
                               ": " + e.what());
    }
    std::string title = require_string_field(obj, "title", line_no);
    std::string abstract = require_string_field(obj, "abstract", line_no);
    std::string keywords = require_string_field(obj, "keywords", line_no);
    std::string id = obj.contains("id") && obj["id"].is_string()
                         ? obj["id"].get<std::string>()
                         : std::to_string(line_no);
    docs.push_back(Document::make(id, tokenize(title), tokenize(abstract),
                                  parse_keywords(keywords)));
  }
  return docs;
}

void save_jsonl(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const auto& doc : docs) {
    nlohmann::json obj;
    obj["id"] = doc.id;
    obj["title"] = join(doc.title_tokens);
    obj["abstract"] = join(doc.abstract_tokens);
    std::string kw;
    for (size_t i = 0; i < doc.gold_phrases.size(); i++) {
      if (i) kw += ";";
      kw += join(doc.gold_phrases[i]);
    }
    obj["keywords"] = kw;
    out << obj.dump() << '\n';
  }
}

namespace {

// Lowercase alphabetic tokens that are Porter fixed points, so stemming can
// never alias two distinct pool tokens.
std::vector<Token> make_token_pool(int n) {
  static const char* consonants = "bcdfghjklmnpqrtvw";
  static const char* vowels = "aiou";
  std::vector<Token> pool;
  for (int len = 3; static_cast<int>(pool.size()) < n && len <= 5; len++) {
    for (int i = 0; static_cast<int>(pool.size()) < n && consonants[i]; i++) {
      for (int j = 0; static_cast<int>(pool.size()) < n && vowels[j]; j++) {
        for (int k = 0; static_cast<int>(pool.size()) < n && consonants[k]; k++) {
          Token t;
          t.push_back(consonants[i]);
          t.push_back(vowels[j]);
          t.push_back(consonants[k]);
          for (int extra = 3; extra < len; extra++) t.push_back(vowels[(i + j + k + extra) % 4]);
          if (stem(t) == t) pool.push_back(t);
        }
      }
    }
  }
  if (static_cast<int>(pool.size()) < n) {
    throw std::invalid_argument("synthetic vocab_pool too large for the token generator");
  }
  return pool;
}

}  // namespace

std::vector<Document> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_docs <= 0 || spec.vocab_pool <= 0) {
    throw std::invalid_argument("synthetic spec: num_docs and vocab_pool must be positive");
  }
  if (spec.doc_len_min <= 0 || spec.doc_len_max < spec.doc_len_min) {
    throw std::invalid_argument("synthetic spec: empty document length range");
  }
  if (spec.phrases_min <= 0 || spec.phrases_max < spec.phrases_min) {
    throw std::invalid_argument("synthetic spec: empty phrases-per-doc range");
  }
  if (spec.absent_fraction < 0.0 || spec.absent_fraction > 1.0) {
    throw std::invalid_argument("synthetic spec: absent_fraction must be in [0, 1]");
  }
  const int max_phrase_len = 3;
  std::vector<Token> pool = make_token_pool(spec.vocab_pool);
  // Disjoint sub-pools: filler and phrase tokens may appear in the source,
  // absent-pool tokens never do, so the intended partition is recoverable.
  int absent_pool_size = std::max(2, spec.vocab_pool / 4);
  int phrase_pool_size = std::max(2, spec.vocab_pool / 2);
  std::vector<Token> absent_pool(pool.begin(), pool.begin() + absent_pool_size);
  std::vector<Token> phrase_pool(pool.begin() + absent_pool_size,
                                 pool.begin() + absent_pool_size + phrase_pool_size);
  std::vector<Token> filler_pool(pool.begin() + absent_pool_size + phrase_pool_size, pool.end());
  if (filler_pool.empty()) filler_pool.push_back(pool.back());

  std::vector<Document> docs;
  docs.reserve(static_cast<size_t>(spec.num_docs));
  for (int d = 0; d < spec.num_docs; d++) {
    Rng rng(Rng::mix(spec.seed, 0x5f3759dfULL, static_cast<uint64_t>(d)));
    int doc_len = spec.doc_len_min + rng.uniform_int(spec.doc_len_max - spec.doc_len_min + 1);
    int n_phrases = spec.phrases_min + rng.uniform_int(spec.phrases_max - spec.phrases_min + 1);
    int n_absent = static_cast<int>(spec.absent_fraction * n_phrases + 0.5);
    int n_present = n_phrases - n_absent;

    auto draw_phrase = [&](const std::vector<Token>& from) {
      int len = 1 + rng.uniform_int(max_phrase_len);
      Phrase p;
      for (int i = 0; i < len; i++) p.push_back(from[static_cast<size_t>(rng.uniform_int(static_cast<int>(from.size())))]);
      return p;
    };
    auto draw_distinct = [&](const std::vector<Token>& from, int count) {
      std::set<Phrase> used;
      std::vector<Phrase> out;
      int guard = 0;
      while (static_cast<int>(out.size()) < count) {
        Phrase p = draw_phrase(from);
        if (used.insert(p).second) out.push_back(std::move(p));
        if (++guard > 10000) throw std::invalid_argument("synthetic spec: cannot draw distinct phrases");
      }
      return out;
    };

    std::vector<Phrase> present = draw_distinct(phrase_pool, n_present);
    std::vector<Phrase> absent = draw_distinct(absent_pool, n_absent);

    int needed = 0;
    for (const auto& p : present) needed += static_cast<int>(p.size());
    if (needed > doc_len) {
      throw std::invalid_argument("synthetic spec infeasible: phrases longer than document (" +
                                  std::to_string(needed) + " phrase tokens, doc length " +
                                  std::to_string(doc_len) + ")");
    }

    // Abstract: gap0 p0 gap1 p1 ... gapN, with the filler budget distributed
    // randomly over the gaps. Phrases appear verbatim and never overlap.
    std::vector<int> gap_sizes(static_cast<size_t>(n_present) + 1, 0);
    for (int i = 0; i < doc_len - needed; i++) {
      gap_sizes[static_cast<size_t>(rng.uniform_int(n_present + 1))]++;
    }
    std::vector<Token> abstract;
    abstract.reserve(static_cast<size_t>(doc_len));
    auto emit_filler = [&](int count) {
      for (int i = 0; i < count; i++) {
        abstract.push_back(filler_pool[static_cast<size_t>(rng.uniform_int(static_cast<int>(filler_pool.size())))]);
      }
    };
    for (int i = 0; i < n_present; i++) {
      emit_filler(gap_sizes[static_cast<size_t>(i)]);
      const Phrase& p = present[static_cast<size_t>(i)];
      abstract.insert(abstract.end(), p.begin(), p.end());
    }
    emit_filler(gap_sizes.back());

    std::vector<Token> title;
    int title_len = 2 + rng.uniform_int(3);
    for (int i = 0; i < title_len; i++) {
      title.push_back(filler_pool[static_cast<size_t>(rng.uniform_int(static_cast<int>(filler_pool.size())))]);
    }

    // Author order for the gold list: present and absent interleaved.
    std::vector<Phrase> gold = present;
    gold.insert(gold.end(), absent.begin(), absent.end());
    rng.shuffle(gold);

    docs.push_back(Document::make("synth-" + std::to_string(d), std::move(title),
                                  std::move(abstract), std::move(gold)));
  }
  return docs;
}

}  // namespace kpseq

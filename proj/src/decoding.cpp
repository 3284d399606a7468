#include "kpseq/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace kpseq {

void BeamConfig::validate() const {
  if (beam_width < 1) throw std::invalid_argument("beam config: beam width must be >= 1");
  if (max_length < 1) throw std::invalid_argument("beam config: max length must be >= 1");
}

BeamConfig::Mode mode_from_name(const std::string& name) {
  if (name == "overgen") return BeamConfig::Mode::kOvergen;
  if (name == "self-term") return BeamConfig::Mode::kSelfTerm;
  throw std::invalid_argument("unknown decode mode \"" + name + "\"; valid modes: overgen self-term");
}

const std::string& mode_name(BeamConfig::Mode mode) {
  static const std::string overgen = "overgen";
  static const std::string selfterm = "self-term";
  return mode == BeamConfig::Mode::kOvergen ? overgen : selfterm;
}

namespace {

// Deterministic hypothesis order: score desc, then shorter, then token ids.
bool hyp_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.ids.size() != b.ids.size()) return a.ids.size() < b.ids.size();
  return a.ids < b.ids;
}

}  // namespace

DecodedOutput beam_search(const ParameterStore& params, const ModelConfig& cfg,
                          const Vocabulary& vocab, std::span<const int> source_ids,
                          std::span<const Token> oov, const BeamConfig& bc) {
  bc.validate();
  if (source_ids.empty()) throw std::invalid_argument("beam_search: empty source");
  const int oov_count = static_cast<int>(oov.size());
  const int ext_size = cfg.vocab_size + oov_count;

  EncoderValues enc = encode_values(params, cfg, source_ids);

  struct LiveHyp {
    std::vector<int> ids;
    double log_prob = 0.0;
    DecoderValues state;
  };
  std::vector<LiveHyp> live;
  live.push_back(LiveHyp{{}, 0.0, initial_decoder_values(enc)});

  std::vector<Hypothesis> completed;
  std::vector<Hypothesis> truncated;
  int64_t steps_executed = 0;

  struct Cand {
    double score;
    int parent;
    int token;
  };
  auto cand_before = [](const Cand& a, const Cand& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.parent != b.parent) return a.parent < b.parent;
    return a.token < b.token;
  };

  for (int depth = 1; depth <= bc.max_length && !live.empty(); depth++) {
    std::vector<Cand> cands;
    cands.reserve(live.size() * static_cast<size_t>(ext_size));
    std::vector<DecoderValues> next_states(live.size());
    for (size_t p = 0; p < live.size(); p++) {
      int prev = live[p].ids.empty() ? kBos : live[p].ids.back();
      auto [step, next] =
          decode_step_values(params, cfg, prev, live[p].state, enc, source_ids, oov_count);
      steps_executed++;
      next_states[p] = std::move(next);
      for (int t = 0; t < ext_size; t++) {
        double lp = live[p].log_prob + std::log(std::max(step.final_dist(t), 1e-12));
        cands.push_back(Cand{lp, static_cast<int>(p), t});
      }
    }

    // Top beam_width non-EOS candidates plus every EOS candidate ranked above
    // them; each parent contributes exactly one EOS candidate, so this prefix
    // is guaranteed to contain all of them.
    size_t keep = std::min(cands.size(), static_cast<size_t>(bc.beam_width) + live.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep),
                      cands.end(), cand_before);

    // Walk candidates best-first: EOS completes and frees its slot, non-EOS
    // fills the beam. Once the beam is full no slots remain to refill.
    std::vector<LiveHyp> new_live;
    new_live.reserve(static_cast<size_t>(bc.beam_width));
    for (size_t c = 0; c < keep && static_cast<int>(new_live.size()) < bc.beam_width; c++) {
      const Cand& cand = cands[c];
      if (cand.token == kEos) {
        Hypothesis h;
        h.ids = live[static_cast<size_t>(cand.parent)].ids;
        h.ids.push_back(kEos);
        h.log_prob = cand.score;
        h.finished = true;
        completed.push_back(std::move(h));
      } else {
        LiveHyp h;
        h.ids = live[static_cast<size_t>(cand.parent)].ids;
        h.ids.push_back(cand.token);
        h.log_prob = cand.score;
        h.state = next_states[static_cast<size_t>(cand.parent)];
        new_live.push_back(std::move(h));
      }
    }
    live = std::move(new_live);

    if (depth == bc.max_length) {
      for (auto& h : live) {
        Hypothesis t;
        t.ids = std::move(h.ids);
        t.log_prob = h.log_prob;
        t.finished = false;
        t.truncated = true;
        truncated.push_back(std::move(t));
      }
      live.clear();
      break;
    }

    if (bc.early_stop && !completed.empty()) {
      double best_completed = -std::numeric_limits<double>::infinity();
      for (const auto& h : completed) best_completed = std::max(best_completed, h.log_prob);
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& h : live) best_live = std::max(best_live, h.log_prob);
      if (best_completed >= best_live) break;
    }
  }

  DecodedOutput out;
  out.steps_executed = steps_executed;
  out.hypotheses = std::move(completed);
  out.hypotheses.insert(out.hypotheses.end(), std::make_move_iterator(truncated.begin()),
                        std::make_move_iterator(truncated.end()));
  std::sort(out.hypotheses.begin(), out.hypotheses.end(), hyp_before);
  if (bc.mode == BeamConfig::Mode::kSelfTerm && out.hypotheses.size() > 1) {
    out.hypotheses.resize(1);
  }
  auto [phrases, total] = extract_phrases(out.hypotheses, bc.mode, vocab, oov);
  out.phrases = std::move(phrases);
  out.total_phrases = total;
  return out;
}

std::pair<std::vector<Phrase>, int> extract_phrases(std::span<const Hypothesis> hypotheses,
                                                    BeamConfig::Mode mode,
                                                    const Vocabulary& vocab,
                                                    std::span<const Token> oov) {
  size_t pool = hypotheses.size();
  if (mode == BeamConfig::Mode::kSelfTerm) pool = std::min<size_t>(pool, 1);

  auto token_of = [&](int id) -> Token {
    if (id < vocab.size()) return vocab.token_of(id);
    int slot = id - vocab.size();
    if (slot < 0 || slot >= static_cast<int>(oov.size())) {
      throw std::out_of_range("extract_phrases: extended id " + std::to_string(id) +
                              " outside oov list");
    }
    return oov[static_cast<size_t>(slot)];
  };

  std::vector<Phrase> ranked;
  std::set<Phrase> seen;  // stemmed forms
  int total = 0;
  for (size_t h = 0; h < pool; h++) {
    std::vector<Phrase> segments;
    Phrase cur;
    for (int id : hypotheses[h].ids) {
      if (id == kEos) continue;
      if (id == kSep) {
        if (!cur.empty()) segments.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.push_back(token_of(id));
      }
    }
    if (!cur.empty()) segments.push_back(std::move(cur));
    for (auto& seg : segments) {
      total++;
      if (seen.insert(stem_phrase(seg)).second) ranked.push_back(std::move(seg));
    }
  }
  return {ranked, total};
}

namespace {

Document truncate_source(const Document& doc) {
  Document d = doc;
  if (static_cast<int>(d.source_tokens.size()) > kMaxSourceTokens) {
    d.source_tokens.resize(kMaxSourceTokens);
  }
  return d;
}

}  // namespace

DecodedOutput decode_document(const Checkpoint& ckpt, const Document& doc,
                              const BeamConfig& bc) {
  Document d = truncate_source(doc);
  if (d.source_tokens.empty()) {
    throw std::invalid_argument("cannot decode document " + doc.id + ": empty source");
  }
  SourceEncoding enc = encode_source(d, ckpt.vocab);
  return beam_search(ckpt.params, ckpt.model_config, ckpt.vocab, enc.ids, enc.oov, bc);
}

DocPrediction make_prediction(const std::string& id, const DecodedOutput& out,
                              const Vocabulary& vocab, std::span<const Token> oov) {
  DocPrediction pred;
  pred.id = id;
  for (const auto& hyp : out.hypotheses) {
    std::vector<Token> tokens;
    tokens.reserve(hyp.ids.size());
    for (int tid : hyp.ids) {
      if (tid < vocab.size()) {
        tokens.push_back(vocab.token_of(tid));
      } else {
        tokens.push_back(oov[static_cast<size_t>(tid - vocab.size())]);
      }
    }
    pred.sequences.emplace_back(std::move(tokens), hyp.log_prob);
  }
  pred.phrases = out.phrases;
  pred.beams = static_cast<int>(out.hypotheses.size());
  double len_sum = 0.0;
  for (const auto& hyp : out.hypotheses) {
    len_sum += static_cast<double>(hyp.ids.size()) - (hyp.finished ? 1.0 : 0.0);
  }
  pred.mean_beam_len = out.hypotheses.empty() ? 0.0 : len_sum / static_cast<double>(out.hypotheses.size());
  pred.unique_kp = static_cast<int>(out.phrases.size());
  pred.total_kp = out.total_phrases;
  return pred;
}

namespace {

int worker_count(size_t jobs) {
  unsigned hw = std::thread::hardware_concurrency();
  int threads = hw == 0 ? 1 : static_cast<int>(hw);
  if (const char* env = std::getenv("KPSEQ_THREADS")) {
    char* end = nullptr;
    long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) threads = std::min<long>(threads, cap);
  }
  return std::max(1, std::min<int>(threads, static_cast<int>(jobs)));
}

}  // namespace

std::vector<DocPrediction> decode_corpus(const Checkpoint& ckpt,
                                         const std::vector<Document>& docs,
                                         const BeamConfig& bc) {
  std::vector<DocPrediction> preds(docs.size());
  auto run_one = [&](size_t i) {
    Document d = truncate_source(docs[i]);
    if (d.source_tokens.empty()) {
      throw std::invalid_argument("cannot decode document " + docs[i].id + ": empty source");
    }
    SourceEncoding enc = encode_source(d, ckpt.vocab);
    DecodedOutput out =
        beam_search(ckpt.params, ckpt.model_config, ckpt.vocab, enc.ids, enc.oov, bc);
    preds[i] = make_prediction(docs[i].id, out, ckpt.vocab, enc.oov);
  };

  int threads = worker_count(docs.size());
  if (threads <= 1) {
    for (size_t i = 0; i < docs.size(); i++) run_one(i);
    return preds;
  }

  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(threads));
  for (int w = 0; w < threads; w++) {
    workers.emplace_back([&, w] {
      for (size_t i = static_cast<size_t>(w); i < docs.size(); i += static_cast<size_t>(threads)) {
        try {
          run_one(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return preds;
}

void save_predictions_jsonl(const std::vector<DocPrediction>& preds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write predictions file: " + path);
  for (const auto& pred : preds) {
    nlohmann::json obj;
    obj["id"] = pred.id;
    nlohmann::json seqs = nlohmann::json::array();
    for (const auto& [tokens, score] : pred.sequences) {
      seqs.push_back({{"tokens", tokens}, {"score", score}});
    }
    obj["sequences"] = seqs;
    obj["phrases"] = pred.phrases;
    obj["stats"] = {{"beams", pred.beams},
                    {"mean_beam_len", pred.mean_beam_len},
                    {"unique_kp", pred.unique_kp},
                    {"total_kp", pred.total_kp}};
    out << obj.dump() << '\n';
  }
}

std::vector<DocPrediction> load_predictions_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open predictions file: " + path);
  std::vector<DocPrediction> preds;
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
    DocPrediction pred;
    pred.id = obj.at("id").get<std::string>();
    for (const auto& seq : obj.at("sequences")) {
      pred.sequences.emplace_back(seq.at("tokens").get<std::vector<Token>>(),
                                  seq.at("score").get<double>());
    }
    pred.phrases = obj.at("phrases").get<std::vector<Phrase>>();
    const auto& stats = obj.at("stats");
    pred.beams = stats.at("beams").get<int>();
    pred.mean_beam_len = stats.at("mean_beam_len").get<double>();
    pred.unique_kp = stats.at("unique_kp").get<int>();
    pred.total_kp = stats.at("total_kp").get<int>();
    preds.push_back(std::move(pred));
  }
  return preds;
}

}  // namespace kpseq

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kpseq/corpus.hpp"
#include "kpseq/model.hpp"
#include "kpseq/training.hpp"

namespace kpseq {

struct BeamConfig {
  enum class Mode { kOvergen, kSelfTerm };

  int beam_width = 10;
  int max_length = 60;  // maximum generated tokens per hypothesis, EOS included
  bool early_stop = true;
  Mode mode = Mode::kOvergen;

  void validate() const;
};

BeamConfig::Mode mode_from_name(const std::string& name);  // "overgen" | "self-term"
const std::string& mode_name(BeamConfig::Mode mode);

struct Hypothesis {
  std::vector<int> ids;  // generated tokens over the extended vocabulary, no BOS
  double log_prob = 0.0;
  bool finished = false;   // last token is EOS
  bool truncated = false;  // stopped at max_length without EOS
  DecoderValues state;
};

struct DecodedOutput {
  std::vector<Hypothesis> hypotheses;  // mode-dependent pool, score-sorted
  std::vector<Phrase> phrases;         // ranked unique (stemmed dedup)
  int total_phrases = 0;               // before dedup
  int64_t steps_executed = 0;          // decoder evaluations performed
};

// Beam search over cumulative log-probability (no length normalization).
// Completed hypotheses leave the beam and their slots are refilled, so more
// than beam_width sequences can complete across steps. With early_stop the
// search terminates once the best hypothesis overall is a completed one.
DecodedOutput beam_search(const ParameterStore& params, const ModelConfig& cfg,
                          const Vocabulary& vocab, std::span<const int> source_ids,
                          std::span<const Token> oov, const BeamConfig& bc);

// Splits hypotheses on SEP (EOS dropped, empty segments dropped) and maps ids
// back to tokens. Overgen mode pools phrases from every hypothesis by
// (hypothesis rank, position); self-term keeps only the top hypothesis.
// Returns the ranked unique phrases and the pre-dedup phrase count.
std::pair<std::vector<Phrase>, int> extract_phrases(std::span<const Hypothesis> hypotheses,
                                                    BeamConfig::Mode mode,
                                                    const Vocabulary& vocab,
                                                    std::span<const Token> oov);

DecodedOutput decode_document(const Checkpoint& ckpt, const Document& doc,
                              const BeamConfig& bc);

struct DocPrediction {
  std::string id;
  std::vector<std::pair<std::vector<Token>, double>> sequences;  // (tokens, score)
  std::vector<Phrase> phrases;  // ranked unique
  int beams = 0;
  double mean_beam_len = 0.0;
  int unique_kp = 0;
  int total_kp = 0;
};

DocPrediction make_prediction(const std::string& id, const DecodedOutput& out,
                              const Vocabulary& vocab, std::span<const Token> oov);

// Decodes every document; honors KPSEQ_THREADS for worker parallelism, with
// results merged in input order.
std::vector<DocPrediction> decode_corpus(const Checkpoint& ckpt,
                                         const std::vector<Document>& docs,
                                         const BeamConfig& bc);

void save_predictions_jsonl(const std::vector<DocPrediction>& preds, const std::string& path);
std::vector<DocPrediction> load_predictions_jsonl(const std::string& path);

}  // namespace kpseq

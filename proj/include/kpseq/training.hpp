#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "kpseq/corpus.hpp"
#include "kpseq/model.hpp"
#include "kpseq/ordering.hpp"

namespace kpseq {

// Degenerate documents are truncated before encoding / target assembly.
constexpr int kMaxSourceTokens = 400;
constexpr int kMaxTargetTokens = 60;

struct TrainConfig {
  OrderingStrategy ordering = OrderingStrategy::kAppearAp;
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double gradient_clip_norm = 1.0;
  double lambda = 1.0;  // coverage loss weight
  uint64_t seed = 0;
  int validation_size = 500;
  int eval_every = 100;  // steps between validation decodes
  std::string model_preset = "base";

  void validate() const;
  // JSON object whose keys are exactly the kebab-case field names; unknown
  // keys are rejected. Missing keys keep their defaults.
  static TrainConfig from_json_file(const std::string& path);
  std::string to_json() const;
};

struct AdamState {
  std::unordered_map<std::string, Mat> m;
  std::unordered_map<std::string, Mat> v;
  int64_t step = 0;
};

// Scales all gradients so the global norm does not exceed clip_norm.
// Returns the pre-clip global norm.
double clip_gradients(GradMap& grads, const std::vector<std::string>& names, double clip_norm);

// Adam with beta1=0.9, beta2=0.999, eps=1e-8 and bias correction. Throws on a
// non-finite gradient, naming the parameter.
void adam_update(ParameterStore& params, const GradMap& grads, AdamState& state, double lr);

struct CheckpointMeta {
  int64_t step = 0;
  double validation_f1_at_5 = 0.0;
  std::string created_at;  // ISO-8601 UTC
  TrainConfig config;
};

struct Checkpoint {
  ModelConfig model_config;
  ParameterStore params;
  Vocabulary vocab;
  CheckpointMeta meta;
};

// Directory layout: manifest.json (meta + configs, format_version 1),
// vocab.txt, params.bin. Tensor records in params.bin are
// [u32 name_len][name][u32 ndim][u32 dims...][f32 row-major data...].
void save_checkpoint(const Checkpoint& ckpt, const std::string& dir);
Checkpoint load_checkpoint(const std::string& dir);

struct TrainResult {
  Checkpoint best;
  std::vector<std::pair<int64_t, double>> validation_history;  // (step, F1@5)
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int64_t steps = 0;
};

// Trains a One2Seq model on `corpus`. When `validation` is null the last
// validation_size documents are held out; corpora smaller than that validate
// on the training set itself (overfit runs). Deterministic given the seed.
TrainResult train(const std::vector<Document>& corpus, const TrainConfig& config,
                  int vocab_max_size = 50000,
                  const std::vector<Document>* validation = nullptr);

// Greedy-decode present F1@5 over a document set, the checkpoint-selection
// metric.
double validation_f1_at_5(const ParameterStore& params, const ModelConfig& cfg,
                          const Vocabulary& vocab, const std::vector<Document>& docs);

}  // namespace kpseq

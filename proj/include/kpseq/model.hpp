#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kpseq/graph.hpp"

namespace kpseq {

struct ModelConfig {
  int vocab_size = 0;
  int emb_dim = 64;
  int enc_hidden = 128;  // per direction
  int dec_hidden = 128;  // also the attention energy dimension
  bool coverage = true;
  double cov_loss_weight = 1.0;
  std::string preset = "base";

  // base: embedding 64, hidden 128. big: embedding 128, hidden 512.
  static ModelConfig from_preset(const std::string& name, int vocab_size);
};

struct ParamSpec {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool bias = false;  // biases initialize to zero, weights to uniform(-0.1, 0.1)
};

std::vector<ParamSpec> param_specs(const ModelConfig& cfg);
ParameterStore init_params(const ModelConfig& cfg, uint64_t seed);

// ---- tape-side model, templated on the graph scalar ----

template <typename Scalar>
struct EncoderVarsT {
  VarT<Scalar> h_e;       // (2*enc_hidden) x L, one column per source position
  VarT<Scalar> we_he;     // attn/We * h_e, cached for every decode step
  VarT<Scalar> dec_init;  // dec_hidden x 1
};

template <typename Scalar>
struct DecoderVarsT {
  VarT<Scalar> h_d;       // dec_hidden x 1
  VarT<Scalar> coverage;  // L x 1, sum of all previous attention vectors
  int step = 0;
};

template <typename Scalar>
struct StepVarsT {
  VarT<Scalar> attention;   // L x 1
  VarT<Scalar> context;     // (2*enc_hidden) x 1
  VarT<Scalar> p_gen;       // 1x1
  VarT<Scalar> final_dist;  // (vocab_size + oov_count) x 1
};

using EncoderVars = EncoderVarsT<double>;
using DecoderVars = DecoderVarsT<double>;
using StepVars = StepVarsT<double>;

// Bi-directional GRU over the source embeddings. Extended source ids embed
// as UNK. Throws on an empty source.
template <typename Scalar>
EncoderVarsT<Scalar> encode(GraphT<Scalar>& g, const ParameterStore& params,
                            const ModelConfig& cfg, std::span<const int> source_ids);

template <typename Scalar>
DecoderVarsT<Scalar> initial_decoder_state(GraphT<Scalar>& g, const EncoderVarsT<Scalar>& enc);

// energy_i = V . tanh(We h_e_i + Wd h_d + w_cov c_i + b); alpha = softmax(energy);
// context = sum_i alpha_i h_e_i. The coverage term is present only when
// cfg.coverage is set.
template <typename Scalar>
std::pair<VarT<Scalar>, VarT<Scalar>> attention_step(GraphT<Scalar>& g,
                                                     const ParameterStore& params,
                                                     const ModelConfig& cfg, VarT<Scalar> h_d,
                                                     const EncoderVarsT<Scalar>& enc,
                                                     VarT<Scalar> coverage);

// One decoder step: GRU advance, attention, generation softmax, copy gate,
// pointer-generator mixture over the extended vocabulary, coverage update.
template <typename Scalar>
std::pair<StepVarsT<Scalar>, DecoderVarsT<Scalar>> decode_step(
    GraphT<Scalar>& g, const ParameterStore& params, const ModelConfig& cfg, int prev_id,
    const DecoderVarsT<Scalar>& state, const EncoderVarsT<Scalar>& enc,
    std::span<const int> source_ids, int oov_count);

// Teacher-forced mean token loss:
//   (1/T) sum_t [ -log final_t(y_t) + lambda * sum_i min(alpha_t_i, c_t_i) ]
// with probabilities floored at 1e-12 before the log.
template <typename Scalar>
VarT<Scalar> sequence_loss(GraphT<Scalar>& g, const ParameterStore& params,
                           const ModelConfig& cfg, std::span<const int> source_ids,
                           std::span<const int> target_ids, int oov_count);

// ---- value-side wrappers for decoding (no gradients kept) ----

struct EncoderValues {
  Mat h_e;
  Mat we_he;
  Mat dec_init;
};

struct DecoderValues {
  Mat h_d;
  Mat coverage;
  int step = 0;
};

struct StepValues {
  Eigen::VectorXd final_dist;
  Eigen::VectorXd attention;
  double p_gen = 0.0;
};

EncoderValues encode_values(const ParameterStore& params, const ModelConfig& cfg,
                            std::span<const int> source_ids);

DecoderValues initial_decoder_values(const EncoderValues& enc);

std::pair<StepValues, DecoderValues> decode_step_values(
    const ParameterStore& params, const ModelConfig& cfg, int prev_id,
    const DecoderValues& state, const EncoderValues& enc, std::span<const int> source_ids,
    int oov_count);

}  // namespace kpseq

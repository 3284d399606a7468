#include "kpseq/model.hpp"

#include <stdexcept>

#include "kpseq/corpus.hpp"
#include "kpseq/rng.hpp"

namespace kpseq {

ModelConfig ModelConfig::from_preset(const std::string& name, int vocab_size) {
  ModelConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.preset = name;
  if (name == "base") {
    cfg.emb_dim = 64;
    cfg.enc_hidden = 128;
    cfg.dec_hidden = 128;
  } else if (name == "big") {
    cfg.emb_dim = 128;
    cfg.enc_hidden = 512;
    cfg.dec_hidden = 512;
  } else {
    throw std::invalid_argument("unknown model preset \"" + name + "\"; valid presets: base big");
  }
  return cfg;
}

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  const Eigen::Index v = cfg.vocab_size;
  const Eigen::Index e = cfg.emb_dim;
  const Eigen::Index h = cfg.enc_hidden;
  const Eigen::Index d = cfg.dec_hidden;
  const Eigen::Index a = d;  // attention energy dimension
  std::vector<ParamSpec> specs;
  specs.push_back({"embedding", v, e, false});
  auto gru = [&specs](const std::string& prefix, Eigen::Index in, Eigen::Index hidden) {
    specs.push_back({prefix + "/Wz", hidden, in + hidden, false});
    specs.push_back({prefix + "/Wr", hidden, in + hidden, false});
    specs.push_back({prefix + "/Wh", hidden, in + hidden, false});
    specs.push_back({prefix + "/bz", hidden, 1, true});
    specs.push_back({prefix + "/br", hidden, 1, true});
    specs.push_back({prefix + "/bh", hidden, 1, true});
  };
  gru("enc_fwd", e, h);
  gru("enc_bwd", e, h);
  gru("dec", e, d);
  specs.push_back({"bridge/W", d, 2 * h, false});
  specs.push_back({"bridge/b", d, 1, true});
  specs.push_back({"attn/We", a, 2 * h, false});
  specs.push_back({"attn/Wd", a, d, false});
  specs.push_back({"attn/V", 1, a, false});
  specs.push_back({"attn/b", a, 1, true});
  if (cfg.coverage) specs.push_back({"attn/w_cov", a, 1, false});
  specs.push_back({"out/W", v, d + 2 * h, false});
  specs.push_back({"out/b", v, 1, true});
  specs.push_back({"copy/w_ctx", 1, 2 * h, false});
  specs.push_back({"copy/w_dec", 1, d, false});
  specs.push_back({"copy/w_x", 1, e, false});
  specs.push_back({"copy/b", 1, 1, true});
  return specs;
}

ParameterStore init_params(const ModelConfig& cfg, uint64_t seed) {
  if (cfg.vocab_size <= 0) throw std::invalid_argument("model config: vocab_size must be positive");
  ParameterStore store;
  Rng rng(Rng::mix(seed, 0x706172616dULL));
  for (const auto& spec : param_specs(cfg)) {
    Mat& t = store.create(spec.name, spec.rows, spec.cols);
    if (!spec.bias) {
      for (Eigen::Index i = 0; i < t.rows(); i++) {
        for (Eigen::Index j = 0; j < t.cols(); j++) t(i, j) = rng.uniform(-0.1, 0.1);
      }
    }
  }
  return store;
}

namespace {

template <typename Scalar>
GruVarsT<Scalar> bind_gru(GraphT<Scalar>& g, const ParameterStore& p, const std::string& prefix) {
  return GruVarsT<Scalar>{g.param(prefix + "/Wz", p), g.param(prefix + "/Wr", p),
                          g.param(prefix + "/Wh", p), g.param(prefix + "/bz", p),
                          g.param(prefix + "/br", p), g.param(prefix + "/bh", p)};
}

int embed_id(int id, const ModelConfig& cfg, int oov_count) {
  if (id < 0 || id >= cfg.vocab_size + oov_count) {
    throw std::out_of_range("invalid token id " + std::to_string(id) +
                            " for extended vocabulary of size " +
                            std::to_string(cfg.vocab_size + oov_count));
  }
  return id < cfg.vocab_size ? id : kUnk;  // extended ids have no embedding row
}

}  // namespace

template <typename Scalar>
EncoderVarsT<Scalar> encode(GraphT<Scalar>& g, const ParameterStore& params,
                            const ModelConfig& cfg, std::span<const int> source_ids) {
  using V = VarT<Scalar>;
  using M = MatOf<Scalar>;
  if (source_ids.empty()) throw std::invalid_argument("encode: empty source");
  V table = g.param("embedding", params);
  GruVarsT<Scalar> fwd = bind_gru(g, params, "enc_fwd");
  GruVarsT<Scalar> bwd = bind_gru(g, params, "enc_bwd");

  std::vector<V> x(source_ids.size());
  for (size_t i = 0; i < source_ids.size(); i++) {
    int id = source_ids[i] < cfg.vocab_size ? source_ids[i] : kUnk;
    if (id < 0) throw std::out_of_range("encode: negative token id");
    x[i] = g.embed_row(table, id);
  }

  std::vector<V> hf(source_ids.size()), hb(source_ids.size());
  V h = g.leaf(M::Zero(cfg.enc_hidden, 1));
  for (size_t i = 0; i < source_ids.size(); i++) {
    h = gru_cell(g, x[i], h, fwd);
    hf[i] = h;
  }
  h = g.leaf(M::Zero(cfg.enc_hidden, 1));
  for (size_t i = source_ids.size(); i-- > 0;) {
    h = gru_cell(g, x[i], h, bwd);
    hb[i] = h;
  }

  std::vector<V> cols(source_ids.size());
  for (size_t i = 0; i < source_ids.size(); i++) cols[i] = g.vstack(hf[i], hb[i]);
  EncoderVarsT<Scalar> enc;
  enc.h_e = g.hstack(cols);
  enc.we_he = g.matmul(g.param("attn/We", params), enc.h_e);
  V bridge_in = g.vstack(hf.back(), hb.front());
  enc.dec_init =
      g.tanh(g.affine(g.param("bridge/W", params), bridge_in, g.param("bridge/b", params)));
  return enc;
}

template <typename Scalar>
DecoderVarsT<Scalar> initial_decoder_state(GraphT<Scalar>& g, const EncoderVarsT<Scalar>& enc) {
  DecoderVarsT<Scalar> state;
  state.h_d = enc.dec_init;
  state.coverage = g.leaf(MatOf<Scalar>::Zero(enc.h_e.value().cols(), 1));
  state.step = 0;
  return state;
}

template <typename Scalar>
std::pair<VarT<Scalar>, VarT<Scalar>> attention_step(GraphT<Scalar>& g,
                                                     const ParameterStore& params,
                                                     const ModelConfig& cfg, VarT<Scalar> h_d,
                                                     const EncoderVarsT<Scalar>& enc,
                                                     VarT<Scalar> coverage) {
  using V = VarT<Scalar>;
  V dvec = g.affine(g.param("attn/Wd", params), h_d, g.param("attn/b", params));
  V pre = g.colwise_add(enc.we_he, dvec);
  if (cfg.coverage) {
    pre = g.add(pre, g.matmul(g.param("attn/w_cov", params), g.transpose(coverage)));
  }
  V energies = g.matmul(g.param("attn/V", params), g.tanh(pre));  // 1 x L
  V alpha = g.softmax(g.transpose(energies));
  V context = g.matmul(enc.h_e, alpha);
  return {alpha, context};
}

template <typename Scalar>
std::pair<StepVarsT<Scalar>, DecoderVarsT<Scalar>> decode_step(
    GraphT<Scalar>& g, const ParameterStore& params, const ModelConfig& cfg, int prev_id,
    const DecoderVarsT<Scalar>& state, const EncoderVarsT<Scalar>& enc,
    std::span<const int> source_ids, int oov_count) {
  using V = VarT<Scalar>;
  V table = g.param("embedding", params);
  V x = g.embed_row(table, embed_id(prev_id, cfg, oov_count));
  V h_d = gru_cell(g, x, state.h_d, bind_gru(g, params, "dec"));
  auto [alpha, context] = attention_step(g, params, cfg, h_d, enc, state.coverage);

  V p_vocab = g.softmax(
      g.affine(g.param("out/W", params), g.vstack(h_d, context), g.param("out/b", params)));
  V gate_pre = g.add(g.add(g.matmul(g.param("copy/w_ctx", params), context),
                           g.matmul(g.param("copy/w_dec", params), h_d)),
                     g.add(g.matmul(g.param("copy/w_x", params), x), g.param("copy/b", params)));
  V p_gen = g.sigmoid(gate_pre);

  V gen_part = g.pad_rows(g.scale(p_vocab, p_gen), cfg.vocab_size + oov_count);
  V copy_part = g.scale(alpha, g.one_minus(p_gen));
  V final_dist = g.scatter_add(gen_part, source_ids, copy_part);

  StepVarsT<Scalar> out{alpha, context, p_gen, final_dist};
  DecoderVarsT<Scalar> next;
  next.h_d = h_d;
  next.coverage = cfg.coverage ? g.add(state.coverage, alpha) : state.coverage;
  next.step = state.step + 1;
  return {out, next};
}

template <typename Scalar>
VarT<Scalar> sequence_loss(GraphT<Scalar>& g, const ParameterStore& params,
                           const ModelConfig& cfg, std::span<const int> source_ids,
                           std::span<const int> target_ids, int oov_count) {
  using V = VarT<Scalar>;
  if (target_ids.empty() || target_ids.back() != kEos) {
    throw std::invalid_argument("sequence_loss: target must end with EOS");
  }
  for (size_t t = 0; t < target_ids.size(); t++) {
    int id = target_ids[t];
    if (id == kPad || id == kBos || (id == kEos && t + 1 != target_ids.size())) {
      throw std::invalid_argument(
          "sequence_loss: target contains PAD/BOS/interior EOS at position " + std::to_string(t));
    }
    if (id < 0 || id >= cfg.vocab_size + oov_count) {
      throw std::out_of_range("sequence_loss: target id out of extended vocabulary");
    }
  }

  EncoderVarsT<Scalar> enc = encode(g, params, cfg, source_ids);
  DecoderVarsT<Scalar> state = initial_decoder_state(g, enc);
  int prev = kBos;
  V total = g.scalar(Scalar(0));
  const bool use_cov_loss = cfg.coverage && cfg.cov_loss_weight > 0.0;
  for (int y : target_ids) {
    V cov_before = state.coverage;
    auto [step, next] = decode_step(g, params, cfg, prev, state, enc, source_ids, oov_count);
    V nll = g.scale_const(g.log_floored(g.pick(step.final_dist, y), 1e-12), -1.0);
    total = g.add(total, nll);
    if (use_cov_loss) {
      V cov_pen = g.sum(g.cwise_min(step.attention, cov_before));
      total = g.add(total, g.scale_const(cov_pen, cfg.cov_loss_weight));
    }
    state = next;
    prev = y;
  }
  return g.scale_const(total, 1.0 / static_cast<double>(target_ids.size()));
}

#define KPSEQ_INSTANTIATE_MODEL(S)                                                              \
  template EncoderVarsT<S> encode<S>(GraphT<S>&, const ParameterStore&, const ModelConfig&,     \
                                     std::span<const int>);                                     \
  template DecoderVarsT<S> initial_decoder_state<S>(GraphT<S>&, const EncoderVarsT<S>&);        \
  template std::pair<VarT<S>, VarT<S>> attention_step<S>(GraphT<S>&, const ParameterStore&,     \
                                                         const ModelConfig&, VarT<S>,          \
                                                         const EncoderVarsT<S>&, VarT<S>);     \
  template std::pair<StepVarsT<S>, DecoderVarsT<S>> decode_step<S>(                            \
      GraphT<S>&, const ParameterStore&, const ModelConfig&, int, const DecoderVarsT<S>&,      \
      const EncoderVarsT<S>&, std::span<const int>, int);                                      \
  template VarT<S> sequence_loss<S>(GraphT<S>&, const ParameterStore&, const ModelConfig&,     \
                                    std::span<const int>, std::span<const int>, int);

KPSEQ_INSTANTIATE_MODEL(double)
KPSEQ_INSTANTIATE_MODEL(long double)
#undef KPSEQ_INSTANTIATE_MODEL

EncoderValues encode_values(const ParameterStore& params, const ModelConfig& cfg,
                            std::span<const int> source_ids) {
  Graph g;
  EncoderVars enc = encode(g, params, cfg, source_ids);
  return EncoderValues{enc.h_e.value(), enc.we_he.value(), enc.dec_init.value()};
}

DecoderValues initial_decoder_values(const EncoderValues& enc) {
  return DecoderValues{enc.dec_init, Mat::Zero(enc.h_e.cols(), 1), 0};
}

std::pair<StepValues, DecoderValues> decode_step_values(
    const ParameterStore& params, const ModelConfig& cfg, int prev_id,
    const DecoderValues& state, const EncoderValues& enc, std::span<const int> source_ids,
    int oov_count) {
  Graph g;
  EncoderVars enc_vars{g.leaf(enc.h_e), g.leaf(enc.we_he), g.leaf(enc.dec_init)};
  DecoderVars state_vars{g.leaf(state.h_d), g.leaf(state.coverage), state.step};
  auto [step, next] =
      decode_step(g, params, cfg, prev_id, state_vars, enc_vars, source_ids, oov_count);
  StepValues values;
  values.final_dist = step.final_dist.value().col(0);
  values.attention = step.attention.value().col(0);
  values.p_gen = step.p_gen.scalar();
  DecoderValues next_values{next.h_d.value(), next.coverage.value(), next.step};
  return {values, next_values};
}

}  // namespace kpseq

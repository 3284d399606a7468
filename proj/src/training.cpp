#include "kpseq/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "kpseq/decoding.hpp"
#include "kpseq/evaluation.hpp"
#include "kpseq/rng.hpp"

namespace kpseq {

void TrainConfig::validate() const {
  if (epochs <= 0) throw std::invalid_argument("train config: epochs must be positive");
  if (batch_size <= 0) throw std::invalid_argument("train config: batch-size must be positive");
  if (learning_rate <= 0) throw std::invalid_argument("train config: learning-rate must be positive");
  if (gradient_clip_norm <= 0) {
    throw std::invalid_argument("train config: gradient-clip-norm must be positive");
  }
  if (lambda < 0) throw std::invalid_argument("train config: lambda must be non-negative");
  if (validation_size <= 0) throw std::invalid_argument("train config: validation-size must be positive");
  if (eval_every <= 0) throw std::invalid_argument("train config: eval-every must be positive");
  ModelConfig::from_preset(model_preset, 1);  // throws on unknown preset
}

namespace {

TrainConfig train_config_from_json(const nlohmann::json& obj) {
  if (!obj.is_object()) throw std::runtime_error("train config must be a JSON object");
  TrainConfig cfg;
  for (const auto& [key, value] : obj.items()) {
    if (key == "ordering-strategy") {
      cfg.ordering = ordering_from_name(value.get<std::string>());
    } else if (key == "epochs") {
      cfg.epochs = value.get<int>();
    } else if (key == "batch-size") {
      cfg.batch_size = value.get<int>();
    } else if (key == "learning-rate") {
      cfg.learning_rate = value.get<double>();
    } else if (key == "gradient-clip-norm") {
      cfg.gradient_clip_norm = value.get<double>();
    } else if (key == "lambda") {
      cfg.lambda = value.get<double>();
    } else if (key == "seed") {
      cfg.seed = value.get<uint64_t>();
    } else if (key == "validation-size") {
      cfg.validation_size = value.get<int>();
    } else if (key == "eval-every") {
      cfg.eval_every = value.get<int>();
    } else if (key == "model-preset") {
      cfg.model_preset = value.get<std::string>();
    } else {
      throw std::runtime_error("train config: unknown key \"" + key + "\"");
    }
  }
  cfg.validate();
  return cfg;
}

nlohmann::json train_config_json(const TrainConfig& cfg) {
  nlohmann::json obj;
  obj["ordering-strategy"] = ordering_name(cfg.ordering);
  obj["epochs"] = cfg.epochs;
  obj["batch-size"] = cfg.batch_size;
  obj["learning-rate"] = cfg.learning_rate;
  obj["gradient-clip-norm"] = cfg.gradient_clip_norm;
  obj["lambda"] = cfg.lambda;
  obj["seed"] = cfg.seed;
  obj["validation-size"] = cfg.validation_size;
  obj["eval-every"] = cfg.eval_every;
  obj["model-preset"] = cfg.model_preset;
  return obj;
}

}  // namespace

TrainConfig TrainConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open train config: " + path);
  nlohmann::json obj;
  try {
    in >> obj;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("train config " + path + ": " + e.what());
  }
  return train_config_from_json(obj);
}

std::string TrainConfig::to_json() const { return train_config_json(*this).dump(2); }

double clip_gradients(GradMap& grads, const std::vector<std::string>& names, double clip_norm) {
  if (clip_norm <= 0) throw std::invalid_argument("clip_gradients: clip norm must be positive");
  double sq = 0.0;
  for (const auto& name : names) {
    auto it = grads.find(name);
    if (it != grads.end()) sq += it->second.squaredNorm();
  }
  double norm = std::sqrt(sq);
  if (norm > clip_norm) {
    double scale = clip_norm / norm;
    for (auto& [name, g] : grads) g *= scale;
  }
  return norm;
}

void adam_update(ParameterStore& params, const GradMap& grads, AdamState& state, double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  state.step++;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (const auto& name : params.names()) {
    Mat& theta = params.get(name);
    auto mit = state.m.find(name);
    if (mit == state.m.end()) {
      mit = state.m.emplace(name, Mat::Zero(theta.rows(), theta.cols())).first;
      state.v.emplace(name, Mat::Zero(theta.rows(), theta.cols()));
    }
    Mat& m = mit->second;
    Mat& v = state.v.at(name);
    auto git = grads.find(name);
    if (git != grads.end()) {
      const Mat& g = git->second;
      if (!g.allFinite()) {
        throw std::runtime_error("non-finite gradient for parameter " + name);
      }
      m = kBeta1 * m + (1.0 - kBeta1) * g;
      v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
    } else {
      m *= kBeta1;
      v *= kBeta2;
    }
    theta.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kEps);
  }
}

namespace {

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

bool read_u32(std::istream& in, uint32_t* v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  *v = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
       (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  return true;
}

std::string iso_timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

constexpr int kFormatVersion = 1;

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["step"] = ckpt.meta.step;
  manifest["validation-f1-at-5"] = ckpt.meta.validation_f1_at_5;
  manifest["created-at"] = ckpt.meta.created_at.empty() ? iso_timestamp() : ckpt.meta.created_at;
  manifest["train-config"] = train_config_json(ckpt.meta.config);
  nlohmann::json model;
  model["vocab-size"] = ckpt.model_config.vocab_size;
  model["embedding-dim"] = ckpt.model_config.emb_dim;
  model["encoder-hidden"] = ckpt.model_config.enc_hidden;
  model["decoder-hidden"] = ckpt.model_config.dec_hidden;
  model["coverage"] = ckpt.model_config.coverage;
  model["lambda"] = ckpt.model_config.cov_loss_weight;
  model["preset"] = ckpt.model_config.preset;
  manifest["model"] = model;
  {
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw std::runtime_error("cannot write checkpoint manifest in " + dir);
    out << manifest.dump(2) << '\n';
  }

  ckpt.vocab.save((fs::path(dir) / "vocab.txt").string());

  std::ofstream bin(fs::path(dir) / "params.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write checkpoint tensors in " + dir);
  for (const auto& name : ckpt.params.names()) {
    const Mat& t = ckpt.params.get(name);
    write_u32(bin, static_cast<uint32_t>(name.size()));
    bin.write(name.data(), static_cast<std::streamsize>(name.size()));
    if (t.cols() == 1) {
      write_u32(bin, 1);
      write_u32(bin, static_cast<uint32_t>(t.rows()));
    } else {
      write_u32(bin, 2);
      write_u32(bin, static_cast<uint32_t>(t.rows()));
      write_u32(bin, static_cast<uint32_t>(t.cols()));
    }
    for (Eigen::Index i = 0; i < t.rows(); i++) {
      for (Eigen::Index j = 0; j < t.cols(); j++) {
        float f = static_cast<float>(t(i, j));
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_u32(bin, bits);
      }
    }
  }
}

Checkpoint load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw std::runtime_error("cannot open checkpoint manifest in " + dir);
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("checkpoint manifest: " + std::string(e.what()));
  }
  if (!manifest.contains("format_version")) {
    throw std::runtime_error("checkpoint manifest missing format_version");
  }
  if (manifest["format_version"].get<int>() != kFormatVersion) {
    throw std::runtime_error("checkpoint format version mismatch: expected " +
                             std::to_string(kFormatVersion) + ", got " +
                             manifest["format_version"].dump());
  }

  Checkpoint ckpt;
  const auto& model = manifest.at("model");
  ckpt.model_config.vocab_size = model.at("vocab-size").get<int>();
  ckpt.model_config.emb_dim = model.at("embedding-dim").get<int>();
  ckpt.model_config.enc_hidden = model.at("encoder-hidden").get<int>();
  ckpt.model_config.dec_hidden = model.at("decoder-hidden").get<int>();
  ckpt.model_config.coverage = model.at("coverage").get<bool>();
  ckpt.model_config.cov_loss_weight = model.at("lambda").get<double>();
  ckpt.model_config.preset = model.at("preset").get<std::string>();
  ckpt.meta.step = manifest.at("step").get<int64_t>();
  ckpt.meta.validation_f1_at_5 = manifest.at("validation-f1-at-5").get<double>();
  ckpt.meta.created_at = manifest.at("created-at").get<std::string>();
  ckpt.meta.config = train_config_from_json(manifest.at("train-config"));

  ckpt.vocab = Vocabulary::load((fs::path(dir) / "vocab.txt").string());
  if (ckpt.vocab.size() != ckpt.model_config.vocab_size) {
    throw std::runtime_error("checkpoint vocabulary size mismatch: manifest says " +
                             std::to_string(ckpt.model_config.vocab_size) + ", vocab.txt has " +
                             std::to_string(ckpt.vocab.size()));
  }

  std::ifstream bin(fs::path(dir) / "params.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open checkpoint tensors in " + dir);
  while (true) {
    uint32_t name_len;
    if (!read_u32(bin, &name_len)) break;  // clean EOF between records
    std::string name(name_len, '\0');
    if (!bin.read(name.data(), name_len)) {
      throw std::runtime_error("truncated tensor record (name)");
    }
    uint32_t ndim;
    if (!read_u32(bin, &ndim)) throw std::runtime_error("truncated tensor record (ndim)");
    if (ndim != 1 && ndim != 2) {
      throw std::runtime_error("tensor record for " + name + " has unsupported ndim " +
                               std::to_string(ndim));
    }
    uint32_t rows = 0, cols = 1;
    if (!read_u32(bin, &rows)) throw std::runtime_error("truncated tensor record (dims)");
    if (ndim == 2 && !read_u32(bin, &cols)) {
      throw std::runtime_error("truncated tensor record (dims)");
    }
    Mat& t = ckpt.params.create(name, rows, cols);
    for (Eigen::Index i = 0; i < t.rows(); i++) {
      for (Eigen::Index j = 0; j < t.cols(); j++) {
        uint32_t bits;
        if (!read_u32(bin, &bits)) throw std::runtime_error("truncated tensor record");
        float f;
        std::memcpy(&f, &bits, 4);
        t(i, j) = static_cast<double>(f);
      }
    }
  }

  for (const auto& spec : param_specs(ckpt.model_config)) {
    if (!ckpt.params.has(spec.name)) {
      throw std::runtime_error("checkpoint missing tensor " + spec.name);
    }
    const Mat& t = ckpt.params.get(spec.name);
    if (t.rows() != spec.rows || t.cols() != spec.cols) {
      throw std::runtime_error("tensor shape mismatch for " + spec.name + ": expected " +
                               std::to_string(spec.rows) + "x" + std::to_string(spec.cols) +
                               ", got " + std::to_string(t.rows()) + "x" +
                               std::to_string(t.cols()));
    }
  }
  if (ckpt.params.names().size() != param_specs(ckpt.model_config).size()) {
    throw std::runtime_error("checkpoint contains unexpected extra tensors");
  }
  return ckpt;
}

namespace {

Document truncate_doc(const Document& doc) {
  Document d = doc;
  if (static_cast<int>(d.source_tokens.size()) > kMaxSourceTokens) {
    d.source_tokens.resize(kMaxSourceTokens);
  }
  return d;
}

struct Example {
  uint64_t id_hash = 0;
  SourceEncoding encoding;
  PhrasePartition partition;
  std::vector<Phrase> original_order;
};

}  // namespace

double validation_f1_at_5(const ParameterStore& params, const ModelConfig& cfg,
                          const Vocabulary& vocab, const std::vector<Document>& docs) {
  BeamConfig greedy;
  greedy.beam_width = 1;
  greedy.max_length = kMaxTargetTokens;
  greedy.early_stop = true;
  greedy.mode = BeamConfig::Mode::kSelfTerm;

  double total = 0.0;
  int contributing = 0;
  for (const auto& doc : docs) {
    Document d = truncate_doc(doc);
    if (d.source_tokens.empty()) continue;
    PhrasePartition gold = split_present_absent(doc);
    if (gold.present.empty()) continue;
    SourceEncoding enc = encode_source(d, vocab);
    DecodedOutput out = beam_search(params, cfg, vocab, enc.ids, enc.oov, greedy);
    auto [present_preds, absent_preds] = partition_predictions(out.phrases, doc);
    (void)absent_preds;
    std::vector<Phrase> gold_present;
    for (const auto& p : gold.present) gold_present.push_back(p.phrase);
    total += prf_at_k(present_preds, gold_present, 5).f1;
    contributing++;
  }
  return contributing == 0 ? 0.0 : total / contributing;
}

TrainResult train(const std::vector<Document>& corpus, const TrainConfig& config,
                  int vocab_max_size, const std::vector<Document>* validation) {
  config.validate();
  if (corpus.empty()) throw std::runtime_error("training corpus is empty");

  std::vector<Document> train_docs;
  std::vector<Document> val_docs;
  if (validation != nullptr) {
    train_docs = corpus;
    val_docs = *validation;
  } else if (static_cast<int>(corpus.size()) > config.validation_size) {
    train_docs.assign(corpus.begin(), corpus.end() - config.validation_size);
    val_docs.assign(corpus.end() - config.validation_size, corpus.end());
  } else {
    // overfit mode: corpora smaller than the validation size validate on
    // the training set itself
    train_docs = corpus;
    val_docs = corpus;
  }
  if (val_docs.empty()) throw std::runtime_error("validation set is empty");

  Vocabulary vocab = build_vocabulary(train_docs, vocab_max_size);
  ModelConfig mcfg = ModelConfig::from_preset(config.model_preset, vocab.size());
  mcfg.cov_loss_weight = config.lambda;
  ParameterStore params = init_params(mcfg, config.seed);

  std::vector<Example> examples;
  examples.reserve(train_docs.size());
  for (const auto& doc : train_docs) {
    Document d = truncate_doc(doc);
    if (d.source_tokens.empty()) continue;
    Example ex;
    ex.id_hash = Rng::hash_str(doc.id);
    ex.encoding = encode_source(d, vocab);
    ex.partition = split_present_absent(d);
    ex.original_order = dedup_phrases(d.gold_phrases);
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw std::runtime_error("training corpus has no usable documents");

  AdamState opt;
  TrainResult result;
  int64_t step = 0;
  int64_t last_eval_step = -1;
  double best_f1 = -1.0;
  ParameterStore best_params = params;
  int64_t best_step = 0;

  auto evaluate = [&]() {
    double f1 = validation_f1_at_5(params, mcfg, vocab, val_docs);
    result.validation_history.emplace_back(step, f1);
    last_eval_step = step;
    if (f1 > best_f1) {
      best_f1 = f1;
      best_params = params;
      best_step = step;
    }
  };

  bool first_batch = true;
  for (int epoch = 1; epoch <= config.epochs; epoch++) {
    std::vector<size_t> order(examples.size());
    for (size_t i = 0; i < order.size(); i++) order[i] = i;
    Rng order_rng(Rng::mix(config.seed, 0x6f72646572ULL, static_cast<uint64_t>(epoch)));
    order_rng.shuffle(order);

    for (size_t at = 0; at < order.size(); at += static_cast<size_t>(config.batch_size)) {
      size_t end = std::min(order.size(), at + static_cast<size_t>(config.batch_size));
      GradMap grads;
      double batch_loss = 0.0;
      for (size_t b = at; b < end; b++) {
        Example& ex = examples[order[b]];
        const uint64_t stream = Rng::mix(config.seed, ex.id_hash, static_cast<uint64_t>(epoch));
        Rng rng(stream);
        std::vector<Phrase> ordered =
            order_phrases(config.ordering, ex.partition, ex.original_order, rng);
        TargetSequence target = assemble_target(ordered, vocab, ex.encoding);
        target.ordering = config.ordering;
        target.rng_seed = stream;
        if (static_cast<int>(target.ids.size()) > kMaxTargetTokens) {
          target.ids.resize(kMaxTargetTokens);
          target.ids.back() = kEos;
        }
        Graph g;
        Var loss = sequence_loss(g, params, mcfg, ex.encoding.ids, target.ids,
                                 static_cast<int>(ex.encoding.oov.size()));
        double lv = loss.scalar();
        if (!std::isfinite(lv)) {
          throw std::runtime_error("training diverged at step " + std::to_string(step + 1) +
                                   " (non-finite loss)");
        }
        batch_loss += lv;
        g.backward(loss);
        for (const auto& name : params.names()) {
          const Mat* pg = g.param_grad(name);
          if (!pg) continue;
          auto it = grads.find(name);
          if (it == grads.end()) {
            grads.emplace(name, *pg);
          } else {
            it->second += *pg;
          }
        }
      }
      const double inv = 1.0 / static_cast<double>(end - at);
      for (auto& [name, g] : grads) g *= inv;
      clip_gradients(grads, params.names(), config.gradient_clip_norm);
      adam_update(params, grads, opt, config.learning_rate);
      step++;
      batch_loss *= inv;
      if (first_batch) {
        result.initial_loss = batch_loss;
        first_batch = false;
      }
      result.final_loss = batch_loss;
      if (step % config.eval_every == 0) evaluate();
    }
  }
  if (last_eval_step != step) evaluate();

  result.steps = step;
  result.best.model_config = mcfg;
  result.best.params = std::move(best_params);
  result.best.vocab = vocab;
  result.best.meta.step = best_step;
  result.best.meta.validation_f1_at_5 = best_f1;
  result.best.meta.created_at = iso_timestamp();
  result.best.meta.config = config;
  return result;
}

}  // namespace kpseq

#include "kpseq/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace kpseq {

void CompareSpec::validate() const {
  if (orderings.empty()) throw std::invalid_argument("compare: orderings list is empty");
  if (beam_widths.empty()) throw std::invalid_argument("compare: beam widths list is empty");
  if (modes.empty()) throw std::invalid_argument("compare: modes list is empty");
  for (int w : beam_widths) {
    if (w < 1) throw std::invalid_argument("compare: beam width must be >= 1");
  }
}

namespace {

void write_file(const std::string& path, const std::string& content,
                std::vector<std::string>* written) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report file: " + path);
  out << content;
  written->push_back(path);
}

}  // namespace

CompareOutcome compare(const std::vector<Document>& train_docs,
                       const std::vector<Document>& test_docs, const CompareSpec& spec,
                       const TrainConfig& base_config, int vocab_max_size,
                       const std::string& out_dir, bool train_models) {
  namespace fs = std::filesystem;
  spec.validate();
  if (test_docs.empty()) throw std::runtime_error("compare: test corpus is empty");
  fs::create_directories(out_dir);

  std::vector<uint64_t> seeds = spec.seeds.empty() ? std::vector<uint64_t>{base_config.seed}
                                                   : spec.seeds;
  const bool multi_seed = seeds.size() > 1;

  CompareOutcome outcome;
  for (uint64_t seed : seeds) {
    std::string suffix = multi_seed ? "_seed" + std::to_string(seed) : "";

    // One model per ordering; orderings are a training-time property.
    std::vector<std::pair<OrderingStrategy, Checkpoint>> checkpoints;
    for (OrderingStrategy ordering : spec.orderings) {
      std::string dir =
          (fs::path(out_dir) / ("ckpt_" + ordering_name(ordering) + suffix)).string();
      if (train_models) {
        TrainConfig cfg = base_config;
        cfg.ordering = ordering;
        cfg.seed = seed;
        TrainResult result = train(train_docs, cfg, vocab_max_size);
        save_checkpoint(result.best, dir);
        checkpoints.emplace_back(ordering, std::move(result.best));
      } else {
        if (!fs::exists(fs::path(dir) / "manifest.json")) {
          throw std::runtime_error("missing checkpoint for ordering \"" +
                                   ordering_name(ordering) + "\" at " + dir +
                                   "; rerun with --train");
        }
        checkpoints.emplace_back(ordering, load_checkpoint(dir));
      }
    }

    std::string md_all;
    std::string csv_all;
    for (BeamConfig::Mode mode : spec.modes) {
      for (int width : spec.beam_widths) {
        BeamConfig bc;
        bc.beam_width = width;
        bc.max_length = spec.max_length;
        bc.mode = mode;
        std::vector<std::pair<std::string, EvalReport>> rows;
        for (const auto& [ordering, ckpt] : checkpoints) {
          std::vector<DocPrediction> preds = decode_corpus(ckpt, test_docs, bc);
          std::vector<PredictionRecord> records = make_records(preds, test_docs);
          DatasetEval eval = evaluate_dataset("test", records, spec.present_ks, spec.absent_ks);
          rows.emplace_back(ordering_name(ordering), macro_report({eval}));
        }
        std::string cell = mode_name(mode) + ", beam width " + std::to_string(width) +
                           (multi_seed ? ", seed " + std::to_string(seed) : "");
        md_all += "# " + cell + "\n\n" + render_comparison(rows, "markdown") + "\n";
        csv_all += "# " + cell + "\n" + render_comparison(rows, "csv") + "\n";
        outcome.grids.emplace_back(cell, std::move(rows));
      }
    }
    write_file((fs::path(out_dir) / ("compare_report" + suffix + ".md")).string(), md_all,
               &outcome.files_written);
    write_file((fs::path(out_dir) / ("compare_report" + suffix + ".csv")).string(), csv_all,
               &outcome.files_written);
  }
  return outcome;
}

}  // namespace kpseq

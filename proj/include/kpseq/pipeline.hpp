#pragma once

#include <string>
#include <vector>

#include "kpseq/decoding.hpp"
#include "kpseq/evaluation.hpp"
#include "kpseq/training.hpp"

namespace kpseq {

// The comparison matrix of the CLI `compare` command: one trained model per
// ordering, decoded and evaluated per (beam width, mode) cell.
struct CompareSpec {
  std::vector<OrderingStrategy> orderings = all_orderings();
  std::vector<int> beam_widths = {10, 25, 50};
  std::vector<BeamConfig::Mode> modes = {BeamConfig::Mode::kOvergen};
  std::vector<uint64_t> seeds;  // empty: use the base train config's seed
  std::vector<int> present_ks = {5, 10};
  std::vector<int> absent_ks = {10, 50};
  int max_length = kMaxTargetTokens;

  void validate() const;
};

struct CompareOutcome {
  std::vector<std::string> files_written;
  // (mode, width) -> rows of (ordering name, report); kept for tests
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, EvalReport>>>> grids;
};

// Decodes `test_docs` for every (ordering, width, mode) cell and writes
// markdown + CSV grids under out_dir. One checkpoint per ordering lives at
// out_dir/ckpt_<ordering>: with train_models set they are (re)trained on
// `train_docs` (sharing the preprocessed corpus); otherwise existing
// checkpoints are loaded, and a missing one is an error naming the ordering.
CompareOutcome compare(const std::vector<Document>& train_docs,
                       const std::vector<Document>& test_docs, const CompareSpec& spec,
                       const TrainConfig& base_config, int vocab_max_size,
                       const std::string& out_dir, bool train_models = true);

}  // namespace kpseq

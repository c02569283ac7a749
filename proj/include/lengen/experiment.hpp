#pragma once

// End-to-end experiment pipeline: data generation, training with periodic
// checkpoints, selection on a longer-length validation set, evaluation
// at each requested length, and CSV export.
//
// Files written under the output directory:
//   config.json           resolved configuration
//   metadata.json         wall-clock timestamps (the only nondeterministic file)
//   data/train.jsonl      training set
//   checkpoints/*.bin     one checkpoint per evaluation point
//   train_log.csv         step, loss, grad_norm
//   checkpoints.csv       step, validation exact match
//   metrics.csv           every metric row
//   accuracy_vs_length.csv, per_digit.csv, by_complexity.csv
//   pe_layer<k>.csv       positional maps (pairwise schemes)
// Theory runs write loss_curve.csv, position_loss.csv and gram.csv.

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lengen/config.hpp"
#include "lengen/csv.hpp"

namespace lengen::experiment {

/// Failure inside one pipeline stage; what() starts with "<stage>: ".
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct RunOptions {
  std::function<void(const std::string&)> log;
};

struct ExperimentResult {
  report::MetricsTable metrics;
  std::string best_checkpoint;  // e.g. "step_1200"
  std::filesystem::path out_dir;
};

ExperimentResult run_experiment(const config::ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                const RunOptions& options = {});

/// Held-out samples of operands with exactly `length` digits (the longer
/// operand), or of the seen domain when `length` is 0.
std::vector<data::Sample> make_eval_set(const config::ExperimentConfig& cfg, int length, int size,
                                        std::uint64_t seed);

/// Re-scores every checkpoint saved under out_dir on the validation set
/// and returns the winner's id. Ties go to the earliest step.
std::string reselect_checkpoint(const config::ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace lengen::experiment

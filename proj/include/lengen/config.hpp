#pragma once

// Versioned JSON configuration for experiments, plus the JSON forms of
// model configs and positional-encoding schemes shared with checkpoints.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lengen/datagen.hpp"
#include "lengen/model.hpp"
#include "lengen/theory.hpp"

namespace lengen::config {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Stage-tagged configuration error ("config: ...").
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json to_json(const pe::PEScheme& scheme);
pe::PEScheme scheme_from_json(const json& j);

json to_json(const nn::ModelConfig& cfg);
nn::ModelConfig model_config_from_json(const json& j);

json to_json(const data::DomainSpec& spec);
data::DomainSpec domain_from_json(const json& j);

struct TrainBudget {
  std::int64_t steps = 2000;
  int batch = 32;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double clip = 1.0;
  /// Fixed training-set size; 0 draws a fresh stream of steps * batch.
  std::int64_t train_size = 0;
  /// Fraction of the budget after which the rate falls linearly to zero.
  double lr_decay_start = 1.0;
  /// Decay of an exponential moving average of the weights; 0 disables it.
  /// When enabled, checkpoints hold the averaged weights.
  double ema = 0.0;

  double lr_at(std::int64_t step) const;
};

struct ValidationSpec {
  int length = 0;  // 0 disables checkpoint selection
  int size = 128;
};

struct TheoryRunConfig {
  std::string model = "rpe";
  int n = 51;
  int n1 = 10;
  int d = 200;
  double alpha = 2.0;
  std::vector<double> betas{0.5};
  int w = 0;
  theory::FlowConfig flow;
  bool freeze_a = false;
  int mc_samples = 5000;

  theory::TheoryTask task(std::uint64_t seed) const;
};

struct ExperimentConfig {
  int version = kSchemaVersion;
  std::string name = "experiment";
  std::string kind = "model";  // "model" or "theory"
  data::DomainSpec domain;
  data::SamplerSpec sampler;
  bool augment_shifts = false;
  std::optional<data::TextNoiseSpec> text;
  std::string pe = "rpe";
  nn::ModelConfig model;
  TrainBudget train;
  std::vector<int> eval_lengths;
  int eval_size = 200;
  ValidationSpec validation;
  int checkpoints = 20;
  std::uint64_t seed = 0;
  std::string out_dir;
  TheoryRunConfig theory;

  void validate() const;
};

/// Missing keys keep their defaults; unknown top-level keys are rejected.
ExperimentConfig experiment_from_json(const json& j);
json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Sequence length of the task format (before any text interleaving).
int format_length(const data::DomainSpec& spec);

}  // namespace lengen::config

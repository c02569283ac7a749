#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lengen/model.hpp"

namespace lengen::nn {

/// AdamW with decoupled weight decay applied to every parameter.
struct OptimState {
  std::uint64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::vector<double> m;
  std::vector<double> v;

  void reset(std::size_t n);
};

struct StepResult {
  double loss = 0.0;
  double grad_norm = 0.0;
};

/// One AdamW update in place. `clip` > 0 rescales the gradient to that norm.
void adamw_update(OptimState& state, std::span<double> params, std::span<const double> grad, double clip = 0.0);

/// avg <- decay * avg + (1 - decay) * params.
void average_into(std::span<double> avg, std::span<const double> params, double decay);

StepResult train_step(const Transformer& model, Parameters& params, OptimState& state,
                      std::span<const data::Sample> batch, Rng* dropout_rng = nullptr, double clip = 1.0);

}  // namespace lengen::nn

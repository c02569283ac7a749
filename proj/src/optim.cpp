#include "lengen/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace lengen::nn {

void OptimState::reset(std::size_t n) {
  step = 0;
  m.assign(n, 0.0);
  v.assign(n, 0.0);
}

void average_into(std::span<double> avg, std::span<const double> params, double decay) {
  if (avg.size() != params.size()) throw std::invalid_argument("average_into: size mismatch");
  for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += (1.0 - decay) * (params[i] - avg[i]);
}

void adamw_update(OptimState& s, std::span<double> params, std::span<const double> grad, double clip) {
  if (grad.size() != params.size()) throw std::invalid_argument("adamw_update: gradient size mismatch");
  if (s.m.size() != params.size()) s.reset(params.size());
  double scale = 1.0;
  if (clip > 0.0) {
    double sq = 0.0;
    for (double g : grad) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > clip) scale = clip / norm;
  }
  ++s.step;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i] * scale;
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double mh = s.m[i] / bc1;
    const double vh = s.v[i] / bc2;
    params[i] -= s.lr * mh / (std::sqrt(vh) + s.eps);
    params[i] -= s.lr * s.weight_decay * params[i];
  }
}

StepResult train_step(const Transformer& model, Parameters& params, OptimState& state,
                      std::span<const data::Sample> batch, Rng* dropout_rng, double clip) {
  auto bg = compute_grad(model, params, batch, dropout_rng);
  double sq = 0.0;
  for (double g : bg.grad) sq += g * g;
  adamw_update(state, params.values, bg.grad, clip);
  return {bg.loss, std::sqrt(sq)};
}

}  // namespace lengen::nn

#include <cmath>
#include <random>

#include "lengen/theory.hpp"

namespace lengen::theory {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::ape: return "ape";
    case ModelKind::ape_aug: return "ape_aug";
    case ModelKind::rpe: return "rpe";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "ape") return ModelKind::ape;
  if (s == "ape_aug") return ModelKind::ape_aug;
  if (s == "rpe") return ModelKind::rpe;
  throw std::invalid_argument("unknown theory model '" + s + "' (expected ape, ape_aug or rpe)");
}

namespace {

Mat gaussian(Eigen::Index rows, Eigen::Index cols, double std, Rng& rng) {
  std::normal_distribution<double> g(0.0, std);
  Mat x(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) x(i, j) = g(rng);
  }
  return x;
}

template <typename Derived>
void guard(const Eigen::MatrixBase<Derived>& x, std::int64_t step) {
  if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e12) {
    throw FlowDiverged("population SGD diverged at step " + std::to_string(step));
  }
}

bool log_now(std::int64_t step, std::int64_t steps, int every) {
  return every > 0 && (step % every == 0 || step == steps);
}

void train_ape(TrainResult& res, const TheoryTask& task, const FlowConfig& flow, double init_std, bool aug) {
  Rng rng = make_rng(flow.seed);
  APEState st{gaussian(task.n, task.d, init_std, rng), task.theta};
  const double eps = flow.resolved_epsilon(task.alpha);
  const Training training = aug ? Training::aug : Training::noaug;
  if (aug && task.n1 != 2 * task.w + 1) throw std::invalid_argument("ape_aug training needs n1 = 2w + 1");
  if (log_now(0, flow.steps, flow.log_every)) res.loss_curve.emplace_back(0, expected_loss_ape(st, task, training));

  // Without augmentation only the window rows see the loss; the rest decay.
  const int n1 = task.n1;
  const Mat Tw = target_matrix(task).topLeftCorner(n1, n1);
  for (std::int64_t step = 1; step <= flow.steps; ++step) {
    if (aug) {
      const Mat grad = expected_grad_aug(st.P, task);
      st.P *= 1.0 - eps;
      st.P -= flow.eta * grad;
    } else {
      const Mat Pw = st.P.topRows(n1);
      const Mat grad = 4.0 * (Pw * Pw.transpose() - Tw) * Pw;
      st.P *= 1.0 - eps;
      st.P.topRows(n1) -= flow.eta * grad;
    }
    if (step % 1000 == 0 || step == flow.steps) guard(st.P, step);
    if (log_now(step, flow.steps, flow.log_every)) res.loss_curve.emplace_back(step, expected_loss_ape(st, task, training));
  }
  res.test_loss = position_test_loss(st, task, LossMode::analytic);
  res.ape = std::move(st);
}

void train_rpe(TrainResult& res, const TheoryTask& task, const FlowConfig& flow, const TrainOptions& opt,
               double init_std) {
  Rng rng = make_rng(flow.seed);
  RPEState st = RPEState::zeros(task.n, task.d);
  st.a = gaussian(2 * task.n - 1, 1, init_std, rng);
  st.v = gaussian(task.d, 1, init_std, rng);
  const double eps = flow.resolved_epsilon(task.alpha);

  // Per-offset pair counts and target coefficients; the target is circulant.
  const Mat N = pair_counts(task, Training::noaug);
  Vec cnt = Vec::Zero(st.a.size()), tk = Vec::Zero(st.a.size());
  for (int i = 0; i < task.n; ++i) {
    for (int r = 0; r < task.n; ++r) {
      const int k = task.ring_offset(i - r) + task.n - 1;
      cnt(k) += N(i, r);
      tk(k) = task.target_coef(i, r);
    }
  }
  const double const_term = (cnt.array() * tk.array().square()).sum();
  const auto loss = [&] {
    const double vv = st.v.squaredNorm(), vt = st.v.dot(task.theta);
    return (cnt.array() * (st.a.array().square() * vv - 2.0 * st.a.array() * tk.array() * vt)).sum() + const_term;
  };
  if (log_now(0, flow.steps, flow.log_every)) res.loss_curve.emplace_back(0, loss());

  Vec ga(st.a.size());
  for (std::int64_t step = 1; step <= flow.steps; ++step) {
    const double vv = st.v.squaredNorm();
    const double vt = st.v.dot(task.theta);
    const double aa = (cnt.array() * st.a.array().square()).sum();
    const double at = (cnt.array() * st.a.array() * tk.array()).sum();
    ga = 2.0 * (cnt.array() * (st.a.array() * vv - tk.array() * vt)).matrix();
    const Vec gv = 2.0 * aa * st.v - 2.0 * at * task.theta;
    if (!opt.freeze_a) st.a -= flow.eta * ga + eps * st.a;
    st.v -= flow.eta * gv + eps * st.v;
    if (step % 1000 == 0 || step == flow.steps) {
      guard(st.a, step);
      guard(st.v, step);
    }
    if (log_now(step, flow.steps, flow.log_every)) res.loss_curve.emplace_back(step, loss());
  }
  if (opt.renormalise) {
    const double vt = st.v.dot(task.theta);
    const double s = st.v.norm() * (vt < 0.0 ? -1.0 : 1.0);
    if (s != 0.0) {
      st.a *= s;
      st.v /= s;
    }
  }
  res.test_loss = position_test_loss(st, task, LossMode::analytic);
  res.rpe = std::move(st);
}

}  // namespace

TrainResult sgd_population_train(ModelKind kind, const TheoryTask& task, const FlowConfig& flow,
                                 const TrainOptions& options) {
  task.validate();
  if (flow.eta <= 0.0) throw std::invalid_argument("population SGD needs eta > 0");
  const double init_std = options.init_std >= 0.0 ? options.init_std : 1.0 / std::sqrt(static_cast<double>(task.d));
  TrainResult res;
  res.kind = kind;
  switch (kind) {
    case ModelKind::ape: train_ape(res, task, flow, init_std, false); break;
    case ModelKind::ape_aug: train_ape(res, task, flow, init_std, true); break;
    case ModelKind::rpe: train_rpe(res, task, flow, options, init_std); break;
  }
  return res;
}

}  // namespace lengen::theory

#include <cmath>
#include <random>

#include "lengen/theory.hpp"

namespace lengen::theory {

double TheoryTask::beta(int j) const {
  if (j < 1 || j > m()) return 0.0;
  return betas[static_cast<std::size_t>(j - 1)];
}

int TheoryTask::ring_offset(int diff) const {
  int r = wrap(diff);
  if (r > n / 2) r -= n;
  return r;
}

double TheoryTask::target_coef(int i, int r) const {
  double c = wrap(i) == wrap(r) ? alpha : 0.0;
  for (int j = 1; j <= m(); ++j) {
    if (wrap(i - j) == wrap(r)) c += beta(j);
    if (wrap(i + j) == wrap(r)) c += beta(j);
  }
  return c;
}

void TheoryTask::validate() const {
  if (n < 1 || n1 < 1 || n1 > n || d < 1) throw std::invalid_argument("TheoryTask: need 1 <= n1 <= n and d >= 1");
  if (w < 0) throw std::invalid_argument("TheoryTask: w must be non-negative");
  if (theta.size() != d) throw std::invalid_argument("TheoryTask: theta must have d entries");
  if (std::abs(theta.norm() - 1.0) > 1e-12) throw std::invalid_argument("TheoryTask: theta must be a unit vector");
}

TheoryTask TheoryTask::make(int n, int n1, int d, double alpha, std::vector<double> betas, int w,
                            std::uint64_t seed) {
  TheoryTask t;
  t.n = n;
  t.n1 = n1;
  t.d = d;
  t.alpha = alpha;
  t.betas = std::move(betas);
  t.w = w;
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  t.theta = Vec(d);
  for (int i = 0; i < d; ++i) t.theta(i) = g(rng);
  t.theta /= t.theta.norm();
  t.validate();
  return t;
}

Vec target_of(const TheoryTask& task, const Mat& x) {
  const Vec s = x * task.theta;
  Vec y = task.alpha * s;
  for (int i = 0; i < task.n; ++i) {
    for (int j = 1; j <= task.m(); ++j) y(i) += task.beta(j) * (s(task.wrap(i - j)) + s(task.wrap(i + j)));
  }
  return y;
}

namespace {

Mat gaussian(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat x(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) x(i, j) = g(rng);
  }
  return x;
}

}  // namespace

TaskSample sample_task(const TheoryTask& task, SampleMode mode, Rng& rng) {
  TaskSample s;
  s.x = gaussian(task.n, task.d, rng);
  if (mode == SampleMode::seen_padded) s.x.bottomRows(task.n - task.n1).setZero();
  s.y = target_of(task, s.x);
  return s;
}

TaskSample sample_shifted(const TheoryTask& task, int shift, Rng& rng) {
  TaskSample s;
  s.x = Mat::Zero(task.n, task.d);
  const Mat g = gaussian(task.n1, task.d, rng);
  for (int t = 0; t < task.n1; ++t) s.x.row(task.wrap(shift + t)) = g.row(t);
  s.y = target_of(task, s.x);
  return s;
}

RPEState RPEState::zeros(int n, int d) { return {Vec::Zero(2 * n - 1), Vec::Zero(d)}; }

Vec ape_predict(const APEState& state, const Mat& x) {
  const Vec s = x * state.v;
  return state.P * (state.P.transpose() * s);
}

namespace {

Mat rpe_matrix(const RPEState& state, const TheoryTask& task) {
  Mat A(task.n, task.n);
  for (int i = 0; i < task.n; ++i) {
    for (int r = 0; r < task.n; ++r) A(i, r) = state.at(task.ring_offset(i - r));
  }
  return A;
}

}  // namespace

Vec rpe_predict(const RPEState& state, const TheoryTask& task, const Mat& x) {
  return rpe_matrix(state, task) * (x * state.v);
}

Mat pair_counts(const TheoryTask& task, Training training) {
  Mat N = Mat::Zero(task.n, task.n);
  if (training == Training::noaug) {
    N.topLeftCorner(task.n1, task.n1).setOnes();
    return N;
  }
  for (int shift = 0; shift < task.n; ++shift) {
    for (int a = 0; a < task.n1; ++a) {
      for (int b = 0; b < task.n1; ++b) N(task.wrap(shift + a), task.wrap(shift + b)) += 1.0;
    }
  }
  return N;
}

Mat target_matrix(const TheoryTask& task) {
  Mat T(task.n, task.n);
  for (int i = 0; i < task.n; ++i) {
    for (int r = 0; r < task.n; ++r) T(i, r) = task.target_coef(i, r);
  }
  return T;
}

double expected_loss_ape(const APEState& state, const TheoryTask& task, Training training) {
  const Mat N = pair_counts(task, training);
  const Mat T = target_matrix(task);
  const Mat G = state.P * state.P.transpose();
  const double vv = state.v.squaredNorm();
  const double vt = state.v.dot(task.theta);
  return (N.array() * (G.array().square() * vv - 2.0 * G.array() * T.array() * vt + T.array().square())).sum();
}

double expected_loss_rpe(const RPEState& state, const TheoryTask& task, Training training) {
  const Mat N = pair_counts(task, training);
  const Mat T = target_matrix(task);
  const Mat A = rpe_matrix(state, task);
  const double vv = state.v.squaredNorm();
  const double vt = state.v.dot(task.theta);
  return (N.array() * (A.array().square() * vv - 2.0 * A.array() * T.array() * vt + T.array().square())).sum();
}

Vec position_test_loss(const APEState& state, const TheoryTask& task, LossMode mode, int samples, Rng* rng) {
  Vec out = Vec::Zero(task.n);
  if (mode == LossMode::analytic) {
    const Mat G = state.P * state.P.transpose();
    const Mat T = target_matrix(task);
    const double vv = state.v.squaredNorm();
    const double vt = state.v.dot(task.theta);
    for (int i = 0; i < task.n; ++i) {
      for (int r = 0; r < task.n; ++r) out(i) += G(i, r) * G(i, r) * vv - 2.0 * G(i, r) * T(i, r) * vt + T(i, r) * T(i, r);
    }
    return out;
  }
  if (rng == nullptr || samples < 1) throw std::invalid_argument("position_test_loss: Monte-Carlo needs rng and samples");
  for (int s = 0; s < samples; ++s) {
    const auto smp = sample_task(task, SampleMode::full, *rng);
    out += (ape_predict(state, smp.x) - smp.y).array().square().matrix();
  }
  return out / samples;
}

Vec position_test_loss(const RPEState& state, const TheoryTask& task, LossMode mode, int samples, Rng* rng) {
  Vec out = Vec::Zero(task.n);
  const Mat A = rpe_matrix(state, task);
  if (mode == LossMode::analytic) {
    const Mat T = target_matrix(task);
    const double vv = state.v.squaredNorm();
    const double vt = state.v.dot(task.theta);
    for (int i = 0; i < task.n; ++i) {
      for (int r = 0; r < task.n; ++r) out(i) += A(i, r) * A(i, r) * vv - 2.0 * A(i, r) * T(i, r) * vt + T(i, r) * T(i, r);
    }
    return out;
  }
  if (rng == nullptr || samples < 1) throw std::invalid_argument("position_test_loss: Monte-Carlo needs rng and samples");
  for (int s = 0; s < samples; ++s) {
    const auto smp = sample_task(task, SampleMode::full, *rng);
    out += (A * (smp.x * state.v) - smp.y).array().square().matrix();
  }
  return out / samples;
}

double gram_test_loss(const Vec& A, const TheoryTask& task) {
  double loss = 0.0;
  for (int r = 0; r < task.n; ++r) {
    const double diff = A(fold_index(r, task.n)) - task.target_coef(0, r);
    loss += diff * diff;
  }
  return loss;
}

Mat mixing_matrix(const TrainResult& result, const TheoryTask& task) {
  if (result.ape) return result.ape->P * result.ape->P.transpose();
  if (result.rpe) return rpe_matrix(*result.rpe, task);
  throw std::invalid_argument("mixing_matrix: empty training result");
}

}  // namespace lengen::theory

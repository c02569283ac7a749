#include <algorithm>
#include <cmath>

#include "lengen/theory.hpp"

namespace lengen::theory {

Mat expected_grad_ape(const APEState& state, const TheoryTask& task, Training training) {
  const Mat N = pair_counts(task, training);
  const Mat T = target_matrix(task);
  const Mat G = state.P * state.P.transpose();
  const double vv = state.v.squaredNorm();
  const double vt = state.v.dot(task.theta);
  const Mat M = 4.0 * (N.array() * (G.array() * vv - T.array() * vt)).matrix();
  return M * state.P;
}

Vec expected_grad_ape_v(const APEState& state, const TheoryTask& task, Training training) {
  const Mat N = pair_counts(task, training);
  const Mat T = target_matrix(task);
  const Mat G = state.P * state.P.transpose();
  const double gg = (N.array() * G.array().square()).sum();
  const double gt = (N.array() * G.array() * T.array()).sum();
  return 2.0 * gg * state.v - 2.0 * gt * task.theta;
}

Mat expected_grad_aug(const Mat& P, const TheoryTask& task) {
  const int n = task.n;
  const int K = 2 * task.w + 1;
  Mat grad = Mat::Zero(P.rows(), P.cols());
  for (int k = 0; k < n; ++k) {
    auto gk = grad.row(k);
    for (int r = -2 * task.w; r <= 2 * task.w; ++r) {
      const int kr = task.wrap(k + r);
      gk += 4.0 * (K - std::abs(r)) * P.row(k).dot(P.row(kr)) * P.row(kr);
    }
    gk -= 4.0 * K * task.alpha * P.row(k);
    for (int j = 1; j <= task.m(); ++j) {
      const int weight = std::max(0, K - j);
      if (weight == 0) continue;
      gk -= 4.0 * weight * task.beta(j) * (P.row(task.wrap(k + j)) + P.row(task.wrap(k - j)));
    }
  }
  return grad;
}

RPEGrad expected_grad_rpe(const RPEState& state, const TheoryTask& task, Training training) {
  const Mat N = pair_counts(task, training);
  const double vv = state.v.squaredNorm();
  const double vt = state.v.dot(task.theta);
  RPEGrad g{Vec::Zero(state.a.size()), Vec::Zero(state.v.size())};
  double aa = 0.0, at = 0.0;
  for (int i = 0; i < task.n; ++i) {
    for (int r = 0; r < task.n; ++r) {
      if (N(i, r) == 0.0) continue;
      const int k = task.ring_offset(i - r);
      const double a = state.at(k);
      const double t = task.target_coef(i, r);
      g.a(k + task.n - 1) += 2.0 * N(i, r) * (a * vv - t * vt);
      aa += N(i, r) * a * a;
      at += N(i, r) * a * t;
    }
  }
  g.v = 2.0 * aa * state.v - 2.0 * at * task.theta;
  return g;
}

namespace {

struct Accumulator {
  Mat sum, sumsq;
  int count = 0;

  Accumulator(Eigen::Index rows, Eigen::Index cols) : sum(Mat::Zero(rows, cols)), sumsq(Mat::Zero(rows, cols)) {}

  void add(const Mat& x) {
    sum += x;
    sumsq += x.array().square().matrix();
    ++count;
  }

  MCEstimate finish() const {
    MCEstimate e;
    e.mean = sum / count;
    const Mat var = ((sumsq / count).array() - e.mean.array().square()).max(0.0).matrix() * count / std::max(1, count - 1);
    e.se = (var / count).array().sqrt().matrix();
    return e;
  }
};

template <typename Fn>
void for_each_window(const TheoryTask& task, Training training, Rng& rng, Fn&& fn) {
  if (training == Training::noaug) {
    fn(sample_task(task, SampleMode::seen_padded, rng), 0);
    return;
  }
  for (int shift = 0; shift < task.n; ++shift) fn(sample_shifted(task, shift, rng), shift);
}

Vec window_residual(const TheoryTask& task, const Vec& yhat, const Vec& y, int shift) {
  Vec e = Vec::Zero(task.n);
  for (int t = 0; t < task.n1; ++t) {
    const int i = task.wrap(shift + t);
    e(i) = yhat(i) - y(i);
  }
  return e;
}

}  // namespace

APEMonteCarlo mc_grad_ape(const APEState& state, const TheoryTask& task, Training training, int samples, Rng& rng) {
  if (samples < 2) throw std::invalid_argument("mc_grad_ape: need at least two samples");
  Accumulator accP(state.P.rows(), state.P.cols()), accV(state.v.size(), 1);
  const Mat G = state.P * state.P.transpose();
  Mat dP(state.P.rows(), state.P.cols());
  Vec dv(state.v.size());
  for (int s = 0; s < samples; ++s) {
    dP.setZero();
    dv.setZero();
    for_each_window(task, training, rng, [&](const TaskSample& smp, int shift) {
      const Vec sv = smp.x * state.v;
      const Vec e2 = 2.0 * window_residual(task, G * sv, smp.y, shift);
      const Mat E = e2 * sv.transpose();
      dP += (E + E.transpose()) * state.P;
      dv += smp.x.transpose() * (G * e2);
    });
    accP.add(dP);
    accV.add(dv);
  }
  return {accP.finish(), accV.finish()};
}

RPEMonteCarlo mc_grad_rpe(const RPEState& state, const TheoryTask& task, Training training, int samples, Rng& rng) {
  if (samples < 2) throw std::invalid_argument("mc_grad_rpe: need at least two samples");
  Accumulator accA(state.a.size(), 1), accV(state.v.size(), 1);
  Mat A(task.n, task.n);
  for (int i = 0; i < task.n; ++i) {
    for (int r = 0; r < task.n; ++r) A(i, r) = state.at(task.ring_offset(i - r));
  }
  Vec da(state.a.size()), dv(state.v.size());
  for (int s = 0; s < samples; ++s) {
    da.setZero();
    dv.setZero();
    for_each_window(task, training, rng, [&](const TaskSample& smp, int shift) {
      const Vec sv = smp.x * state.v;
      const Vec e2 = 2.0 * window_residual(task, A * sv, smp.y, shift);
      for (int i = 0; i < task.n; ++i) {
        if (e2(i) == 0.0) continue;
        for (int r = 0; r < task.n; ++r) da(task.ring_offset(i - r) + task.n - 1) += e2(i) * sv(r);
      }
      dv += smp.x.transpose() * (A.transpose() * e2);
    });
    accA.add(da);
    accV.add(dv);
  }
  return {accA.finish(), accV.finish()};
}

}  // namespace lengen::theory

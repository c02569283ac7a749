#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "lengen/theory.hpp"

namespace lengen::theory {

namespace {

constexpr double kBlowUp = 1e12;

void check_finite(const Vec& A, double t) {
  for (Eigen::Index j = 0; j < A.size(); ++j) {
    if (!std::isfinite(A(j)) || std::abs(A(j)) > kBlowUp) {
      throw FlowDiverged("flow diverged at t=" + std::to_string(t) + " (A_" + std::to_string(j) + ")");
    }
  }
}

}  // namespace

int fold_index(int j, int n) {
  int r = ((j % n) + n) % n;
  return r > n / 2 ? n - r : r;
}

Vec gram_derivative(const Vec& A, const TheoryTask& task, double epsilon) {
  const int n = task.n;
  const int K = 2 * task.w + 1;
  const int half = n / 2;
  if (A.size() != half + 1) throw std::invalid_argument("gram_derivative: expected floor(n/2)+1 entries");
  const auto at = [&](int j) { return A(fold_index(j, n)); };
  Vec dA(A.size());
  for (int j = 0; j <= half; ++j) {
    double v = 8.0 * K * (task.alpha - A(0)) * A(j);
    for (int r = 1; r <= 2 * task.w; ++r) v -= 8.0 * (K - r) * at(r) * (at(j - r) + at(j + r));
    for (int q = 1; q <= task.m(); ++q) {
      const int weight = std::max(0, K - q);
      v += 8.0 * weight * task.beta(q) * (at(j + q) + at(j - q));
    }
    dA(j) = v - 2.0 * epsilon * A(j);
  }
  return dA;
}

GramSeries flow_integrate(GramSeries s, const TheoryTask& task, const FlowConfig& flow) {
  const double dt = flow.resolved_dt(task.alpha);
  const double eps = flow.epsilon >= 0.0 ? flow.epsilon : 0.0;
  const int every = std::max(1, flow.log_every);
  check_finite(s.A, s.t);
  if (s.log.empty()) s.log.emplace_back(s.t, s.A);
  for (std::int64_t step = 1; step <= flow.steps; ++step) {
    const Vec k1 = gram_derivative(s.A, task, eps);
    const Vec k2 = gram_derivative(s.A + 0.5 * dt * k1, task, eps);
    const Vec k3 = gram_derivative(s.A + 0.5 * dt * k2, task, eps);
    const Vec k4 = gram_derivative(s.A + dt * k3, task, eps);
    s.A += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    s.t += dt;
    check_finite(s.A, s.t);
    if (step % every == 0 || step == flow.steps) s.log.emplace_back(s.t, s.A);
  }
  return s;
}

double closed_form_A0(double A0, double alpha, double t) {
  if (A0 <= 0.0) throw std::invalid_argument("closed_form_A0: initial value must be positive");
  return alpha / (1.0 + (alpha / A0 - 1.0) * std::exp(-8.0 * alpha * t));
}

Mat circulant_gram(const Vec& A, int n) {
  Mat C(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) C(i, j) = A(fold_index(j - i, n));
  }
  return C;
}

Mat translation_invariant_P(const Vec& A, int n, int d, std::uint64_t seed) {
  if (d < n) throw std::invalid_argument("translation_invariant_P: need d >= n");
  Eigen::SelfAdjointEigenSolver<Mat> eig(circulant_gram(A, n));
  if (eig.eigenvalues().minCoeff() < -1e-12) {
    throw std::invalid_argument("translation_invariant_P: gram series is not positive semi-definite");
  }
  const Vec root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Mat S = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Mat R(d, n);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < n; ++j) R(i, j) = g(rng);
  }
  const Mat Q = Eigen::HouseholderQR<Mat>(R).householderQ() * Mat::Identity(d, n);
  return S * Q.transpose();
}

double gram_deviation(const Mat& P) {
  const int n = static_cast<int>(P.rows());
  const Mat G = P * P.transpose();
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    double lo = G(0, j % n), hi = lo;
    for (int k = 1; k < n; ++k) {
      const double v = G(k, (k + j) % n);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    worst = std::max(worst, hi - lo);
  }
  return worst;
}

PFlowResult p_flow_integrate(Mat P, const TheoryTask& task, const FlowConfig& flow) {
  const double dt = flow.resolved_dt(task.alpha);
  const double eps = flow.epsilon >= 0.0 ? flow.epsilon : 0.0;
  const int every = std::max(1, flow.log_every);
  const auto rhs = [&](const Mat& X) -> Mat { return -expected_grad_aug(X, task) - eps * X; };
  PFlowResult out;
  double t = 0.0;
  out.max_deviation = gram_deviation(P);
  out.deviation_log.emplace_back(t, out.max_deviation);
  for (std::int64_t step = 1; step <= flow.steps; ++step) {
    const Mat k1 = rhs(P);
    const Mat k2 = rhs(P + 0.5 * dt * k1);
    const Mat k3 = rhs(P + 0.5 * dt * k2);
    const Mat k4 = rhs(P + dt * k3);
    P += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += dt;
    if (!P.allFinite() || P.cwiseAbs().maxCoeff() > kBlowUp) {
      throw FlowDiverged("P-space flow diverged at t=" + std::to_string(t));
    }
    const double dev = gram_deviation(P);
    out.max_deviation = std::max(out.max_deviation, dev);
    if (step % every == 0 || step == flow.steps) out.deviation_log.emplace_back(t, dev);
  }
  out.P = std::move(P);
  return out;
}

}  // namespace lengen::theory

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "lengen/theory.hpp"

using namespace lengen;
using namespace lengen::theory;

namespace {

Mat gaussian(Eigen::Index rows, Eigen::Index cols, double sd, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  Mat x(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) x(i, j) = g(rng);
  }
  return x;
}

// Five-point stencil: exact up to rounding for the quartic expected losses.
Mat numeric_grad(Mat& x, const std::function<double()>& f, double h = 1e-3) {
  Mat g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double orig = x(i, j);
      auto at = [&](double delta) {
        x(i, j) = orig + delta;
        return f();
      };
      g(i, j) = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
      x(i, j) = orig;
    }
  }
  return g;
}

double rel_error(const Mat& analytic, const Mat& numeric) {
  const double scale = std::max(analytic.norm(), numeric.norm());
  return scale == 0.0 ? 0.0 : (analytic - numeric).norm() / scale;
}

// Sample-mean gradient within 3 standard errors of the exact one, in norm.
bool within_3se(const MCEstimate& mc, const Mat& exact) {
  const double err = (mc.mean - exact).norm();
  return err <= 3.0 * mc.se.norm();
}

TheoryTask small_task(int w = 1, std::vector<double> betas = {0.5, 0.2}) {
  return TheoryTask::make(9, 3, 6, 2.0, std::move(betas), w, 4);
}

// y_i computed straight from the definition, one position at a time.
double brute_target(const TheoryTask& t, const Mat& x, int i) {
  double y = t.alpha * x.row(i).dot(t.theta);
  for (int j = 1; j <= t.m(); ++j) {
    const int lo = ((i - j) % t.n + t.n) % t.n;
    const int hi = (i + j) % t.n;
    y += t.betas[j - 1] * (x.row(lo).dot(t.theta) + x.row(hi).dot(t.theta));
  }
  return y;
}

}  // namespace

TEST_CASE("task construction and validation") {
  const auto t = small_task();
  CHECK(t.theta.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(t.beta(0) == 0.0);
  CHECK(t.beta(2) == 0.2);
  CHECK(t.beta(3) == 0.0);
  CHECK(t.wrap(-1) == t.n - 1);
  CHECK(t.ring_offset(t.n - 1) == -1);
  CHECK(t.ring_offset(4) == 4);
  CHECK(t.ring_offset(5) == -4);
  CHECK_THROWS_AS(TheoryTask::make(5, 6, 3, 2.0, {0.5}, 0, 1), std::invalid_argument);
  auto bad = t;
  bad.theta *= 2.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("sampled targets follow the ring regression") {
  const auto t = small_task();
  Rng rng = make_rng(1);
  CHECK(target_of(t, Mat::Zero(t.n, t.d)).isZero());

  auto t1 = TheoryTask::make(9, 3, 6, 2.0, {0.5}, 0, 4);
  const Mat theta_rows = Mat::Ones(t1.n, 1) * t1.theta.transpose();
  const Vec y = target_of(t1, theta_rows);
  for (int i = 0; i < t1.n; ++i) CHECK(y(i) == doctest::Approx(2.0 + 2 * 0.5).epsilon(1e-14));

  const auto full = sample_task(t, SampleMode::full, rng);
  for (int i = 0; i < t.n; ++i) CHECK(full.y(i) == doctest::Approx(brute_target(t, full.x, i)).epsilon(1e-12));

  const auto seen = sample_task(t, SampleMode::seen_padded, rng);
  CHECK(seen.x.bottomRows(t.n - t.n1).isZero());
  CHECK(seen.x.topRows(t.n1).cwiseAbs().minCoeff() > 0.0);

  const auto shifted = sample_shifted(t, t.n - 1, rng);
  CHECK(shifted.x.row(t.n - 1).norm() > 0.0);
  CHECK(shifted.x.row(0).norm() > 0.0);
  CHECK(shifted.x.row(t.n1 - 1).norm() == 0.0);
}

TEST_CASE("APE predictions") {
  const auto t = small_task();
  Rng rng = make_rng(2);
  const auto s = sample_task(t, SampleMode::seen_padded, rng);
  APEState zero{Mat::Zero(t.n, t.d), t.theta};
  CHECK(ape_predict(zero, s.x).isZero());

  // mutually orthogonal rows: each position only sees itself
  Mat P = Mat::Zero(t.n, t.d + t.n);
  Vec v = Vec::Zero(t.d + t.n);
  v.head(t.d) = t.theta;
  for (int i = 0; i < t.n; ++i) P(i, t.d + i) = 0.5 + i;
  Mat x = Mat::Zero(t.n, t.d + t.n);
  x.leftCols(t.d) = s.x;
  const Vec yhat = ape_predict({P, v}, x);
  for (int i = 0; i < t.n1; ++i) {
    CHECK(yhat(i) == doctest::Approx(s.x.row(i).dot(t.theta) * P.row(i).squaredNorm()).epsilon(1e-12));
  }

  // absorbed form against raw positions, key/query map W and value head
  const int dp = 5;
  const Mat raw = gaussian(t.n, dp, 1.0, 3);
  const Mat W = gaussian(4, dp, 1.0, 4);
  const Mat WV = gaussian(3, t.d, 1.0, 5);
  const Vec h = gaussian(3, 1, 1.0, 6);
  const APEState absorbed{raw * W.transpose(), WV.transpose() * h};
  const Vec fast = ape_predict(absorbed, s.x);
  for (int i = 0; i < t.n; ++i) {
    Vec acc = Vec::Zero(t.d);
    for (int r = 0; r < t.n; ++r) {
      const double weight = (W * raw.row(r).transpose()).dot(W * raw.row(i).transpose());
      acc += weight * s.x.row(r).transpose();
    }
    CHECK(fast(i) == doctest::Approx(h.dot(WV * acc)).epsilon(1e-10));
  }
}

TEST_CASE("RPE predictions") {
  const auto t = small_task();
  Rng rng = make_rng(3);
  const auto s = sample_task(t, SampleMode::full, rng);
  CHECK(rpe_predict(RPEState::zeros(t.n, t.d), t, s.x).isZero());

  RPEState fixed = RPEState::zeros(t.n, t.d);
  fixed.v = t.theta;
  fixed.at(0) = t.alpha;
  for (int j = 1; j <= t.m(); ++j) fixed.at(j) = fixed.at(-j) = t.beta(j);
  const Vec yhat = rpe_predict(fixed, t, s.x);
  for (int i = 0; i < t.n; ++i) CHECK(yhat(i) == doctest::Approx(s.y(i)).epsilon(1e-12));

  RPEState rnd{gaussian(2 * t.n - 1, 1, 1.0, 9), gaussian(t.d, 1, 1.0, 10)};
  const Vec fast = rpe_predict(rnd, t, s.x);
  for (int i = 0; i < t.n; ++i) {
    double acc = 0.0;
    for (int r = 0; r < t.n; ++r) {
      int off = ((i - r) % t.n + t.n) % t.n;
      if (off > t.n / 2) off -= t.n;
      acc += rnd.a(off + t.n - 1) * s.x.row(r).dot(rnd.v);
    }
    CHECK(fast(i) == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("expected APE gradients") {
  const auto t = small_task();
  APEState st{gaussian(t.n, t.d, 0.4, 11), t.theta + 0.3 * gaussian(t.d, 1, 1.0, 12)};
  const Mat g = expected_grad_ape(st, t, Training::noaug);
  CHECK(g.bottomRows(t.n - t.n1).isZero(0.0));

  for (Training tr : {Training::noaug, Training::aug}) {
    CAPTURE(static_cast<int>(tr));
    auto f = [&] { return expected_loss_ape(st, t, tr); };
    CHECK(rel_error(expected_grad_ape(st, t, tr), numeric_grad(st.P, f)) < 1e-6);
    Mat v = st.v;
    auto fv = [&] {
      APEState tmp{st.P, v};
      return expected_loss_ape(tmp, t, tr);
    };
    CHECK(rel_error(expected_grad_ape_v(st, t, tr), numeric_grad(v, fv)) < 1e-6);
  }
}

TEST_CASE("closed-form augmented gradient") {
  SUBCASE("matches the generic expression and its finite differences") {
    const auto t = small_task(1);  // n1 = 2w + 1
    Mat P = gaussian(t.n, t.d, 0.4, 13);
    const APEState st{P, t.theta};
    const Mat closed = expected_grad_aug(P, t);
    CHECK(rel_error(closed, expected_grad_ape(st, t, Training::aug)) < 1e-12);
    auto f = [&] { return expected_loss_ape(APEState{P, t.theta}, t, Training::aug); };
    CHECK(rel_error(closed, numeric_grad(P, f)) < 1e-6);
  }
  SUBCASE("w = 0 and beta = 0 reduce to a per-row cubic") {
    const auto t = TheoryTask::make(7, 1, 4, 2.0, {}, 0, 2);
    const Mat P = gaussian(t.n, t.d, 0.5, 14);
    const Mat g = expected_grad_aug(P, t);
    for (int k = 0; k < t.n; ++k) {
      const Vec expect = 4.0 * P.row(k).squaredNorm() * P.row(k).transpose() - 4.0 * t.alpha * P.row(k).transpose();
      CHECK((g.row(k).transpose() - expect).norm() < 1e-12);
    }
  }
  SUBCASE("translation covariance") {
    const auto t = small_task(2);
    const Mat P = gaussian(t.n, t.d, 0.4, 15);
    Mat shifted(t.n, t.d);
    for (int k = 0; k < t.n; ++k) shifted.row(t.wrap(k + 3)) = P.row(k);
    const Mat g = expected_grad_aug(P, t);
    const Mat gs = expected_grad_aug(shifted, t);
    for (int k = 0; k < t.n; ++k) CHECK((gs.row(t.wrap(k + 3)) - g.row(k)).norm() < 1e-12);
  }
}

TEST_CASE("expected RPE gradients") {
  const auto t = TheoryTask::make(15, 4, 5, 2.0, {0.5}, 0, 7);
  RPEState fixed = RPEState::zeros(t.n, t.d);
  fixed.v = t.theta;
  fixed.at(0) = t.alpha;
  fixed.at(1) = fixed.at(-1) = t.beta(1);
  const auto g0 = expected_grad_rpe(fixed, t, Training::noaug);
  CHECK(g0.a.norm() < 1e-12);
  CHECK(g0.v.norm() < 1e-12);

  RPEState st{gaussian(2 * t.n - 1, 1, 0.5, 16), t.theta};
  const auto g = expected_grad_rpe(st, t, Training::noaug);
  for (int k = -(t.n - 1); k <= t.n - 1; ++k) {
    const int idx = k + t.n - 1;
    if (std::abs(k) >= t.n1) {
      CHECK(g.a(idx) == 0.0);
      continue;
    }
    double expect = 2.0 * (t.n1 - std::abs(k)) * st.at(k);
    if (k == 0) expect -= 2.0 * t.n1 * t.alpha;
    if (std::abs(k) == 1) expect -= 2.0 * (t.n1 - 1) * t.beta(1);
    CHECK(g.a(idx) == doctest::Approx(expect).epsilon(1e-12));
  }

  for (Training tr : {Training::noaug, Training::aug}) {
    RPEState s{gaussian(2 * t.n - 1, 1, 0.5, 17), t.theta + 0.2 * gaussian(t.d, 1, 1.0, 18)};
    const auto ga = expected_grad_rpe(s, t, tr);
    auto f = [&] { return expected_loss_rpe(s, t, tr); };
    Mat a = s.a;
    auto fa = [&] {
      RPEState tmp{a, s.v};
      return expected_loss_rpe(tmp, t, tr);
    };
    CHECK(rel_error(ga.a, numeric_grad(a, fa)) < 1e-6);
    Mat v = s.v;
    auto fv = [&] {
      RPEState tmp{s.a, v};
      return expected_loss_rpe(tmp, t, tr);
    };
    CHECK(rel_error(ga.v, numeric_grad(v, fv)) < 1e-6);
    (void)f;
  }
}

TEST_CASE("Monte-Carlo gradients agree with the expected ones") {
  const auto t = TheoryTask::make(7, 3, 4, 2.0, {0.5}, 1, 21);
  Rng rng = make_rng(99);
  const int samples = 20000;
  APEState ape{gaussian(t.n, t.d, 0.5, 22), t.theta + 0.3 * gaussian(t.d, 1, 1.0, 23)};
  for (Training tr : {Training::noaug, Training::aug}) {
    CAPTURE(static_cast<int>(tr));
    const auto mc = mc_grad_ape(ape, t, tr, samples, rng);
    CHECK(within_3se(mc.P, expected_grad_ape(ape, t, tr)));
    CHECK(within_3se(mc.v, expected_grad_ape_v(ape, t, tr)));
  }
  APEState aligned{ape.P, t.theta};
  CHECK(within_3se(mc_grad_ape(aligned, t, Training::aug, samples, rng).P, expected_grad_aug(aligned.P, t)));

  RPEState rpe{gaussian(2 * t.n - 1, 1, 0.5, 24), t.theta + 0.3 * gaussian(t.d, 1, 1.0, 25)};
  for (Training tr : {Training::noaug, Training::aug}) {
    const auto mc = mc_grad_rpe(rpe, t, tr, samples, rng);
    const auto ex = expected_grad_rpe(rpe, t, tr);
    CHECK(within_3se(mc.a, ex.a));
    CHECK(within_3se(mc.v, ex.v));
  }
  CHECK_THROWS_AS(mc_grad_ape(ape, t, Training::noaug, 1, rng), std::invalid_argument);
}

TEST_CASE("logistic closed form") {
  CHECK(closed_form_A0(0.5, 2.0, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(closed_form_A0(0.5, 2.0, 100.0 / 2.0) - 2.0) < 1e-9);
  for (double tt : {0.0, 0.3, 7.0}) CHECK(closed_form_A0(2.0, 2.0, tt) == 2.0);
  CHECK_THROWS_AS(closed_form_A0(0.0, 2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(closed_form_A0(-1.0, 2.0, 1.0), std::invalid_argument);
}

TEST_CASE("gram flow") {
  SUBCASE("diagonal-only start follows the logistic solution and stays diagonal") {
    const auto t = TheoryTask::make(11, 1, 4, 2.0, {}, 0, 1);
    GramSeries s;
    s.A = Vec::Zero(t.n / 2 + 1);
    s.A(0) = 0.5;
    FlowConfig f;
    f.steps = 5000;
    f.epsilon = 0.0;
    const auto out = flow_integrate(s, t, f);
    double worst = 0.0;
    for (const auto& [time, A] : out.log) {
      worst = std::max(worst, std::abs(A(0) - closed_form_A0(0.5, t.alpha, time)));
      CHECK(A.tail(A.size() - 1).isZero(0.0));
    }
    CHECK(out.t == doctest::Approx(5.0 / t.alpha).epsilon(1e-9));
    CHECK(worst < 1e-6);
  }
  SUBCASE("index folding") {
    CHECK(fold_index(0, 10) == 0);
    CHECK(fold_index(6, 10) == 4);
    CHECK(fold_index(-1, 10) == 1);
    CHECK(fold_index(5, 10) == 5);
    CHECK(fold_index(6, 11) == 5);
  }
  SUBCASE("sign of every off-diagonal derivative follows the entry while A_0 < alpha") {
    const auto t = TheoryTask::make(21, 1, 4, 2.0, {}, 0, 1);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Vec A = gaussian(t.n / 2 + 1, 1, 0.3, seed);
      A(0) = 0.1 + 1.8 * std::abs(std::tanh(A(0)));
      const Vec dA = gram_derivative(A, t, 0.0);
      for (int j = 1; j < A.size(); ++j) CHECK((dA(j) > 0) == (A(j) > 0));
    }
  }
  SUBCASE("P-space integration reproduces the gram trajectory") {
    const auto t = TheoryTask::make(8, 3, 16, 2.0, {0.5}, 1, 3);
    Vec A(t.n / 2 + 1);
    A << 0.6, 0.05, -0.03, 0.02, 0.01;
    FlowConfig f;
    f.steps = 300;
    f.epsilon = 1e-3;
    const auto gram = flow_integrate(GramSeries{A, 0.0, {}}, t, f);
    const auto pflow = p_flow_integrate(translation_invariant_P(A, t.n, t.d, 5), t, f);
    const Mat G = pflow.P * pflow.P.transpose();
    CHECK((G - circulant_gram(gram.A, t.n)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(pflow.max_deviation < 1e-9);
  }
  SUBCASE("blow-up is reported") {
    const auto t = TheoryTask::make(8, 1, 4, 2.0, {}, 0, 1);
    GramSeries s{Vec::Constant(t.n / 2 + 1, -5.0), 0.0, {}};
    FlowConfig f;
    f.steps = 100000;
    CHECK_THROWS_AS(flow_integrate(s, t, f), FlowDiverged);
  }
}

TEST_CASE("translation-invariant embedding") {
  Vec A(5);
  A << 1.0, 0.2, -0.1, 0.05, 0.02;
  const Mat P = translation_invariant_P(A, 9, 20, 3);
  CHECK(P.rows() == 9);
  CHECK(P.cols() == 20);
  CHECK((P * P.transpose() - circulant_gram(A, 9)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(gram_deviation(P) < 1e-12);
  CHECK_THROWS_AS(translation_invariant_P(A, 9, 8, 3), std::invalid_argument);
  Vec bad(5);
  bad << 0.0, 1.0, 0.0, 0.0, 0.0;
  CHECK_THROWS_AS(translation_invariant_P(bad, 9, 20, 3), std::invalid_argument);
}

TEST_CASE("per-position test losses") {
  const auto t = TheoryTask::make(12, 4, 6, 2.0, {0.5}, 0, 8);
  Rng rng = make_rng(5);

  RPEState fixed = RPEState::zeros(t.n, t.d);
  fixed.v = t.theta;
  fixed.at(0) = t.alpha;
  fixed.at(1) = fixed.at(-1) = t.beta(1);
  CHECK(position_test_loss(fixed, t, LossMode::analytic).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(position_test_loss(fixed, t, LossMode::monte_carlo, 5000, &rng).maxCoeff() < 1e-3);

  // window rows reproduce the target exactly, unseen rows are zero
  const Mat Tw = target_matrix(t).topLeftCorner(t.n1, t.n1);
  Eigen::SelfAdjointEigenSolver<Mat> eig(Tw);
  const Mat root = eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  APEState ape{Mat::Zero(t.n, t.d + t.n1), Vec::Zero(t.d + t.n1)};
  ape.P.topRightCorner(t.n1, t.n1) = root;
  ape.v.head(t.d) = t.theta;
  auto wide = t;
  wide.d = t.d + t.n1;
  wide.theta = ape.v;
  const Vec loss = position_test_loss(ape, wide, LossMode::analytic);
  const double unseen = t.alpha * t.alpha + 2 * t.beta(1) * t.beta(1);
  for (int i = t.n1; i < t.n; ++i) CHECK(loss(i) == doctest::Approx(unseen).epsilon(1e-12));
  for (int i = 1; i + 1 < t.n1; ++i) CHECK(std::abs(loss(i)) < 1e-12);

  // analytic against Monte-Carlo: a squared centred Gaussian error has sd sqrt(2) * mean
  const int samples = 5000;
  APEState rnd{gaussian(t.n, t.d, 0.5, 30), t.theta};
  const Vec a = position_test_loss(rnd, t, LossMode::analytic);
  const Vec m = position_test_loss(rnd, t, LossMode::monte_carlo, samples, &rng);
  for (int i = 0; i < t.n; ++i) CHECK(std::abs(m(i) - a(i)) <= 3.0 * std::sqrt(2.0) * a(i) / std::sqrt(samples));

  RPEState rr{gaussian(2 * t.n - 1, 1, 0.5, 31), t.theta};
  const Vec ra = position_test_loss(rr, t, LossMode::analytic);
  const Vec rm = position_test_loss(rr, t, LossMode::monte_carlo, samples, &rng);
  for (int i = 0; i < t.n; ++i) CHECK(std::abs(rm(i) - ra(i)) <= 3.0 * std::sqrt(2.0) * ra(i) / std::sqrt(samples));

  CHECK_THROWS_AS(position_test_loss(rr, t, LossMode::monte_carlo, 10, nullptr), std::invalid_argument);
}

TEST_CASE("gram-series loss equals the loss of any embedding of it") {
  const auto t = TheoryTask::make(9, 1, 12, 2.0, {0.5}, 0, 6);
  Vec A(5);
  A << 1.2, 0.3, 0.1, -0.05, 0.02;
  const APEState st{translation_invariant_P(A, t.n, t.d, 4), t.theta};
  const Vec per = position_test_loss(st, t, LossMode::analytic);
  for (int i = 0; i < t.n; ++i) CHECK(per(i) == doctest::Approx(gram_test_loss(A, t)).epsilon(1e-10));
}

TEST_CASE("v-orthogonal component shrinks under the expected update") {
  const auto t = TheoryTask::make(15, 4, 8, 2.0, {0.5}, 0, 9);
  RPEState st{gaussian(2 * t.n - 1, 1, 0.3, 40), gaussian(t.d, 1, 1.0, 41)};
  const double eta = 0.01;
  auto orth = [&](const Vec& v) { return (v - v.dot(t.theta) * t.theta).norm(); };
  double prev = orth(st.v);
  for (int step = 0; step < 200; ++step) {
    const auto g = expected_grad_rpe(st, t, Training::noaug);
    st.v -= eta * g.v;
    const double now = orth(st.v);
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("mirror offsets evolve identically from a symmetric start") {
  const auto t = TheoryTask::make(15, 5, 6, 2.0, {0.5}, 0, 10);
  RPEState st{gaussian(2 * t.n - 1, 1, 0.3, 42), gaussian(t.d, 1, 0.5, 43)};
  for (int k = 1; k < t.n; ++k) st.at(-k) = st.at(k);
  for (int step = 0; step < 300; ++step) {
    const auto g = expected_grad_rpe(st, t, Training::noaug);
    st.a -= 0.005 * g.a;
    st.v -= 0.005 * g.v;
    CHECK(st.at(1) == st.at(-1));
  }
}

TEST_CASE("population SGD on small tasks") {
  const auto t = TheoryTask::make(15, 5, 20, 2.0, {0.5}, 0, 12);
  SUBCASE("RPE reaches the fixed point") {
    FlowConfig f;
    f.eta = 0.01;
    f.steps = 400000;
    f.epsilon = 2e-5;
    f.log_every = 100000;
    const auto r = sgd_population_train(ModelKind::rpe, t, f);
    REQUIRE(r.rpe);
    CHECK(std::abs(r.rpe->at(0) - t.alpha) < 1e-3);
    CHECK(std::abs(r.rpe->at(1) - t.beta(1)) < 1e-3);
    CHECK(std::abs(r.rpe->at(-1) - t.beta(1)) < 1e-3);
    for (int k = 2; k < t.n; ++k) CHECK(std::abs(r.rpe->at(k)) < 1e-3);
    CHECK((r.rpe->v - t.theta).norm() < 1e-6);
    CHECK(r.test_loss.maxCoeff() < 1e-4);
    CHECK(r.loss_curve.front().second > r.loss_curve.back().second);
  }
  SUBCASE("APE forgets unseen rows and keeps the unseen loss") {
    FlowConfig f;
    f.eta = 0.02;
    f.steps = 200000;
    f.epsilon = 1e-4;
    f.log_every = 0;
    const auto r = sgd_population_train(ModelKind::ape, t, f);
    REQUIRE(r.ape);
    CHECK(r.ape->P.bottomRows(t.n - t.n1).rowwise().norm().maxCoeff() < 1e-6);
    const double unseen = t.alpha * t.alpha + 2 * t.beta(1) * t.beta(1);
    for (int i = t.n1 + 1; i + 1 < t.n; ++i) CHECK(r.test_loss(i) == doctest::Approx(unseen).epsilon(0.02));
  }
  SUBCASE("augmented APE needs a window of 2w + 1") {
    FlowConfig f;
    f.steps = 10;
    CHECK_THROWS_AS(sgd_population_train(ModelKind::ape_aug, t, f), std::invalid_argument);
  }
  SUBCASE("a step size far too large is reported as divergence") {
    FlowConfig f;
    f.eta = 50.0;
    f.steps = 5000;
    CHECK_THROWS_AS(sgd_population_train(ModelKind::rpe, t, f), FlowDiverged);
  }
  CHECK(model_kind_from_string("ape_aug") == ModelKind::ape_aug);
  CHECK(to_string(ModelKind::rpe) == "rpe");
  CHECK_THROWS_AS(model_kind_from_string("alibi"), std::invalid_argument);
}

#pragma once

// Linear-attention regression lab: the synthetic ring task, factored
// APE / RPE predictors, population (expected) losses and gradients,
// Monte-Carlo estimates of the same, the gram-series flow and
// population SGD.
//
// Positions are 0-indexed on a ring of length n. The seen window is
// [0, n1); with augmentation every circular shift of it is used.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lengen/rng.hpp"

namespace lengen::theory {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct TheoryTask {
  int n = 51;
  int n1 = 10;
  int d = 200;
  double alpha = 2.0;
  std::vector<double> betas{0.5};
  Vec theta;
  int w = 0;

  int m() const { return static_cast<int>(betas.size()); }
  /// beta_j for 1 <= j <= m, else 0.
  double beta(int j) const;
  int wrap(int i) const { return ((i % n) + n) % n; }
  /// Circular offset reduced to (-n/2, n/2].
  int ring_offset(int diff) const;
  /// Coefficient of <theta, x_r> in y_i.
  double target_coef(int i, int r) const;
  void validate() const;

  /// Task with a random unit theta drawn from `seed`.
  static TheoryTask make(int n, int n1, int d, double alpha, std::vector<double> betas, int w, std::uint64_t seed);
};

class FlowDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SampleMode { seen_padded, full };

struct TaskSample {
  Mat x;  // n x d
  Vec y;  // n
};

Vec target_of(const TheoryTask& task, const Mat& x);
/// seen_padded zeroes every position outside [0, n1).
TaskSample sample_task(const TheoryTask& task, SampleMode mode, Rng& rng);
/// Gaussian on the circular window [shift, shift + n1), zero elsewhere.
TaskSample sample_shifted(const TheoryTask& task, int shift, Rng& rng);

struct APEState {
  Mat P;  // n x d
  Vec v;
};

/// a is indexed by offset in [-(n-1), n-1]; predictions use ring offsets.
struct RPEState {
  Vec a;
  Vec v;

  static RPEState zeros(int n, int d);
  int n() const { return static_cast<int>((a.size() + 1) / 2); }
  double at(int offset) const { return a(offset + n() - 1); }
  double& at(int offset) { return a(offset + n() - 1); }
};

Vec ape_predict(const APEState& state, const Mat& x);
Vec rpe_predict(const RPEState& state, const TheoryTask& task, const Mat& x);

enum class Training { noaug, aug };

/// N(i, r): number of training windows in which i is supervised while x_r
/// is random. Expected losses are sum_{i,r} N(i,r) E[(coef * <., x_r>)^2].
Mat pair_counts(const TheoryTask& task, Training training);
/// T(i, r) = target_coef(i, r).
Mat target_matrix(const TheoryTask& task);

double expected_loss_ape(const APEState& state, const TheoryTask& task, Training training);
Mat expected_grad_ape(const APEState& state, const TheoryTask& task, Training training);
Vec expected_grad_ape_v(const APEState& state, const TheoryTask& task, Training training);

/// Closed-form augmented gradient with v = theta:
///   4 sum_r (K-|r|)(p_k.p_{k+r}) p_{k+r} - 4 K alpha p_k
///   - 4 sum_j (K-j) beta_j (p_{k+j} + p_{k-j}),   K = 2w + 1.
Mat expected_grad_aug(const Mat& P, const TheoryTask& task);

double expected_loss_rpe(const RPEState& state, const TheoryTask& task, Training training);

struct RPEGrad {
  Vec a;
  Vec v;
};
RPEGrad expected_grad_rpe(const RPEState& state, const TheoryTask& task, Training training);

/// Per-component sample mean and its standard error.
struct MCEstimate {
  Mat mean;
  Mat se;
};

struct APEMonteCarlo {
  MCEstimate P;
  MCEstimate v;
};
struct RPEMonteCarlo {
  MCEstimate a;
  MCEstimate v;
};

/// Gradient of the sampled training loss averaged over `samples` draws.
/// With augmentation one draw covers every shift, each with fresh x.
APEMonteCarlo mc_grad_ape(const APEState& state, const TheoryTask& task, Training training, int samples, Rng& rng);
RPEMonteCarlo mc_grad_rpe(const RPEState& state, const TheoryTask& task, Training training, int samples, Rng& rng);

struct FlowConfig {
  double dt = 0.0;            // <= 0 selects 1e-3 / alpha
  std::int64_t steps = 1000;
  double eta = 0.005;
  double epsilon = -1.0;      // < 0 selects 1e-4 * eta * alpha
  int batch = 0;
  std::uint64_t seed = 0;
  int log_every = 1;

  double resolved_dt(double alpha) const { return dt > 0.0 ? dt : 1e-3 / alpha; }
  double resolved_epsilon(double alpha) const { return epsilon >= 0.0 ? epsilon : 1e-4 * eta * alpha; }
};

/// A_0 .. A_{floor(n/2)} of a translation-invariant gram matrix.
struct GramSeries {
  Vec A;
  double t = 0.0;
  std::vector<std::pair<double, Vec>> log;
};

/// Fold a ring offset onto 0..floor(n/2).
int fold_index(int j, int n);
/// dA/dt of the augmented flow with weight decay `epsilon`.
Vec gram_derivative(const Vec& A, const TheoryTask& task, double epsilon);
/// Fixed-step RK4. A negative epsilon counts as zero here. Throws
/// FlowDiverged once any |A_j| exceeds 1e12.
GramSeries flow_integrate(GramSeries start, const TheoryTask& task, const FlowConfig& flow);
/// Logistic solution of the w = 0, beta = 0 flow. Requires A0 > 0.
double closed_form_A0(double A0, double alpha, double t);

Mat circulant_gram(const Vec& A, int n);
/// Positional vectors whose gram matrix is circulant_gram(A, n), placed in
/// d dimensions along random orthonormal directions (d >= n).
Mat translation_invariant_P(const Vec& A, int n, int d, std::uint64_t seed);
/// max over k, l, j of |p_k.p_{k+j} - p_l.p_{l+j}|.
double gram_deviation(const Mat& P);

struct PFlowResult {
  Mat P;
  double max_deviation = 0.0;
  std::vector<std::pair<double, double>> deviation_log;
};
/// RK4 on dp_k/dt = -grad_aug(P)_k - epsilon p_k.
PFlowResult p_flow_integrate(Mat P0, const TheoryTask& task, const FlowConfig& flow);

enum class ModelKind { ape, ape_aug, rpe };
std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct TrainOptions {
  bool freeze_a = false;
  bool renormalise = true;
  double init_std = -1.0;  // < 0 selects 1/sqrt(d)
};

struct TrainResult {
  ModelKind kind = ModelKind::rpe;
  std::optional<APEState> ape;
  std::optional<RPEState> rpe;
  std::vector<std::pair<std::int64_t, double>> loss_curve;
  Vec test_loss;  // analytic, per position
};

/// Gradient descent on the expected loss with step eta and weight decay
/// epsilon: x <- x - eta grad - epsilon x. APE variants keep v = theta.
/// RPE trains a and v jointly (or v only with freeze_a) and finally moves
/// the scale of v into a so that v = theta when aligned.
TrainResult sgd_population_train(ModelKind kind, const TheoryTask& task, const FlowConfig& flow,
                                 const TrainOptions& options = {});

enum class LossMode { analytic, monte_carlo };

/// E[(yhat_i - y_i)^2] with every position Gaussian.
Vec position_test_loss(const APEState& state, const TheoryTask& task, LossMode mode, int samples = 5000,
                       Rng* rng = nullptr);
Vec position_test_loss(const RPEState& state, const TheoryTask& task, LossMode mode, int samples = 5000,
                       Rng* rng = nullptr);
/// Analytic per-position loss of any model whose gram matrix is the
/// circulant built from A (with v = theta).
double gram_test_loss(const Vec& A, const TheoryTask& task);

/// Effective position-mixing matrix: P P^T for APE, a_{ring(i-j)} for RPE.
Mat mixing_matrix(const TrainResult& result, const TheoryTask& task);

}  // namespace lengen::theory

// Acceptance run: one PASS/FAIL line per criterion with its measured time
// against the time budget. Exit status is nonzero if any criterion fails.
//
//   acceptance            run everything
//   acceptance 1 5 13     run a subset

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lengen/arith.hpp"
#include "lengen/config.hpp"
#include "lengen/datagen.hpp"
#include "lengen/experiment.hpp"
#include "lengen/model.hpp"
#include "lengen/posenc.hpp"
#include "lengen/stats.hpp"
#include "lengen/theory.hpp"

using namespace lengen;
using arith::Digits;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAILED]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Digits random_exact(int len, Rng& rng) {
  std::uniform_int_distribution<int> digit(0, 9), lead(1, 9);
  std::vector<std::uint8_t> v(static_cast<std::size_t>(len));
  for (auto& x : v) x = static_cast<std::uint8_t>(digit(rng));
  v.back() = static_cast<std::uint8_t>(lead(rng));
  return Digits::from_little_endian(v);
}

Digits random_upto(int max_len, Rng& rng) {
  std::uniform_int_distribution<int> len(1, max_len), digit(0, 9);
  std::vector<std::uint8_t> v(static_cast<std::size_t>(len(rng)));
  for (auto& x : v) x = static_cast<std::uint8_t>(digit(rng));
  return Digits::from_little_endian(v);
}

std::vector<double> gaussian(std::size_t n, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

theory::Mat gaussian_mat(Eigen::Index rows, Eigen::Index cols, double sd, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  theory::Mat x(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) x(i, j) = g(rng);
  }
  return x;
}

// ------------------------------------------------------------------ 1

Outcome oracle_add() {
  Outcome o;
  constexpr std::uint64_t kMax = 10000;
  std::vector<Digits> all;
  std::vector<std::vector<std::uint8_t>> padded;
  for (std::uint64_t v = 0; v < kMax; ++v) {
    all.push_back(Digits::from_uint(v));
    std::vector<std::uint8_t> p(4, 0);
    for (std::size_t i = 0; i < all.back().size(); ++i) p[i] = all.back()[i];
    padded.push_back(p);
  }
  std::vector<int> work;
  std::vector<std::uint8_t> out;
  std::int64_t mismatches = 0;
  for (std::uint64_t a = 0; a < kMax; ++a) {
    for (std::uint64_t b = 0; b < kMax; ++b) {
      arith::parallel_add_into(padded[a], padded[b], 4, work, out);
      const Digits sum = arith::school_add(all[a], all[b]);
      const auto school = sum.little_endian();
      bool same = true;
      for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint8_t s = i < school.size() ? school[i] : 0;
        same = same && out[i] == s;
      }
      mismatches += !same || school.size() > out.size();
    }
  }
  o.require(mismatches == 0, "exhaustive < 10^4: " + std::to_string(mismatches) + " mismatches");

  Rng rng = make_rng(101);
  std::int64_t rand_bad = 0;
  for (int k = 0; k < 100000; ++k) {
    const Digits a = random_upto(50, rng), b = random_upto(50, rng);
    rand_bad += !(arith::parallel_add(a, b, 50).sum == arith::school_add(a, b));
  }
  o.require(rand_bad == 0, "10^5 random up to 50 digits: " + std::to_string(rand_bad) + " mismatches");
  return o;
}

// ------------------------------------------------------------------ 2

Outcome oracle_mul() {
  Outcome o;
  std::int64_t bad = 0;
  for (std::uint64_t a = 0; a < 100; ++a) {
    for (std::uint64_t b = 0; b < 100; ++b) {
      const Digits da = Digits::from_uint(a), db = Digits::from_uint(b);
      bad += !(arith::parallel_mul(da, db).product == arith::school_mul(da, db));
    }
  }
  o.require(bad == 0, "exhaustive 2x2 digits: " + std::to_string(bad) + " mismatches");
  Rng rng = make_rng(202);
  std::int64_t rand_bad = 0;
  for (int k = 0; k < 100000; ++k) {
    const Digits a = random_exact(3, rng), b = random_exact(20, rng);
    rand_bad += !(arith::parallel_mul(a, b).product == arith::school_mul(a, b));
  }
  o.require(rand_bad == 0, "10^5 random 3x20 digits: " + std::to_string(rand_bad) + " mismatches");
  return o;
}

// ------------------------------------------------------------------ 3

Outcome cascade_stats() {
  Outcome o;
  const auto d50 = stats::cascade_dist(50, 1'000'000, 303);
  const double le4 = d50.generator_counts.cdf(4);
  o.require(std::abs(le4 - 0.998) <= 0.001, "P(cascade<=4 | 50 digits) = " + fmt("%.5f", le4));
  const auto d5 = stats::cascade_dist(5, 10'000'000, 304);
  const double eq4 = d5.generator_counts.prob(4);
  const bool default_ok = std::abs(eq4 / 8.3e-4 - 1.0) <= 0.2;
  o.require(default_ok, "P(cascade=4 | 5 digits) = " + fmt("%.3e", eq4));
  if (!default_ok) {
    const double alt = d5.nines_only.prob(4);
    o.detail += "; alternate convention gives " + fmt("%.3e", alt);
  }
  return o;
}

// ------------------------------------------------------------------ 4

Outcome muldep_stats() {
  Outcome o;
  const double le4 = stats::mul_dep_dist(1, 20, 1'000'000, 404).cdf(4);
  o.require(std::abs(le4 - 0.998) <= 0.001, "P(levels<=4 | 1x20) = " + fmt("%.5f", le4));
  const double eq4 = stats::mul_dep_dist(1, 5, 2'000'000, 405).prob(4);
  o.require(std::abs(eq4 / 1.9e-3 - 1.0) <= 0.2, "P(levels=4 | 1x5) = " + fmt("%.3e", eq4));
  return o;
}

// ------------------------------------------------------------------ 5

Outcome closed_form() {
  Outcome o;
  const auto t = theory::TheoryTask::make(51, 1, 200, 2.0, {}, 0, 5);
  theory::GramSeries s;
  s.A = theory::Vec::Zero(t.n / 2 + 1);
  s.A(0) = 0.5;
  theory::FlowConfig f;
  f.epsilon = 0.0;
  f.steps = static_cast<std::int64_t>(std::llround(5.0 / t.alpha / f.resolved_dt(t.alpha)));
  const auto out = theory::flow_integrate(s, t, f);
  double worst = 0.0;
  for (const auto& [time, A] : out.log) worst = std::max(worst, std::abs(A(0) - theory::closed_form_A0(0.5, t.alpha, time)));
  o.require(std::abs(out.t - 5.0 / t.alpha) < 1e-9, "horizon t = " + fmt("%.4f", out.t));
  o.require(worst < 1e-6, "max |A_0 - logistic| = " + fmt("%.2e", worst));
  return o;
}

// ------------------------------------------------------------------ 6

Outcome rpe_convergence() {
  Outcome o;
  const auto t = theory::TheoryTask::make(51, 10, 200, 2.0, {0.5}, 0, 6);
  theory::FlowConfig f;
  f.eta = 0.005;
  f.steps = 8'000'000;
  f.log_every = 0;
  f.seed = 61;
  const auto r = theory::sgd_population_train(theory::ModelKind::rpe, t, f);
  const auto& a = *r.rpe;
  double far = 0.0;
  for (int k = 2; k < t.n; ++k) far = std::max({far, std::abs(a.at(k)), std::abs(a.at(-k))});
  o.require(std::abs(a.at(0) - t.alpha) < 1e-3, "|a_0 - alpha| = " + fmt("%.2e", std::abs(a.at(0) - t.alpha)));
  const double b1 = std::max(std::abs(a.at(1) - t.beta(1)), std::abs(a.at(-1) - t.beta(1)));
  o.require(b1 < 1e-3, "max |a_{+-1} - beta| = " + fmt("%.2e", b1));
  o.require(far < 1e-3, "max_{|j|>=2} |a_j| = " + fmt("%.2e", far));
  Rng rng = make_rng(62);
  const theory::Vec mc = theory::position_test_loss(a, t, theory::LossMode::monte_carlo, 5000, &rng);
  o.require(mc.maxCoeff() < 1e-2, "max MC position loss = " + fmt("%.2e", mc.maxCoeff()));
  return o;
}

// ------------------------------------------------------------------ 7

Outcome ape_failure() {
  Outcome o;
  const auto t = theory::TheoryTask::make(51, 10, 200, 2.0, {0.5}, 0, 7);
  theory::FlowConfig f;
  f.eta = 0.05;
  f.steps = 1'400'000;
  f.log_every = 0;
  f.seed = 71;
  const auto r = theory::sgd_population_train(theory::ModelKind::ape, t, f);
  const auto& P = r.ape->P;
  const double unseen_norm = P.bottomRows(t.n - t.n1).rowwise().norm().maxCoeff();
  o.require(unseen_norm < 1e-6, "max_{k>n1} |p_k| = " + fmt("%.2e", unseen_norm));
  Rng rng = make_rng(72);
  const theory::Vec mc = theory::position_test_loss(*r.ape, t, theory::LossMode::monte_carlo, 5000, &rng);
  const double target = t.alpha * t.alpha + 2 * t.beta(1) * t.beta(1);
  const double mean = mc.tail(t.n - t.n1).mean();
  o.require(std::abs(mean / target - 1.0) <= 0.02,
            "mean MC unseen loss = " + fmt("%.4f", mean) + " vs " + fmt("%.4f", target));
  return o;
}

// ------------------------------------------------------------------ 8

Outcome aug_failure() {
  Outcome o;
  const auto t = theory::TheoryTask::make(51, 1, 200, 2.0, {}, 0, 8);
  const int half = t.n / 2;
  theory::GramSeries s{theory::Vec::Constant(half + 1, 1.0 / std::sqrt(static_cast<double>(t.d))), 0.0, {}};
  s.A(0) = 0.5;
  theory::FlowConfig f;
  f.epsilon = 0.0;
  f.steps = static_cast<std::int64_t>(std::llround(5.0 / t.alpha / f.resolved_dt(t.alpha)));
  const auto out = theory::flow_integrate(s, t, f);
  bool monotone = true;
  std::size_t checked = 0;
  for (std::size_t k = 1; k < out.log.size(); ++k) {
    const auto& prev = out.log[k - 1].second;
    const auto& now = out.log[k].second;
    if (prev(0) >= t.alpha) break;
    ++checked;
    for (int j = 1; j <= half; ++j) monotone = monotone && std::abs(now(j)) >= std::abs(prev(j));
  }
  o.require(monotone && checked > 0, "|A_j| non-decreasing over " + std::to_string(checked) + " steps");
  const double loss = theory::gram_test_loss(out.A, t);
  const double bound = 0.5 * (t.n - 1) / static_cast<double>(t.d);
  o.require(loss >= bound, "final loss " + fmt("%.4f", loss) + " >= " + fmt("%.4f", bound));
  return o;
}

// ------------------------------------------------------------------ 9

double rel_error(const theory::Mat& a, const theory::Mat& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

theory::Mat numeric_grad(theory::Mat& x, const std::function<double()>& f, double h = 1e-3) {
  theory::Mat g(x.rows(), x.cols());
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

Outcome gradient_fidelity() {
  Outcome o;
  using theory::Training;
  const auto t = theory::TheoryTask::make(9, 3, 6, 2.0, {0.5}, 1, 9);
  double fd_worst = 0.0;
  std::string fd_worst_name;
  const auto fd = [&](const std::string& name, const theory::Mat& analytic, theory::Mat x,
                      const std::function<double(const theory::Mat&)>& loss) {
    const double e = rel_error(analytic, numeric_grad(x, [&] { return loss(x); }));
    if (e >= fd_worst) {
      fd_worst = e;
      fd_worst_name = name;
    }
  };
  theory::APEState ape{gaussian_mat(t.n, t.d, 0.4, 91), t.theta + 0.3 * gaussian_mat(t.d, 1, 1.0, 92)};
  theory::RPEState rpe{gaussian_mat(2 * t.n - 1, 1, 0.5, 93), t.theta + 0.3 * gaussian_mat(t.d, 1, 1.0, 94)};
  for (Training tr : {Training::noaug, Training::aug}) {
    const std::string tag = tr == Training::aug ? "aug" : "noaug";
    fd("ape P " + tag, theory::expected_grad_ape(ape, t, tr), ape.P,
       [&](const theory::Mat& P) { return theory::expected_loss_ape({P, ape.v}, t, tr); });
    fd("ape v " + tag, theory::expected_grad_ape_v(ape, t, tr), ape.v,
       [&](const theory::Mat& v) { return theory::expected_loss_ape({ape.P, v}, t, tr); });
    const auto g = theory::expected_grad_rpe(rpe, t, tr);
    fd("rpe a " + tag, g.a, rpe.a, [&](const theory::Mat& a) { return theory::expected_loss_rpe({a, rpe.v}, t, tr); });
    fd("rpe v " + tag, g.v, rpe.v, [&](const theory::Mat& v) { return theory::expected_loss_rpe({rpe.a, v}, t, tr); });
  }
  fd("aug closed form", theory::expected_grad_aug(ape.P, t), ape.P,
     [&](const theory::Mat& P) { return theory::expected_loss_ape({P, t.theta}, t, Training::aug); });
  o.require(fd_worst < 1e-6, "worst finite-difference rel error " + fmt("%.2e", fd_worst) + " (" + fd_worst_name + ")");

  Rng rng = make_rng(95);
  const int samples = 100000;
  int within = 0, total = 0;
  std::string misses;
  const auto mc = [&](const std::string& name, const theory::MCEstimate& est, const theory::Mat& exact) {
    ++total;
    const bool ok = (est.mean - exact).norm() <= 3.0 * est.se.norm();
    within += ok;
    if (!ok) misses += " " + name;
  };
  for (Training tr : {Training::noaug, Training::aug}) {
    const std::string tag = tr == Training::aug ? "aug" : "noaug";
    const auto ma = theory::mc_grad_ape(ape, t, tr, samples, rng);
    mc("ape P " + tag, ma.P, theory::expected_grad_ape(ape, t, tr));
    mc("ape v " + tag, ma.v, theory::expected_grad_ape_v(ape, t, tr));
    const auto mr = theory::mc_grad_rpe(rpe, t, tr, samples, rng);
    const auto er = theory::expected_grad_rpe(rpe, t, tr);
    mc("rpe a " + tag, mr.a, er.a);
    mc("rpe v " + tag, mr.v, er.v);
  }
  const theory::APEState aligned{ape.P, t.theta};
  mc("aug closed form", theory::mc_grad_ape(aligned, t, Training::aug, samples, rng).P,
     theory::expected_grad_aug(aligned.P, t));
  o.require(within == total, std::to_string(within) + "/" + std::to_string(total) +
                                 " Monte-Carlo gradients within 3 SE (10^5 samples)" + misses);
  return o;
}

// ------------------------------------------------------------------ 10

Outcome gram_invariance() {
  Outcome o;
  const auto t = theory::TheoryTask::make(16, 3, 64, 2.0, {0.5}, 1, 10);
  theory::Vec A(t.n / 2 + 1);
  Rng rng = make_rng(101);
  std::normal_distribution<double> g(0.0, 0.05);
  A(0) = 0.6;
  for (Eigen::Index j = 1; j < A.size(); ++j) A(j) = g(rng);
  theory::FlowConfig f;
  f.steps = static_cast<std::int64_t>(std::llround(5.0 / t.alpha / f.resolved_dt(t.alpha)));
  f.epsilon = 1e-4;
  f.log_every = 10;
  const auto r = theory::p_flow_integrate(theory::translation_invariant_P(A, t.n, t.d, 102), t, f);
  o.require(r.max_deviation < 1e-6, "max gram deviation " + fmt("%.2e", r.max_deviation) + " over " +
                                        std::to_string(f.steps) + " RK4 steps");
  return o;
}

// ------------------------------------------------------------------ 11

Outcome model_gradcheck() {
  Outcome o;
  const data::DomainSpec spec{4, 2, data::Operation::add, 1};
  Rng rng = make_rng(111);
  std::vector<data::Sample> batch;
  for (int i = 0; i < 2; ++i) batch.push_back(data::encode(spec, data::sample_pair(spec, data::Region::seen, rng)));
  for (const char* kind : {"rpe", "ape"}) {
    nn::ModelConfig c;
    c.layers = 2;
    c.heads = 2;
    c.d_model = 16;
    c.d_ff = 32;
    c.max_len = 2 * spec.l + 1;
    c.scheme = pe::default_scheme(kind, spec, c.head_dim(), c.max_len);
    if (c.scheme.is_absolute()) c.scheme.slot_dim = c.d_model;
    const nn::Transformer m(c);
    const auto r = nn::gradient_check(m, m.init(112), batch);
    o.require(r.max_rel_error < 1e-4 && r.checked == m.layout().total(),
              std::string(kind) + ": " + std::to_string(r.checked) + " params, worst " + fmt("%.2e", r.max_rel_error) +
                  " at " + r.worst);
  }
  return o;
}

// ------------------------------------------------------------------ 12

Outcome pe_invariants() {
  Outcome o;
  Rng rng = make_rng(121);
  const int n = 16, d = 8, vocab = data::tok::kVocabSize;
  const auto emb = gaussian(static_cast<std::size_t>(vocab) * d, rng);
  const auto wq = gaussian(d * d, rng), wk = gaussian(d * d, rng);
  const auto project = [&](const std::vector<int>& tokens, const std::vector<double>& w) {
    std::vector<double> out(tokens.size() * d, 0.0);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      for (int r = 0; r < d; ++r) {
        double acc = 0.0;
        for (int c = 0; c < d; ++c) acc += w[r * d + c] * emb[static_cast<std::size_t>(tokens[t]) * d + c];
        out[t * d + r] = acc;
      }
    }
    return out;
  };

  pe::PEScheme rpe;
  rpe.policy = pe::RPE{n - 1, false};
  rpe.slot_dim = d;
  pe::SlotTable table(pe::slot_count(rpe), d);
  table.values() = gaussian(table.values().size(), rng);
  const data::SequenceLayout lay;
  const auto slots = pe::slot_matrix(rpe, n, lay);
  std::uniform_int_distribution<int> tok(0, 9);
  std::int64_t compared = 0, differ = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int content = 4 + trial % 6;
    std::vector<int> x(n, data::tok::kPad);
    for (int i = 0; i < content; ++i) x[i] = tok(rng);
    std::vector<double> base(n * n);
    pe::attention_scores(project(x, wq), project(x, wk), n, d, slots, table.view(), 0.5, base);
    for (int s = 1; s + content <= n; ++s) {
      std::vector<int> y(n, data::tok::kPad);
      for (int i = 0; i + s < n; ++i) y[i + s] = x[i];
      std::vector<double> shifted(n * n);
      pe::attention_scores(project(y, wq), project(y, wk), n, d, slots, table.view(), 0.5, shifted);
      for (int i = 0; i + s < n; ++i) {
        for (int j = 0; j + s < n; ++j) {
          ++compared;
          differ += shifted[(i + s) * n + j + s] != base[i * n + j];
        }
      }
    }
  }
  o.require(differ == 0, "RPE logits under translation: " + std::to_string(differ) + " of " +
                             std::to_string(compared) + " differ");

  pe::PEScheme upe;
  const std::vector<int> pinned{0, 1, 2};
  upe.policy = pe::UPE{pinned, n - 1};
  upe.slot_dim = d;
  pe::SlotTable ut(pe::slot_count(upe), d);
  ut.values() = gaussian(ut.values().size(), rng);
  const auto uslots = pe::slot_matrix(upe, n, lay);
  const auto k = gaussian(static_cast<std::size_t>(n) * d, rng);
  std::int64_t udiff = 0, ucount = 0;
  for (int c = 0; c < d; ++c) {
    std::vector<double> q(n * d, 0.0);
    for (int i = 0; i < n; ++i) q[i * d + c] = 1.0;
    std::vector<double> out(n * n);
    pe::attention_scores(q, k, n, d, uslots, ut.view(), 1.0, out);
    for (int j : pinned) {
      for (int i = 1; i < n; ++i) {
        ++ucount;
        udiff += out[i * n + j] != out[j];
      }
    }
  }
  o.require(udiff == 0, "UPE pinned-key components: " + std::to_string(udiff) + " of " + std::to_string(ucount) +
                            " differ across queries");
  return o;
}

// ------------------------------------------------------------------ 13

Outcome training_reproduction() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "lengen_acceptance";
  const fs::path configs = fs::path(LENGEN_SOURCE_DIR) / "configs";
  const auto run = [&](const std::string& name) {
    const auto cfg = config::load_experiment(configs / (name + ".json"));
    fs::remove_all(root / name);
    return experiment::run_experiment(cfg, root / name).metrics;
  };
  const auto rpe = run("toy_add_rpe");
  const double seen = rpe.find("best", "seen", "exact").value;
  const double rpe4 = rpe.find("best", "len_4", "exact").value;
  const auto ape = run("toy_add_ape");
  const double ape4 = ape.find("best", "len_4", "exact").value;
  o.require(seen >= 0.99, "RPE in-distribution exact " + fmt("%.3f", seen));
  o.require(rpe4 >= 0.80, "RPE length-4 exact " + fmt("%.3f", rpe4));
  o.require(ape4 <= 0.20, "APE length-4 exact " + fmt("%.3f", ape4));
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "oracle equivalence, addition", 30, oracle_add},
      {2, "oracle equivalence, multiplication", 60, oracle_mul},
      {3, "cascade statistics", 300, cascade_stats},
      {4, "multiplication dependency statistics", 300, muldep_stats},
      {5, "theory closed form", 1, closed_form},
      {6, "theory RPE convergence", 120, rpe_convergence},
      {7, "theory APE failure", 120, ape_failure},
      {8, "theory augmentation failure", 60, aug_failure},
      {9, "gradient fidelity", 120, gradient_fidelity},
      {10, "gram invariance", 60, gram_invariance},
      {11, "model gradient check", 120, model_gradcheck},
      {12, "structural PE invariants", 10, pe_invariants},
      {13, "qualitative training reproduction", 900, training_reproduction},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("threw: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = out.pass && in_time;
    failures += !pass;
    std::printf("%s %2d %s (%.2fs / %.0fs%s): %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs, c.budget_s,
                in_time ? "" : ", over budget", out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

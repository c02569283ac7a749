#include "lengen/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <numeric>
#include <random>

#include "lengen/checkpoint.hpp"
#include "lengen/dataset_io.hpp"
#include "lengen/evaluate.hpp"
#include "lengen/optim.hpp"
#include "lengen/vocab.hpp"

namespace lengen::experiment {

namespace fs = std::filesystem;

namespace {

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

data::Sample finish_sample(const config::ExperimentConfig& cfg, const data::OperandPair& pair, Rng& rng) {
  data::Sample s = data::encode(cfg.domain, pair);
  if (cfg.text) s = data::interleave_text(s, *cfg.text, rng);
  return s;
}

std::string step_id(std::int64_t step) { return "step_" + std::to_string(step); }

fs::path checkpoint_path(const fs::path& out_dir, std::int64_t step) {
  return out_dir / "checkpoints" / (step_id(step) + ".bin");
}

struct Scored {
  std::int64_t step;
  double val;
};

std::int64_t pick(const std::vector<Scored>& scores) {
  std::int64_t best = scores.front().step;
  double best_val = scores.front().val;
  for (const auto& s : scores) {
    if (s.val > best_val) {
      best = s.step;
      best_val = s.val;
    }
  }
  return best;
}

void add_eval_rows(report::MetricsTable& m, const std::string& ckpt, const std::string& bucket,
                   const eval::EvalMetrics& e) {
  m.rows.push_back({ckpt, bucket, "exact", e.exact.rate(), static_cast<std::int64_t>(e.exact.total)});
  for (std::size_t k = 0; k < e.per_digit.size(); ++k) {
    m.rows.push_back({ckpt, bucket, "digit_" + std::to_string(k + 1), e.per_digit[k].rate(),
                      static_cast<std::int64_t>(e.per_digit[k].total)});
  }
  for (const auto& [c, t] : e.by_complexity) {
    m.rows.push_back({ckpt, bucket, "complexity_" + std::to_string(c), t.rate(), static_cast<std::int64_t>(t.total)});
  }
}

void write_model_reports(const report::MetricsTable& m, const fs::path& out) {
  report::export_csv(m.to_table(), out / "metrics.csv");
  report::Table acc({"checkpoint", "length", "exact", "count"});
  report::Table digits({"checkpoint", "length", "digit", "accuracy", "count"});
  report::Table cx({"checkpoint", "length", "complexity", "exact", "count"});
  for (const auto& r : m.rows) {
    if (r.bucket.rfind("len_", 0) != 0 && r.bucket != "seen") continue;
    const std::string len = r.bucket == "seen" ? "seen" : r.bucket.substr(4);
    if (r.metric == "exact") acc.add(r.checkpoint, len, r.value, r.count);
    if (r.metric.rfind("digit_", 0) == 0) digits.add(r.checkpoint, len, r.metric.substr(6), r.value, r.count);
    if (r.metric.rfind("complexity_", 0) == 0) cx.add(r.checkpoint, len, r.metric.substr(11), r.value, r.count);
  }
  report::export_csv(acc, out / "accuracy_vs_length.csv");
  report::export_csv(digits, out / "per_digit.csv");
  report::export_csv(cx, out / "by_complexity.csv");
}

ExperimentResult run_model(const config::ExperimentConfig& cfg, const fs::path& out, const RunOptions& opt) {
  const auto log = [&](const std::string& s) {
    if (opt.log) opt.log(s);
  };
  const std::uint64_t data_seed = stage_seed(cfg.seed, "datagen");
  const std::uint64_t init_seed = stage_seed(cfg.seed, "init");
  const std::uint64_t train_seed = stage_seed(cfg.seed, "train");
  const std::uint64_t eval_seed = stage_seed(cfg.seed, "eval");

  // Data.
  const auto train_set = stage("datagen", [&] {
    data::SamplerSpec sampler = cfg.sampler;
    sampler.seed = data_seed;
    const std::int64_t count = cfg.train.train_size > 0 ? cfg.train.train_size : cfg.train.steps * cfg.train.batch;
    data::DatasetStream stream(cfg.domain, sampler, std::max<std::int64_t>(count, 1),
                               data::StreamOptions{cfg.augment_shifts, cfg.text});
    auto samples = data::collect(stream);
    fs::create_directories(out / "data");
    data::write_dataset(out / "data" / "train.jsonl", {cfg.domain, sampler, count, data::vocab_table()}, samples);
    return samples;
  });
  const auto val_set = stage("datagen", [&] {
    return cfg.validation.length > 0
               ? make_eval_set(cfg, cfg.validation.length, cfg.validation.size, derive_seed(eval_seed, 1000))
               : std::vector<data::Sample>{};
  });
  log("datagen: " + std::to_string(train_set.size()) + " training samples");

  // Training.
  const nn::Transformer model(cfg.model);
  nn::Parameters params = model.init(init_seed);
  nn::OptimState optim;
  optim.lr = cfg.train.lr;
  optim.weight_decay = cfg.train.weight_decay;
  optim.reset(params.values.size());
  nn::Parameters averaged = params;
  const nn::Parameters& kept = cfg.train.ema > 0.0 ? averaged : params;
  Rng train_rng = make_rng(train_seed);
  Rng dropout_rng = make_rng(derive_seed(train_seed, 1));
  const std::int64_t every = std::max<std::int64_t>(1, cfg.train.steps / cfg.checkpoints);
  std::vector<Scored> scores;
  report::Table train_log({"step", "loss", "grad_norm"});
  report::Table ckpt_log({"step", "validation_exact"});
  fs::create_directories(out / "checkpoints");

  const auto checkpoint = [&](std::int64_t step) {
    stage("checkpoint", [&] {
      ckpt::Checkpoint c{cfg.model, kept, optim, {{"step", step}, {"domain", config::to_json(cfg.domain)}}};
      if (cfg.train.ema > 0.0) c.meta["ema"] = cfg.train.ema;
      ckpt::save_checkpoint(checkpoint_path(out, step), c);
      return 0;
    });
    const double val = val_set.empty() ? 0.0 : stage("eval", [&] {
      return eval::evaluate(model, kept, std::span<const data::Sample>(val_set)).exact.rate();
    });
    scores.push_back({step, val});
    ckpt_log.add(step, val);
    log("step " + std::to_string(step) + " validation exact " + report::format_double(val));
  };

  stage("train", [&] {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();
    std::vector<data::Sample> batch;
    checkpoint(0);
    for (std::int64_t step = 1; step <= cfg.train.steps; ++step) {
      batch.clear();
      for (int b = 0; b < cfg.train.batch; ++b) {
        if (cursor == order.size()) {
          std::shuffle(order.begin(), order.end(), train_rng);
          cursor = 0;
        }
        batch.push_back(train_set[order[cursor++]]);
      }
      optim.lr = cfg.train.lr_at(step);
      const auto r = nn::train_step(model, params, optim, batch, cfg.model.dropout > 0.0 ? &dropout_rng : nullptr,
                                    cfg.train.clip);
      if (cfg.train.ema > 0.0) nn::average_into(averaged.values, params.values, cfg.train.ema);
      train_log.add(step, r.loss, r.grad_norm);
      if (step % every == 0 || step == cfg.train.steps) checkpoint(step);
    }
    return 0;
  });

  // Selection and evaluation.
  const std::int64_t best = val_set.empty() ? scores.back().step : pick(scores);
  ExperimentResult result;
  result.out_dir = out;
  result.best_checkpoint = step_id(best);
  for (const auto& s : scores) {
    if (!val_set.empty()) {
      result.metrics.rows.push_back({step_id(s.step), "val_" + std::to_string(cfg.validation.length), "exact", s.val,
                                     static_cast<std::int64_t>(val_set.size())});
    }
  }
  stage("eval", [&] {
    const auto c = ckpt::load_checkpoint(checkpoint_path(out, best));
    const auto run = [&](const std::string& bucket, int length, std::uint64_t seed) {
      const auto set = make_eval_set(cfg, length, cfg.eval_size, seed);
      add_eval_rows(result.metrics, "best", bucket, eval::evaluate(model, c.params, std::span<const data::Sample>(set)));
    };
    run("seen", 0, derive_seed(eval_seed, 0));
    for (int len : cfg.eval_lengths) run("len_" + std::to_string(len), len, derive_seed(eval_seed, len));
    if (cfg.model.scheme.is_pairwise()) {
      const int tables = cfg.model.per_layer_pe ? cfg.model.layers : 1;
      for (int l = 0; l < tables; ++l) {
        const auto& spec = model.layout().find(model.slot_table_name(l));
        pe::export_slot_table_csv(cfg.model.scheme, {c.params.tensor(model.layout(), spec.name), spec.rows, spec.cols},
                                  out / ("pe_layer" + std::to_string(l) + ".csv"));
      }
    }
    return 0;
  });

  stage("export", [&] {
    report::export_csv(train_log, out / "train_log.csv");
    report::export_csv(ckpt_log, out / "checkpoints.csv");
    write_model_reports(result.metrics, out);
    return 0;
  });
  return result;
}

ExperimentResult run_theory(const config::ExperimentConfig& cfg, const fs::path& out, const RunOptions& opt) {
  const auto& th = cfg.theory;
  const auto task = stage("theory", [&] { return th.task(stage_seed(cfg.seed, "task")); });
  theory::FlowConfig flow = th.flow;
  flow.seed = stage_seed(cfg.seed, "init");
  const auto kind = theory::model_kind_from_string(th.model);
  const auto res = stage("theory", [&] {
    return theory::sgd_population_train(kind, task, flow, theory::TrainOptions{th.freeze_a, true, -1.0});
  });
  if (opt.log) opt.log("theory: trained " + th.model + " for " + std::to_string(flow.steps) + " steps");
  Rng mc = make_rng(stage_seed(cfg.seed, "eval"));
  const theory::Vec mc_loss = stage("theory", [&] {
    return res.ape ? theory::position_test_loss(*res.ape, task, theory::LossMode::monte_carlo, th.mc_samples, &mc)
                   : theory::position_test_loss(*res.rpe, task, theory::LossMode::monte_carlo, th.mc_samples, &mc);
  });

  ExperimentResult result;
  result.out_dir = out;
  result.best_checkpoint = "final";
  for (int i = 0; i < task.n; ++i) {
    result.metrics.rows.push_back({"final", "pos_" + std::to_string(i), "test_loss_analytic", res.test_loss(i), 1});
    result.metrics.rows.push_back({"final", "pos_" + std::to_string(i), "test_loss_mc", mc_loss(i), th.mc_samples});
  }
  stage("export", [&] {
    report::Table curve({"step", "train_loss"});
    for (const auto& [s, l] : res.loss_curve) curve.add(s, l);
    report::export_csv(curve, out / "loss_curve.csv");
    report::Table pos({"position", "test_loss_analytic", "test_loss_mc"});
    for (int i = 0; i < task.n; ++i) pos.add(i, res.test_loss(i), mc_loss(i));
    report::export_csv(pos, out / "position_loss.csv");
    report::Table gram({"i", "j", "value"});
    const theory::Mat M = theory::mixing_matrix(res, task);
    for (int i = 0; i < task.n; ++i) {
      for (int j = 0; j < task.n; ++j) gram.add(i, j, M(i, j));
    }
    report::export_csv(gram, out / "gram.csv");
    report::export_csv(result.metrics.to_table(), out / "metrics.csv");
    return 0;
  });
  return result;
}

}  // namespace

std::vector<data::Sample> make_eval_set(const config::ExperimentConfig& cfg, int length, int size,
                                        std::uint64_t seed) {
  std::vector<data::Sample> out;
  out.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) {
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const auto pair = length == 0 ? data::sample_pair(cfg.domain, data::Region::seen, rng)
                                  : data::sample_length(cfg.domain, length, rng);
    out.push_back(finish_sample(cfg, pair, rng));
    out.back().meta.complexity = data::complexity_of(cfg.domain, pair);
  }
  return out;
}

ExperimentResult run_experiment(const config::ExperimentConfig& cfg, const fs::path& out_dir,
                                const RunOptions& options) {
  stage("config", [&] {
    cfg.validate();
    fs::create_directories(out_dir);
    write_text(out_dir / "config.json", config::to_json(cfg).dump(2) + "\n");
    return 0;
  });
  const std::string started = now_iso();
  ExperimentResult r = cfg.kind == "theory" ? run_theory(cfg, out_dir, options) : run_model(cfg, out_dir, options);
  stage("export", [&] {
    write_text(out_dir / "metadata.json", nlohmann::json{{"started", started}, {"finished", now_iso()}}.dump(2) + "\n");
    return 0;
  });
  return r;
}

std::string reselect_checkpoint(const config::ExperimentConfig& cfg, const fs::path& out_dir) {
  if (cfg.validation.length == 0) throw StageError("select", "checkpoint selection is disabled in this config");
  const auto val_set =
      make_eval_set(cfg, cfg.validation.length, cfg.validation.size, derive_seed(stage_seed(cfg.seed, "eval"), 1000));
  auto scores = stage("select", [&] {
    std::vector<Scored> found;
    const fs::path dir = out_dir / "checkpoints";
    if (!fs::is_directory(dir)) return found;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().stem().string();
      if (entry.path().extension() != ".bin" || name.rfind("step_", 0) != 0) continue;
      const auto c = ckpt::load_checkpoint(entry.path());
      const nn::Transformer model(c.config);
      found.push_back({std::stoll(name.substr(5)),
                       eval::evaluate(model, c.params, std::span<const data::Sample>(val_set)).exact.rate()});
    }
    return found;
  });
  if (scores.empty()) throw StageError("select", "no checkpoints under " + out_dir.string());
  std::sort(scores.begin(), scores.end(), [](const Scored& a, const Scored& b) { return a.step < b.step; });
  return step_id(pick(scores));
}

}  // namespace lengen::experiment

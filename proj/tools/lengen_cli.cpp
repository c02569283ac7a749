// lengen: command-line front end for data generation, statistics, training,
// evaluation, the linear-attention theory simulators and full pipeline runs.
//
// Every failure prints "<stage>: <message>" on stderr and exits with 1;
// usage errors exit with CLI11's code. LENGEN_OUT, when set, is the
// directory outputs go to if --out is omitted.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "lengen/checkpoint.hpp"
#include "lengen/config.hpp"
#include "lengen/csv.hpp"
#include "lengen/dataset_io.hpp"
#include "lengen/evaluate.hpp"
#include "lengen/experiment.hpp"
#include "lengen/optim.hpp"
#include "lengen/stats.hpp"
#include "lengen/theory.hpp"
#include "lengen/vocab.hpp"

using namespace lengen;
namespace fs = std::filesystem;
using experiment::StageError;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
};

template <typename Fn>
auto tagged(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const config::ConfigError& e) {
    throw StageError("config", std::string(e.what()).substr(std::string("config: ").size()));
  } catch (const std::exception& e) {
    const std::string msg = e.what(), prefix = stage + ": ";
    throw StageError(stage, msg.rfind(prefix, 0) == 0 ? msg.substr(prefix.size()) : msg);
  }
}

/// --out if given, else $LENGEN_OUT/<fallback>, else empty (stdout for tables).
fs::path resolve_out(const Globals& g, const std::string& fallback) {
  if (!g.out.empty()) return g.out;
  if (const char* env = std::getenv("LENGEN_OUT"); env && *env) return fs::path(env) / fallback;
  return {};
}

fs::path require_out(const Globals& g, const std::string& fallback) {
  auto p = resolve_out(g, fallback);
  return p.empty() ? fs::path("lengen_out") / fallback : p;
}

void emit(const report::Table& t, const fs::path& path) {
  if (path.empty()) {
    report::write_csv(std::cout, t);
  } else {
    report::export_csv(t, path);
    std::cerr << "wrote " << path.string() << "\n";
  }
}

std::vector<int> parse_lengths(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(std::stoi(part));
    } else {
      const int lo = std::stoi(part.substr(0, dots)), hi = std::stoi(part.substr(dots + 2));
      if (hi < lo) throw std::invalid_argument("empty length range '" + part + "'");
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    }
  }
  if (out.empty()) throw std::invalid_argument("no lengths given");
  return out;
}

config::ExperimentConfig load_config(const Globals& g) {
  if (g.config.empty()) throw StageError("config", "--config is required");
  auto cfg = config::load_experiment(g.config);
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.sampler.seed = *g.seed;
  }
  return cfg;
}

theory::Vec initial_gram(int n, double a0, double aj) {
  theory::Vec A = theory::Vec::Constant(n / 2 + 1, aj);
  A(0) = a0;
  return A;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string op = "add";
  int l = 20, l_s = 5, multiplier_len = 1;
  std::string sampler = "uniform";
  std::int64_t count = 1000;
  bool augment = false;
  int text_gap = 0;
};

void cmd_gen(const Globals& g, const GenArgs& a) {
  tagged("datagen", [&] {
    data::DomainSpec spec{a.l, a.l_s, data::operation_from_string(a.op), a.multiplier_len};
    spec.validate();
    const std::uint64_t seed = stage_seed(g.seed.value_or(0), "datagen");
    const auto sampler = data::SamplerSpec::parse(a.sampler, seed);
    data::StreamOptions opt{a.augment, std::nullopt};
    if (a.text_gap > 0) opt.text = data::TextNoiseSpec{a.text_gap, 512};
    data::DatasetStream stream(spec, sampler, a.count, opt);
    const auto samples = data::collect(stream);
    const data::DatasetHeader header{spec, sampler, a.count, data::vocab_table()};
    const auto out = resolve_out(g, "data.jsonl");
    if (out.empty()) {
      data::write_dataset(std::cout, header, samples);
    } else {
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      data::write_dataset(out, header, samples);
      std::cerr << "wrote " << samples.size() << " samples to " << out.string() << "\n";
    }
    return 0;
  });
}

// ---------------------------------------------------------------- stats

struct StatsArgs {
  int digits = 5;
  std::int64_t samples = 1'000'000;
  int multiplier_len = 1;
  std::string op = "add";
  int l = 20, l_s = 5;
  std::string sampler = "uniform";
};

void cmd_stats(const Globals& g, const std::string& which, const StatsArgs& a) {
  tagged("stats", [&] {
    const std::uint64_t seed = g.seed.value_or(0);
    if (which == "cascade") {
      emit(stats::to_table(stats::cascade_dist(a.digits, a.samples, seed)), resolve_out(g, "cascade.csv"));
    } else if (which == "muldep") {
      emit(stats::to_table(stats::mul_dep_dist(a.multiplier_len, a.digits, a.samples, seed)),
           resolve_out(g, "muldep.csv"));
    } else {
      const data::DomainSpec spec{a.l, a.l_s, data::operation_from_string(a.op), a.multiplier_len};
      spec.validate();
      emit(stats::to_table(stats::complexity_hist(spec, data::SamplerSpec::parse(a.sampler, seed), a.samples)),
           resolve_out(g, "complexity.csv"));
    }
    return 0;
  });
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::optional<std::int64_t> steps;
  std::string ckpt;
};

void cmd_train(const Globals& g, const TrainArgs& a) {
  auto cfg = load_config(g);
  if (cfg.kind != "model") throw StageError("config", "train needs a model config");
  if (a.steps) cfg.train.steps = *a.steps;
  tagged("config", [&] {
    cfg.validate();
    return 0;
  });
  const fs::path dir = !a.ckpt.empty() ? fs::path(a.ckpt) : require_out(g, cfg.name + "_ckpt");

  const auto train_set = tagged("datagen", [&] {
    if (!a.data.empty()) {
      auto ds = data::read_dataset(a.data);
      if (ds.samples.empty()) throw std::runtime_error("dataset " + a.data + " is empty");
      cfg.domain = ds.header.spec;
      return std::move(ds.samples);
    }
    auto sampler = cfg.sampler;
    sampler.seed = stage_seed(cfg.seed, "datagen");
    const std::int64_t count = cfg.train.train_size > 0 ? cfg.train.train_size : cfg.train.steps * cfg.train.batch;
    data::DatasetStream stream(cfg.domain, sampler, std::max<std::int64_t>(count, 1),
                               data::StreamOptions{cfg.augment_shifts, cfg.text});
    return data::collect(stream);
  });

  tagged("train", [&] {
    fs::create_directories(dir);
    const nn::Transformer model(cfg.model);
    nn::Parameters params = model.init(stage_seed(cfg.seed, "init"));
    nn::OptimState optim;
    optim.lr = cfg.train.lr;
    optim.weight_decay = cfg.train.weight_decay;
    optim.reset(params.values.size());
    nn::Parameters averaged = params;
    const nn::Parameters& kept = cfg.train.ema > 0.0 ? averaged : params;
    Rng rng = make_rng(stage_seed(cfg.seed, "train"));
    Rng dropout = make_rng(derive_seed(stage_seed(cfg.seed, "train"), 1));
    const std::int64_t every = std::max<std::int64_t>(1, cfg.train.steps / cfg.checkpoints);
    report::Table log({"step", "loss", "grad_norm"});
    const auto save = [&](const fs::path& path, std::int64_t step) {
      ckpt::Checkpoint c{cfg.model, kept, optim, {{"step", step}, {"domain", config::to_json(cfg.domain)}}};
      if (cfg.train.ema > 0.0) c.meta["ema"] = cfg.train.ema;
      ckpt::save_checkpoint(path, c);
    };
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();
    std::vector<data::Sample> batch;
    for (std::int64_t step = 1; step <= cfg.train.steps; ++step) {
      batch.clear();
      for (int b = 0; b < cfg.train.batch; ++b) {
        if (cursor == order.size()) {
          std::shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        batch.push_back(train_set[order[cursor++]]);
      }
      optim.lr = cfg.train.lr_at(step);
      const auto r =
          nn::train_step(model, params, optim, batch, cfg.model.dropout > 0.0 ? &dropout : nullptr, cfg.train.clip);
      if (cfg.train.ema > 0.0) nn::average_into(averaged.values, params.values, cfg.train.ema);
      log.add(step, r.loss, r.grad_norm);
      if (step % every == 0) {
        save(dir / ("step_" + std::to_string(step) + ".bin"), step);
        std::cerr << "step " << step << " loss " << r.loss << "\n";
      }
    }
    save(dir / "final.bin", cfg.train.steps);
    report::export_csv(log, dir / "train_log.csv");
    std::cerr << "checkpoints in " << dir.string() << "\n";
    return 0;
  });
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string ckpt;
  std::string lengths = "1..20";
  std::string mode = "exact";
  std::string data;
  int size = 200;
};

void cmd_eval(const Globals& g, const EvalArgs& a) {
  const auto c = tagged("checkpoint", [&] { return ckpt::load_checkpoint(a.ckpt); });
  config::ExperimentConfig cfg;
  if (!g.config.empty()) {
    cfg = load_config(g);
  } else if (c.meta.contains("domain")) {
    cfg.domain = config::domain_from_json(c.meta.at("domain"));
  } else {
    throw StageError("eval", "checkpoint carries no domain; pass --config");
  }
  if (g.seed) cfg.seed = *g.seed;
  if (a.mode != "exact" && a.mode != "per_digit" && a.mode != "by_complexity") {
    throw StageError("eval", "unknown mode '" + a.mode + "'");
  }

  tagged("eval", [&] {
    const nn::Transformer model(c.config);
    std::vector<std::pair<std::string, eval::EvalMetrics>> results;
    if (!a.data.empty()) {
      results.emplace_back("data", eval::evaluate(model, c.params, data::read_dataset(a.data)));
    } else {
      const std::uint64_t seed = stage_seed(cfg.seed, "eval");
      for (int len : parse_lengths(a.lengths)) {
        if (len < 1 || len > cfg.domain.l) throw std::invalid_argument("length " + std::to_string(len) + " outside [1, l]");
        const auto set = experiment::make_eval_set(cfg, len, a.size, derive_seed(seed, static_cast<std::uint64_t>(len)));
        results.emplace_back(std::to_string(len), eval::evaluate(model, c.params, std::span<const data::Sample>(set)));
      }
    }
    report::Table t;
    if (a.mode == "exact") {
      t = report::Table({"length", "exact", "count"});
      for (const auto& [len, m] : results) t.add(len, m.exact.rate(), m.exact.total);
    } else if (a.mode == "per_digit") {
      t = report::Table({"length", "digit", "accuracy", "count"});
      for (const auto& [len, m] : results) {
        for (std::size_t k = 0; k < m.per_digit.size(); ++k) t.add(len, k + 1, m.per_digit[k].rate(), m.per_digit[k].total);
      }
    } else {
      t = report::Table({"length", "complexity", "exact", "count"});
      for (const auto& [len, m] : results) {
        for (const auto& [cx, tally] : m.by_complexity) t.add(len, cx, tally.rate(), tally.total);
      }
    }
    emit(t, resolve_out(g, "eval_" + a.mode + ".csv"));
    return 0;
  });
}

// ---------------------------------------------------------------- theory

struct TheoryArgs {
  std::string model = "rpe";
  int n = 51, n1 = 10, d = 200, w = 1;
  double alpha = 2.0, beta = 0.5;
  std::int64_t steps = 100000;
  double eta = 0.005, eps = -1.0, dt = 0.0;
  int log_every = 100;
  int mc = 5000;
  double a0 = -1.0, aj = -1.0;
};

config::ExperimentConfig theory_config(const Globals& g, const TheoryArgs& a) {
  if (!g.config.empty()) {
    auto cfg = load_config(g);
    if (cfg.kind != "theory") throw StageError("config", "expected a theory config");
    return cfg;
  }
  config::ExperimentConfig cfg;
  cfg.kind = "theory";
  cfg.name = "theory_" + a.model;
  cfg.seed = g.seed.value_or(0);
  auto& t = cfg.theory;
  t.model = a.model;
  t.n = a.n;
  t.n1 = a.n1;
  t.d = a.d;
  t.alpha = a.alpha;
  t.betas = {a.beta};
  t.w = a.w;
  t.mc_samples = a.mc;
  t.flow.steps = a.steps;
  t.flow.eta = a.eta;
  t.flow.epsilon = a.eps;
  t.flow.log_every = a.log_every;
  return cfg;
}

void cmd_theory_run(const Globals& g, const TheoryArgs& a) {
  const auto cfg = theory_config(g, a);
  const auto dir = require_out(g, cfg.name);
  experiment::run_experiment(cfg, dir, {[](const std::string& s) { std::cerr << s << "\n"; }});
  std::cerr << "wrote " << (dir / "loss_curve.csv").string() << " and " << (dir / "position_loss.csv").string() << "\n";
}

void cmd_theory_gram(const Globals& g, const TheoryArgs& a) {
  const auto cfg = theory_config(g, a);
  tagged("theory", [&] {
    const auto& th = cfg.theory;
    const auto task = th.task(stage_seed(cfg.seed, "task"));
    auto flow = th.flow;
    flow.seed = stage_seed(cfg.seed, "init");
    const auto res = theory::sgd_population_train(theory::model_kind_from_string(th.model), task, flow,
                                                  theory::TrainOptions{th.freeze_a, true, -1.0});
    const theory::Mat M = theory::mixing_matrix(res, task);
    report::Table t({"i", "j", "value"});
    for (int i = 0; i < task.n; ++i) {
      for (int j = 0; j < task.n; ++j) t.add(i, j, M(i, j));
    }
    emit(t, resolve_out(g, "gram_" + th.model + ".csv"));
    return 0;
  });
}

void cmd_theory_flow(const Globals& g, const TheoryArgs& a) {
  tagged("theory", [&] {
    const auto task = theory::TheoryTask::make(a.n, 2 * a.w + 1, std::max(a.d, a.n), a.alpha, {a.beta}, a.w,
                                               stage_seed(g.seed.value_or(0), "task"));
    theory::FlowConfig flow;
    flow.steps = a.steps;
    flow.dt = a.dt;
    flow.epsilon = a.eps < 0.0 ? 0.0 : a.eps;
    flow.log_every = a.log_every;
    const double a0 = a.a0 > 0.0 ? a.a0 : 0.5;
    const double aj = a.aj >= 0.0 ? a.aj : 1.0 / std::sqrt(static_cast<double>(a.d));
    const auto series = theory::flow_integrate({initial_gram(a.n, a0, aj), 0.0, {}}, task, flow);
    std::vector<std::string> cols{"t"};
    const auto m = series.A.size();
    for (Eigen::Index j = 0; j < m; ++j) cols.push_back("A_" + std::to_string(j));
    report::Table t(cols);
    for (const auto& [time, A] : series.log) {
      std::vector<std::string> row{report::format_double(time)};
      for (Eigen::Index j = 0; j < m; ++j) row.push_back(report::format_double(A(j)));
      t.rows.push_back(std::move(row));
    }
    emit(t, resolve_out(g, "gram_flow.csv"));
    return 0;
  });
}

// ---------------------------------------------------------------- export

void cmd_export(const Globals& g, const std::string& ckpt_path) {
  const auto c = tagged("checkpoint", [&] { return ckpt::load_checkpoint(ckpt_path); });
  tagged("export", [&] {
    if (!c.config.scheme.is_pairwise()) throw std::invalid_argument("no pairwise slot table to export");
    const auto dir = require_out(g, "pe_maps");
    fs::create_directories(dir);
    const nn::Transformer model(c.config);
    const int tables = c.config.per_layer_pe ? c.config.layers : 1;
    for (int l = 0; l < tables; ++l) {
      const auto& spec = model.layout().find(model.slot_table_name(l));
      const auto path = dir / ("pe_layer" + std::to_string(l) + ".csv");
      pe::export_slot_table_csv(c.config.scheme, {c.params.tensor(model.layout(), spec.name), spec.rows, spec.cols},
                                path);
      std::cerr << "wrote " << path.string() << "\n";
    }
    return 0;
  });
}

// ---------------------------------------------------------------- run / select

void cmd_run(const Globals& g) {
  const auto cfg = load_config(g);
  const fs::path dir = !g.out.empty() ? fs::path(g.out)
                       : !cfg.out_dir.empty() ? fs::path(cfg.out_dir)
                                              : require_out(g, cfg.name);
  const auto r = experiment::run_experiment(cfg, dir, {[](const std::string& s) { std::cerr << s << "\n"; }});
  std::cout << "best " << r.best_checkpoint << "\n";
  for (const auto& row : r.metrics.rows) {
    if (row.checkpoint == "best" && row.metric == "exact") std::cout << row.bucket << " " << row.value << "\n";
  }
}

void cmd_select(const Globals& g, const std::string& run_dir) {
  std::cout << experiment::reselect_checkpoint(load_config(g), run_dir) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Length generalization experiments on arithmetic and linear-attention toy models"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Master seed");
  app.add_option("--out", g.out, "Output file or directory");
  app.add_option("--config", g.config, "Experiment config (JSON)");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a dataset file");
  gen_cmd->add_option("--op", gen.op)->check(CLI::IsMember({"add", "mul"}));
  gen_cmd->add_option("--l", gen.l, "Maximum operand digits");
  gen_cmd->add_option("--ls", gen.l_s, "Seen operand digits");
  gen_cmd->add_option("--mult-len", gen.multiplier_len, "Multiplier digits (mul)");
  gen_cmd->add_option("--sampler", gen.sampler, "uniform | cuniform | mix:p");
  gen_cmd->add_option("--count", gen.count);
  gen_cmd->add_flag("--augment", gen.augment, "Emit every zero-padding shift of each sample");
  gen_cmd->add_option("--text", gen.text_gap, "Interleave up to N random text tokens per gap");

  StatsArgs st;
  std::string stats_which;
  auto* stats_cmd = app.add_subcommand("stats", "Monte-Carlo complexity histograms");
  stats_cmd->add_option("kind", stats_which, "cascade | muldep | complexity")
      ->required()
      ->check(CLI::IsMember({"cascade", "muldep", "complexity"}));
  stats_cmd->add_option("--digits", st.digits);
  stats_cmd->add_option("--samples", st.samples);
  stats_cmd->add_option("--mult-len", st.multiplier_len);
  stats_cmd->add_option("--op", st.op)->check(CLI::IsMember({"add", "mul"}));
  stats_cmd->add_option("--l", st.l);
  stats_cmd->add_option("--ls", st.l_s);
  stats_cmd->add_option("--sampler", st.sampler);

  TrainArgs tr;
  std::int64_t train_steps = 0;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a config");
  train_cmd->add_option("--data", tr.data, "Dataset file (generated from the config when absent)");
  auto* steps_opt = train_cmd->add_option("--steps", train_steps);
  train_cmd->add_option("--ckpt", tr.ckpt, "Checkpoint directory");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", ev.ckpt)->required();
  eval_cmd->add_option("--lengths", ev.lengths, "e.g. 1..50 or 3,5,7");
  eval_cmd->add_option("--mode", ev.mode)->check(CLI::IsMember({"exact", "per_digit", "by_complexity"}));
  eval_cmd->add_option("--data", ev.data, "Evaluate this dataset instead of fresh samples");
  eval_cmd->add_option("--size", ev.size, "Samples per length");

  TheoryArgs th;
  auto* theory_cmd = app.add_subcommand("theory", "Linear-attention theory simulators");
  theory_cmd->require_subcommand(1);
  const auto theory_opts = [&](CLI::App* c) {
    c->add_option("--model", th.model)->check(CLI::IsMember({"ape", "ape_aug", "rpe"}));
    c->add_option("--n", th.n);
    c->add_option("--n1", th.n1);
    c->add_option("--d", th.d);
    c->add_option("--alpha", th.alpha);
    c->add_option("--beta", th.beta);
    c->add_option("--m,--w", th.w, "Window half-width");
    c->add_option("--steps", th.steps);
    c->add_option("--eta", th.eta);
    c->add_option("--eps", th.eps, "Weight decay (default 1e-4 * eta * alpha)");
    c->add_option("--log-every", th.log_every);
  };
  auto* th_run = theory_cmd->add_subcommand("run", "Train one model and write loss and position-loss tables");
  theory_opts(th_run);
  th_run->add_option("--mc", th.mc, "Monte-Carlo samples per position");
  auto* th_gram = theory_cmd->add_subcommand("gram", "Train one model and write its n x n position mixing matrix");
  theory_opts(th_gram);
  auto* th_flow = theory_cmd->add_subcommand("flow", "Integrate the translation-invariant gram flow");
  theory_opts(th_flow);
  th_flow->add_option("--dt", th.dt);
  th_flow->add_option("--a0", th.a0, "Initial A_0 (default 0.5)");
  th_flow->add_option("--aj", th.aj, "Initial A_j, j > 0 (default 1/sqrt(d))");

  std::string export_ckpt;
  auto* export_cmd = app.add_subcommand("export", "Dump positional slot tables of a checkpoint");
  export_cmd->add_option("--ckpt", export_ckpt)->required();

  auto* run_cmd = app.add_subcommand("run", "Run the full pipeline of a config");
  std::string select_dir;
  auto* select_cmd = app.add_subcommand("select", "Re-run checkpoint selection over a finished run");
  select_cmd->add_option("--run", select_dir)->required();

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) g.seed = seed;
  if (steps_opt->count() > 0) tr.steps = train_steps;

  try {
    if (gen_cmd->parsed()) cmd_gen(g, gen);
    if (stats_cmd->parsed()) cmd_stats(g, stats_which, st);
    if (train_cmd->parsed()) cmd_train(g, tr);
    if (eval_cmd->parsed()) cmd_eval(g, ev);
    if (th_run->parsed()) cmd_theory_run(g, th);
    if (th_gram->parsed()) cmd_theory_gram(g, th);
    if (th_flow->parsed()) cmd_theory_flow(g, th);
    if (export_cmd->parsed()) cmd_export(g, export_ckpt);
    if (run_cmd->parsed()) cmd_run(g);
    if (select_cmd->parsed()) cmd_select(g, select_dir);
  } catch (const StageError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const config::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "lengen/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace lengen::config {

namespace {

template <typename T>
void get_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json to_json(const pe::PEScheme& scheme) {
  json j{{"kind", scheme.name()}, {"slot_dim", scheme.slot_dim}};
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, pe::APE>) {
          j["max_len"] = p.max_len;
        } else if constexpr (std::is_same_v<P, pe::RPE>) {
          j["max_offset"] = p.max_offset;
          j["periodic"] = p.periodic;
        } else if constexpr (std::is_same_v<P, pe::UPE>) {
          j["uniform_positions"] = p.uniform_positions;
          j["max_offset"] = p.rpe_max_offset;
        } else if constexpr (std::is_same_v<P, pe::SigRPE>) {
          j["max_offset"] = p.max_offset;
        }
      },
      scheme.policy);
  return j;
}

pe::PEScheme scheme_from_json(const json& j) {
  pe::PEScheme s;
  s.slot_dim = j.value("slot_dim", 0);
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "nope") {
    s.policy = pe::NoPE{};
  } else if (kind == "ape") {
    s.policy = pe::APE{j.at("max_len").get<int>()};
  } else if (kind == "rpe") {
    s.policy = pe::RPE{j.at("max_offset").get<int>(), j.value("periodic", false)};
  } else if (kind == "upe") {
    s.policy = pe::UPE{j.at("uniform_positions").get<std::vector<int>>(), j.at("max_offset").get<int>()};
  } else if (kind == "sigrpe") {
    s.policy = pe::SigRPE{j.at("max_offset").get<int>()};
  } else {
    throw ConfigError("config: unknown positional encoding '" + kind + "'");
  }
  return s;
}

json to_json(const nn::ModelConfig& c) {
  return json{{"layers", c.layers},     {"heads", c.heads},     {"d_model", c.d_model},
              {"d_ff", c.d_ff},         {"vocab", c.vocab},     {"max_len", c.max_len},
              {"dropout", c.dropout},   {"per_layer_pe", c.per_layer_pe}, {"pe_init_std", c.pe_init_std},
              {"pe", to_json(c.scheme)}};
}

nn::ModelConfig model_config_from_json(const json& j) {
  nn::ModelConfig c;
  get_opt(j, "layers", c.layers);
  get_opt(j, "heads", c.heads);
  get_opt(j, "d_model", c.d_model);
  get_opt(j, "d_ff", c.d_ff);
  get_opt(j, "vocab", c.vocab);
  get_opt(j, "max_len", c.max_len);
  get_opt(j, "dropout", c.dropout);
  get_opt(j, "per_layer_pe", c.per_layer_pe);
  get_opt(j, "pe_init_std", c.pe_init_std);
  if (j.contains("pe") && j.at("pe").is_object()) c.scheme = scheme_from_json(j.at("pe"));
  return c;
}

json to_json(const data::DomainSpec& s) {
  return json{{"op", data::to_string(s.op)}, {"l", s.l}, {"l_s", s.l_s}, {"multiplier_len", s.multiplier_len}};
}

data::DomainSpec domain_from_json(const json& j) {
  data::DomainSpec s;
  if (j.contains("op")) s.op = data::operation_from_string(j.at("op").get<std::string>());
  get_opt(j, "l", s.l);
  get_opt(j, "l_s", s.l_s);
  get_opt(j, "multiplier_len", s.multiplier_len);
  return s;
}

int format_length(const data::DomainSpec& spec) {
  return spec.op == data::Operation::add ? 2 * spec.l + 1 : spec.multiplier_len + 1 + spec.l;
}

theory::TheoryTask TheoryRunConfig::task(std::uint64_t seed) const {
  return theory::TheoryTask::make(n, n1, d, alpha, betas, w, seed);
}

double TrainBudget::lr_at(std::int64_t step) const {
  const double start = lr_decay_start * static_cast<double>(steps);
  if (static_cast<double>(step) <= start || steps <= 0) return lr;
  return lr * std::max(0.0, (static_cast<double>(steps) - static_cast<double>(step) + 1.0) /
                                (static_cast<double>(steps) - start + 1.0));
}

void ExperimentConfig::validate() const {
  if (version != kSchemaVersion) {
    throw ConfigError("config: unsupported schema version " + std::to_string(version));
  }
  if (kind != "model" && kind != "theory") throw ConfigError("config: kind must be 'model' or 'theory'");
  if (kind == "theory") {
    theory::model_kind_from_string(theory.model);
    return;
  }
  domain.validate();
  for (int len : eval_lengths) {
    if (len < 1 || len > domain.l) throw ConfigError("config: eval lengths must lie in [1, l]");
  }
  if (validation.length != 0 && (validation.length <= domain.l_s || validation.length > domain.l)) {
    throw ConfigError("config: validation length must exceed l_s and not exceed l");
  }
  if (train.steps < 0 || train.batch < 1 || train.lr <= 0.0) throw ConfigError("config: invalid training budget");
  if (!(train.lr_decay_start >= 0.0 && train.lr_decay_start <= 1.0)) {
    throw ConfigError("config: lr_decay_start must be in [0, 1]");
  }
  if (!(train.ema >= 0.0 && train.ema < 1.0)) throw ConfigError("config: ema must be in [0, 1)");
  if (checkpoints < 1) throw ConfigError("config: checkpoints must be positive");
  model.validate();
}

ExperimentConfig experiment_from_json(const json& j) {
  static const std::set<std::string> known{"version", "name", "kind",  "domain",     "sampler",
                                           "augment_shifts", "text", "pe", "model", "train",
                                           "eval_lengths", "eval_size", "validation", "checkpoints",
                                           "seed", "out_dir", "theory"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");
  }
  try {
    ExperimentConfig c;
    get_opt(j, "version", c.version);
    get_opt(j, "name", c.name);
    get_opt(j, "kind", c.kind);
    get_opt(j, "seed", c.seed);
    get_opt(j, "out_dir", c.out_dir);
    if (j.contains("domain")) c.domain = domain_from_json(j.at("domain"));
    if (j.contains("sampler")) c.sampler = data::SamplerSpec::parse(j.at("sampler").get<std::string>(), c.seed);
    c.sampler.seed = c.seed;
    get_opt(j, "augment_shifts", c.augment_shifts);
    if (j.contains("text") && !j.at("text").is_null()) {
      data::TextNoiseSpec t;
      get_opt(j.at("text"), "max_per_gap", t.max_per_gap);
      get_opt(j.at("text"), "max_len", t.max_len);
      c.text = t;
    }
    get_opt(j, "pe", c.pe);
    get_opt(j, "eval_lengths", c.eval_lengths);
    get_opt(j, "eval_size", c.eval_size);
    get_opt(j, "checkpoints", c.checkpoints);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      get_opt(t, "steps", c.train.steps);
      get_opt(t, "batch", c.train.batch);
      get_opt(t, "lr", c.train.lr);
      get_opt(t, "weight_decay", c.train.weight_decay);
      get_opt(t, "clip", c.train.clip);
      get_opt(t, "train_size", c.train.train_size);
      get_opt(t, "lr_decay_start", c.train.lr_decay_start);
      get_opt(t, "ema", c.train.ema);
    }
    if (j.contains("validation")) {
      get_opt(j.at("validation"), "length", c.validation.length);
      get_opt(j.at("validation"), "size", c.validation.size);
    }
    if (j.contains("theory")) {
      const auto& t = j.at("theory");
      auto& th = c.theory;
      get_opt(t, "model", th.model);
      get_opt(t, "n", th.n);
      get_opt(t, "n1", th.n1);
      get_opt(t, "d", th.d);
      get_opt(t, "alpha", th.alpha);
      get_opt(t, "betas", th.betas);
      get_opt(t, "w", th.w);
      get_opt(t, "freeze_a", th.freeze_a);
      get_opt(t, "mc_samples", th.mc_samples);
      get_opt(t, "steps", th.flow.steps);
      get_opt(t, "eta", th.flow.eta);
      get_opt(t, "epsilon", th.flow.epsilon);
      get_opt(t, "dt", th.flow.dt);
      get_opt(t, "log_every", th.flow.log_every);
    }

    if (c.kind == "model") {
      const json m = j.value("model", json::object());
      c.model = model_config_from_json(m);
      if (!m.contains("max_len")) {
        c.model.max_len = format_length(c.domain) + (c.text ? 3 * c.text->max_per_gap : 0);
      }
      if (!(m.contains("pe") && m.at("pe").is_object())) {
        c.model.scheme = pe::default_scheme(c.pe, c.domain, c.model.head_dim(), c.model.max_len);
        if (!c.model.scheme.is_pairwise()) c.model.scheme.slot_dim = c.model.scheme.is_absolute() ? c.model.d_model : 0;
      } else {
        c.pe = c.model.scheme.name();
      }
    }
    c.validate();
    return c;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json j{{"version", c.version},
         {"name", c.name},
         {"kind", c.kind},
         {"seed", c.seed},
         {"out_dir", c.out_dir}};
  if (c.kind == "model") {
    j["domain"] = to_json(c.domain);
    j["sampler"] = c.sampler.to_string();
    j["augment_shifts"] = c.augment_shifts;
    j["text"] = c.text ? json{{"max_per_gap", c.text->max_per_gap}, {"max_len", c.text->max_len}} : json(nullptr);
    j["pe"] = c.pe;
    j["model"] = to_json(c.model);
    j["train"] = {{"steps", c.train.steps}, {"batch", c.train.batch},         {"lr", c.train.lr},
                  {"weight_decay", c.train.weight_decay}, {"clip", c.train.clip}, {"train_size", c.train.train_size},
                  {"lr_decay_start", c.train.lr_decay_start}, {"ema", c.train.ema}};
    j["eval_lengths"] = c.eval_lengths;
    j["eval_size"] = c.eval_size;
    j["validation"] = {{"length", c.validation.length}, {"size", c.validation.size}};
    j["checkpoints"] = c.checkpoints;
  } else {
    const auto& t = c.theory;
    j["theory"] = {{"model", t.model},       {"n", t.n},           {"n1", t.n1},
                   {"d", t.d},               {"alpha", t.alpha},   {"betas", t.betas},
                   {"w", t.w},               {"freeze_a", t.freeze_a}, {"mc_samples", t.mc_samples},
                   {"steps", t.flow.steps},  {"eta", t.flow.eta},  {"epsilon", t.flow.epsilon},
                   {"dt", t.flow.dt},        {"log_every", t.flow.log_every}};
  }
  return j;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

}  // namespace lengen::config

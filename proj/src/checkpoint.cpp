#include "lengen/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "lengen/config.hpp"

namespace lengen::ckpt {

namespace {

constexpr std::array<char, 8> kMagic{'L', 'G', 'N', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw CheckpointError(std::string("checkpoint: truncated ") + what);
  return v;
}

void put_vector(std::ostream& out, const std::vector<double>& v) {
  put<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> take_vector(std::istream& in, const char* what) {
  const auto n = take<std::uint64_t>(in, what);
  if (n > (std::uint64_t{1} << 34)) throw CheckpointError(std::string("checkpoint: implausible size for ") + what);
  std::vector<double> v(n);
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
    throw CheckpointError(std::string("checkpoint: truncated ") + what);
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const nn::ParameterLayout layout(c.config);
  if (c.params.values.size() != layout.total()) throw CheckpointError("checkpoint: parameter count mismatch");
  nlohmann::json head{{"model", config::to_json(c.config)},
                      {"optim",
                       {{"step", c.optim.step},
                        {"lr", c.optim.lr},
                        {"beta1", c.optim.beta1},
                        {"beta2", c.optim.beta2},
                        {"eps", c.optim.eps},
                        {"weight_decay", c.optim.weight_decay}}},
                      {"meta", c.meta}};
  const std::string text = head.dump();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("checkpoint: cannot write " + path.string());
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kFormatVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    put_vector(out, c.params.values);
    put_vector(out, c.optim.m);
    put_vector(out, c.optim.v);
    if (!out) throw CheckpointError("checkpoint: write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw CheckpointError("checkpoint: " + path.string() + " is not a checkpoint file");
  }
  const auto version = take<std::uint32_t>(in, "version");
  if (version != kFormatVersion) throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version));
  const auto len = take<std::uint64_t>(in, "header");
  if (len > (1u << 26)) throw CheckpointError("checkpoint: implausible header size");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw CheckpointError("checkpoint: truncated header");

  Checkpoint c;
  try {
    const auto head = nlohmann::json::parse(text);
    c.config = config::model_config_from_json(head.at("model"));
    const auto& o = head.at("optim");
    c.optim.step = o.at("step").get<std::uint64_t>();
    c.optim.lr = o.at("lr").get<double>();
    c.optim.beta1 = o.at("beta1").get<double>();
    c.optim.beta2 = o.at("beta2").get<double>();
    c.optim.eps = o.at("eps").get<double>();
    c.optim.weight_decay = o.at("weight_decay").get<double>();
    c.meta = head.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: bad header: ") + e.what());
  }
  c.params.values = take_vector(in, "parameters");
  c.optim.m = take_vector(in, "first moments");
  c.optim.v = take_vector(in, "second moments");
  const nn::ParameterLayout layout(c.config);
  if (c.params.values.size() != layout.total()) throw CheckpointError("checkpoint: parameter count mismatch");
  return c;
}

}  // namespace lengen::ckpt

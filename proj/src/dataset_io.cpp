#include "lengen/dataset_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace lengen::data {

using nlohmann::json;

namespace {

json meta_to_json(const SampleMeta& m) {
  const auto& y = m.layout;
  return json{{"op", to_string(m.op)},
              {"l", m.l},
              {"l_s", m.l_s},
              {"len_a", m.len_a},
              {"len_b", m.len_b},
              {"complexity", m.complexity},
              {"shift", m.shift},
              {"layout",
               {y.first_start, y.first_len, y.op_pos, y.second_start, y.second_len, y.answer_start, y.answer_len}}};
}

SampleMeta meta_from_json(const json& j) {
  SampleMeta m;
  m.op = operation_from_string(j.at("op").get<std::string>());
  m.l = j.at("l").get<int>();
  m.l_s = j.at("l_s").get<int>();
  m.len_a = j.at("len_a").get<int>();
  m.len_b = j.at("len_b").get<int>();
  m.complexity = j.at("complexity").get<int>();
  m.shift = j.value("shift", 0);
  const auto lay = j.at("layout").get<std::vector<int>>();
  if (lay.size() != 7) throw std::runtime_error("dataset: layout must have 7 entries");
  m.layout = {lay[0], lay[1], lay[2], lay[3], lay[4], lay[5], lay[6]};
  return m;
}

}  // namespace

void write_dataset(std::ostream& out, const DatasetHeader& header, const std::vector<Sample>& samples) {
  json h{{"format", "lengen-dataset"},
         {"version", 1},
         {"vocab", vocab_table()},
         {"op", to_string(header.spec.op)},
         {"l", header.spec.l},
         {"l_s", header.spec.l_s},
         {"multiplier_len", header.spec.multiplier_len},
         {"sampler", header.sampler.to_string()},
         {"seed", header.sampler.seed},
         {"count", samples.size()}};
  out << h.dump() << '\n';
  for (const auto& s : samples) {
    std::vector<int> mask(s.mask.begin(), s.mask.end());
    json r{{"input_ids", s.input}, {"target_ids", s.target}, {"mask", mask}, {"meta", meta_to_json(s.meta)}};
    out << r.dump() << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const DatasetHeader& header, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_dataset(out, header, samples);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset: missing header record");
  const json h = json::parse(line);
  if (h.value("format", "") != "lengen-dataset") throw std::runtime_error("dataset: not a lengen dataset");
  if (h.at("version").get<int>() != 1) throw std::runtime_error("dataset: unsupported version");
  ds.header.vocab = h.at("vocab").get<std::vector<std::string>>();
  if (ds.header.vocab != vocab_table()) throw std::runtime_error("dataset: vocabulary mismatch");
  ds.header.spec.op = operation_from_string(h.at("op").get<std::string>());
  ds.header.spec.l = h.at("l").get<int>();
  ds.header.spec.l_s = h.at("l_s").get<int>();
  ds.header.spec.multiplier_len = h.value("multiplier_len", 1);
  ds.header.sampler = SamplerSpec::parse(h.at("sampler").get<std::string>(), h.at("seed").get<std::uint64_t>());
  ds.header.count = h.at("count").get<std::int64_t>();

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json r = json::parse(line);
      Sample s;
      s.input = r.at("input_ids").get<std::vector<int>>();
      s.target = r.at("target_ids").get<std::vector<int>>();
      const auto mask = r.at("mask").get<std::vector<int>>();
      s.mask.assign(mask.begin(), mask.end());
      s.meta = meta_from_json(r.at("meta"));
      if (s.input.size() != s.target.size() || s.input.size() != s.mask.size()) {
        throw std::runtime_error("length mismatch between input, target and mask");
      }
      ds.samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ds;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_dataset(in);
}

}  // namespace lengen::data

#include "lengen/posenc.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace lengen::pe {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

int clamp_offset(int off, int max_offset) { return std::clamp(off, -max_offset, max_offset) + max_offset; }

int centred_mod(int off, int n) {
  int r = ((off % n) + n) % n;
  if (r > n / 2) r -= n;
  return r;
}

}  // namespace

bool PEScheme::is_pairwise() const {
  return std::holds_alternative<RPE>(policy) || std::holds_alternative<UPE>(policy) ||
         std::holds_alternative<SigRPE>(policy);
}

std::string PEScheme::name() const {
  return std::visit(overloaded{[](const NoPE&) { return std::string("nope"); },
                               [](const APE&) { return std::string("ape"); },
                               [](const RPE&) { return std::string("rpe"); },
                               [](const UPE&) { return std::string("upe"); },
                               [](const SigRPE&) { return std::string("sigrpe"); }},
                    policy);
}

int slot_count(const PEScheme& scheme) {
  return std::visit(overloaded{[](const NoPE&) { return 0; }, [](const APE&) { return 0; },
                               [](const RPE& r) { return 2 * r.max_offset + 1; },
                               [](const UPE& u) {
                                 return 2 * u.rpe_max_offset + 1 + static_cast<int>(u.uniform_positions.size());
                               },
                               [](const SigRPE& s) { return 2 * s.max_offset + 1; }},
                    scheme.policy);
}

std::optional<int> pairwise_slot(const PEScheme& scheme, int i, int j, const data::SequenceLayout& layout,
                                 int seq_len) {
  return std::visit(
      overloaded{[](const NoPE&) -> std::optional<int> { return std::nullopt; },
                 [](const APE&) -> std::optional<int> { return std::nullopt; },
                 [&](const RPE& r) -> std::optional<int> {
                   const int off = r.periodic ? centred_mod(i - j, seq_len) : i - j;
                   return clamp_offset(off, r.max_offset);
                 },
                 [&](const UPE& u) -> std::optional<int> {
                   auto it = std::find(u.uniform_positions.begin(), u.uniform_positions.end(), j);
                   if (it != u.uniform_positions.end()) {
                     return 2 * u.rpe_max_offset + 1 + static_cast<int>(it - u.uniform_positions.begin());
                   }
                   return clamp_offset(i - j, u.rpe_max_offset);
                 },
                 [&](const SigRPE& s) -> std::optional<int> {
                   const int ci = layout.canonical_position(i);
                   const int cj = layout.canonical_position(j);
                   if (ci < 0 || cj < 0) return std::nullopt;
                   return clamp_offset(ci - cj, s.max_offset);
                 }},
      scheme.policy);
}

std::string slot_label(const PEScheme& scheme, int slot) {
  int max_offset = 0;
  if (const auto* r = std::get_if<RPE>(&scheme.policy)) max_offset = r->max_offset;
  if (const auto* s = std::get_if<SigRPE>(&scheme.policy)) max_offset = s->max_offset;
  if (const auto* u = std::get_if<UPE>(&scheme.policy)) {
    max_offset = u->rpe_max_offset;
    if (slot > 2 * max_offset) return "c" + std::to_string(slot - 2 * max_offset);
  }
  const int off = slot - max_offset;
  return (off > 0 ? "+" : "") + std::to_string(off);
}

std::vector<int> slot_matrix(const PEScheme& scheme, int seq_len, const data::SequenceLayout& layout) {
  std::vector<int> out(static_cast<std::size_t>(seq_len) * seq_len, -1);
  if (!scheme.is_pairwise()) return out;
  for (int i = 0; i < seq_len; ++i) {
    for (int j = 0; j < seq_len; ++j) {
      if (auto s = pairwise_slot(scheme, i, j, layout, seq_len)) out[static_cast<std::size_t>(i) * seq_len + j] = *s;
    }
  }
  return out;
}

SlotTable::SlotTable(int rows, int dim, bool trainable)
    : rows_(rows), dim_(dim), trainable_(trainable), values_(static_cast<std::size_t>(rows) * dim, 0.0) {
  if (rows < 0 || dim < 0) throw std::invalid_argument("SlotTable: negative shape");
}

std::span<double> SlotTable::row(int r) {
  return std::span<double>(values_).subspan(static_cast<std::size_t>(r) * dim_, static_cast<std::size_t>(dim_));
}

std::span<const double> SlotTable::row(int r) const {
  return std::span<const double>(values_).subspan(static_cast<std::size_t>(r) * dim_, static_cast<std::size_t>(dim_));
}

std::span<const double> ape_vector(const TableView& table, int i) {
  if (i < 0 || i >= table.rows) {
    throw std::out_of_range("ape_vector: position " + std::to_string(i) + " outside table of " +
                            std::to_string(table.rows));
  }
  return table.row(i);
}

void attention_scores(std::span<const double> q, std::span<const double> k, int seq_len, int dim,
                      std::span<const int> slots, const TableView& table, double scale, std::span<double> out) {
  const auto n = static_cast<std::size_t>(seq_len);
  const auto d = static_cast<std::size_t>(dim);
  if (q.size() != n * d || k.size() != n * d || out.size() != n * n || slots.size() != n * n) {
    throw std::invalid_argument("attention_scores: dimension mismatch");
  }
  if (table.rows > 0 && table.dim != dim) throw std::invalid_argument("attention_scores: slot dim mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    const double* qi = q.data() + i * d;
    for (std::size_t j = 0; j < n; ++j) {
      const double* kj = k.data() + j * d;
      const int slot = slots[i * n + j];
      double acc = 0.0;
      if (slot >= 0) {
        const double* p = table.data.data() + static_cast<std::size_t>(slot) * d;
        for (std::size_t c = 0; c < d; ++c) acc += qi[c] * (kj[c] + p[c]);
      } else {
        for (std::size_t c = 0; c < d; ++c) acc += qi[c] * kj[c];
      }
      out[i * n + j] = scale * acc;
    }
  }
}

void attention_scores_backward(std::span<const double> d_scores, std::span<const double> q,
                               std::span<const double> k, int seq_len, int dim, std::span<const int> slots,
                               const TableView& table, double scale, std::span<double> dq, std::span<double> dk,
                               std::span<double> dtable) {
  const auto n = static_cast<std::size_t>(seq_len);
  const auto d = static_cast<std::size_t>(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double* qi = q.data() + i * d;
    double* dqi = dq.data() + i * d;
    for (std::size_t j = 0; j < n; ++j) {
      const double g = scale * d_scores[i * n + j];
      if (g == 0.0) continue;
      const double* kj = k.data() + j * d;
      double* dkj = dk.data() + j * d;
      const int slot = slots[i * n + j];
      if (slot >= 0) {
        const double* p = table.data.data() + static_cast<std::size_t>(slot) * d;
        for (std::size_t c = 0; c < d; ++c) dqi[c] += g * (kj[c] + p[c]);
        if (!dtable.empty()) {
          double* dp = dtable.data() + static_cast<std::size_t>(slot) * d;
          for (std::size_t c = 0; c < d; ++c) dp[c] += g * qi[c];
        }
      } else {
        for (std::size_t c = 0; c < d; ++c) dqi[c] += g * kj[c];
      }
      for (std::size_t c = 0; c < d; ++c) dkj[c] += g * qi[c];
    }
  }
}

void export_slot_table_csv(const PEScheme& scheme, const TableView& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "slot,label";
  for (int c = 0; c < table.dim; ++c) out << ",v" << c;
  out << '\n';
  char buf[32];
  for (int r = 0; r < table.rows; ++r) {
    out << r << ',' << (scheme.is_pairwise() ? slot_label(scheme, r) : std::to_string(r));
    for (double v : table.row(r)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

PEScheme default_scheme(const std::string& kind, const data::DomainSpec& spec, int slot_dim, int max_len) {
  const bool mul = spec.op == data::Operation::mul;
  const int offset = mul ? spec.l + spec.multiplier_len + 1 : 2 * spec.l + 1;
  PEScheme s;
  s.slot_dim = slot_dim;
  if (kind == "nope") {
    s.policy = NoPE{};
  } else if (kind == "ape") {
    s.policy = APE{max_len};
  } else if (kind == "rpe") {
    s.policy = RPE{offset, false};
  } else if (kind == "upe") {
    UPE u;
    for (int p = 0; p < spec.multiplier_len; ++p) u.uniform_positions.push_back(p);
    u.rpe_max_offset = offset;
    s.policy = u;
  } else if (kind == "sigrpe") {
    s.policy = SigRPE{offset};
  } else {
    throw std::invalid_argument("unknown positional encoding '" + kind + "'");
  }
  return s;
}

}  // namespace lengen::pe

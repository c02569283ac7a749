#pragma once

// Positional-encoding policies. Absolute encodings add a per-position
// vector to the token embedding; pairwise encodings map a (query, key)
// position pair to a shared slot whose vector is added to the key.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lengen/datagen.hpp"

namespace lengen::pe {

struct NoPE {};

struct APE {
  int max_len = 0;
};

/// Slot = clamp(i - j, +-max_offset). With `periodic`, the offset is first
/// reduced modulo the sequence length to the centred range.
struct RPE {
  int max_offset = 0;
  bool periodic = false;
};

/// Keys at `uniform_positions` get the constant slot c_index regardless of
/// the query; every other pair falls back to RPE.
struct UPE {
  std::vector<int> uniform_positions;
  int rpe_max_offset = 0;
};

/// Offsets measured in the text-free canonical layout of the two operands,
/// so digits of equal significance always share a slot however much text
/// separates them. Pairs touching text tokens carry no bias.
struct SigRPE {
  int max_offset = 0;
};

using Policy = std::variant<NoPE, APE, RPE, UPE, SigRPE>;

struct PEScheme {
  Policy policy = NoPE{};
  int slot_dim = 0;

  bool is_absolute() const { return std::holds_alternative<APE>(policy); }
  bool is_pairwise() const;
  std::string name() const;
};

/// Number of pairwise slots (0 for NoPE and APE).
int slot_count(const PEScheme& scheme);

/// Slot used by query i attending to key j, or nullopt if the pair carries
/// no positional vector.
std::optional<int> pairwise_slot(const PEScheme& scheme, int i, int j, const data::SequenceLayout& layout,
                                 int seq_len);

/// Row label for exports: "+3" / "-1" for relative slots, "c2" for uniform ones.
std::string slot_label(const PEScheme& scheme, int slot);

/// Row-major seq_len x seq_len slot ids, -1 where no slot applies.
std::vector<int> slot_matrix(const PEScheme& scheme, int seq_len, const data::SequenceLayout& layout);

/// Read-only view of a slot (or APE) table: rows x dim, row-major.
struct TableView {
  std::span<const double> data;
  int rows = 0;
  int dim = 0;

  std::span<const double> row(int r) const {
    return data.subspan(static_cast<std::size_t>(r) * dim, static_cast<std::size_t>(dim));
  }
};

class SlotTable {
 public:
  SlotTable(int rows, int dim, bool trainable = true);

  int rows() const { return rows_; }
  int dim() const { return dim_; }
  bool trainable() const { return trainable_; }
  std::span<double> row(int r);
  std::span<const double> row(int r) const;
  std::vector<double>& values() { return values_; }
  TableView view() const { return {values_, rows_, dim_}; }

 private:
  int rows_;
  int dim_;
  bool trainable_;
  std::vector<double> values_;
};

/// p_i from an APE table. Throws std::out_of_range past the table.
std::span<const double> ape_vector(const TableView& table, int i);

/// Pre-softmax scores for one head:
///   s_ij = scale * q_i . (k_j + p_slot(i,j))
/// q and k are seq_len x dim row-major; out receives seq_len x seq_len.
/// Throws std::invalid_argument on mismatched dimensions.
void attention_scores(std::span<const double> q, std::span<const double> k, int seq_len, int dim,
                      std::span<const int> slots, const TableView& table, double scale, std::span<double> out);

/// Accumulates gradients of attention_scores given d(out) into dq, dk and
/// dtable (dtable may be empty when the table is frozen or absent).
void attention_scores_backward(std::span<const double> d_scores, std::span<const double> q,
                               std::span<const double> k, int seq_len, int dim, std::span<const int> slots,
                               const TableView& table, double scale, std::span<double> dq, std::span<double> dk,
                               std::span<double> dtable);

/// One CSV per table: rows are slots (labelled), columns vector components.
void export_slot_table_csv(const PEScheme& scheme, const TableView& table, const std::filesystem::path& path);

/// Default scheme for a task format, following the slot-range conventions
/// used throughout: RPE covers 2l+1 offsets for addition and l+len(a)+1
/// for multiplication; UPE pins the multiplier digits.
PEScheme default_scheme(const std::string& kind, const data::DomainSpec& spec, int slot_dim, int max_len);

}  // namespace lengen::pe

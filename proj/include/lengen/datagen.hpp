#pragma once

// Tokenised arithmetic samples: padded input formats, domain sampling,
// complexity-stratified and mixture distributions, zero-shift augmentation
// and text interleaving.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lengen/arith.hpp"
#include "lengen/rng.hpp"
#include "lengen/vocab.hpp"

namespace lengen::data {

using arith::Digits;
using OperandPair = std::pair<Digits, Digits>;

enum class Operation { add, mul };

std::string to_string(Operation op);
Operation operation_from_string(const std::string& s);

/// Where the two operand blocks and the operator sit in a token sequence.
/// Significance 1 is the right-most slot of a block (the units digit or the
/// padding in its place).
struct SequenceLayout {
  int first_start = 0;
  int first_len = 0;
  int op_pos = 0;
  int second_start = 0;
  int second_len = 0;
  int answer_start = 0;
  int answer_len = 0;

  /// Position inside the text-free canonical layout for token `pos`, or -1
  /// when `pos` is not part of an operand block or the operator.
  int canonical_position(int pos) const;
};

struct SampleMeta {
  Operation op = Operation::add;
  int l = 0;
  int l_s = 0;
  int len_a = 0;
  int len_b = 0;
  int complexity = 0;  // cascade length (add) or dependency levels (mul)
  int shift = 0;       // zero-shift augmentation applied, if any
  SequenceLayout layout;
};

struct Sample {
  std::vector<int> input;
  std::vector<int> target;
  std::vector<std::uint8_t> mask;
  SampleMeta meta;

  std::size_t size() const { return input.size(); }
};

struct DomainSpec {
  int l = 20;
  int l_s = 5;
  Operation op = Operation::add;
  int multiplier_len = 1;  // multiplication only

  void validate() const;
};

enum class SamplerKind { uniform, complexity_uniform, mixture };

struct SamplerSpec {
  SamplerKind kind = SamplerKind::uniform;
  double mixture_p = 0.5;
  std::uint64_t seed = 0;

  /// Parses "uniform", "cuniform" or "mix:<p>".
  static SamplerSpec parse(const std::string& text, std::uint64_t seed);
  std::string to_string() const;
};

enum class Region { seen, unseen, all };

struct TextNoiseSpec {
  int max_per_gap = 20;
  int max_len = 512;
};

class OverflowError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class RejectionBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::int64_t kDefaultRejectionBudget = 1'000'000;

/// Addition format of length 2l+1. Throws std::invalid_argument when an
/// operand is longer than l and OverflowError when the sum needs l+1 digits.
Sample encode_add(const Digits& a, const Digits& b, int l);

/// Multiplication format: unpadded multiplier, times token, padded
/// multiplicand. The product is supervised on the last l + len(a) positions.
Sample encode_mul(const Digits& a, const Digits& b, int l);

Sample encode(const DomainSpec& spec, const OperandPair& pair);

/// Digits decoded from the supervised region (PAD read as leading blank).
Digits decode_answer(const Sample& s);

/// Uniform integer in [0, 10^num_digits).
Digits uniform_below_pow10(int num_digits, Rng& rng);

/// Uniform pair from the requested region. For multiplication the region
/// constrains the multiplicand; the multiplier has exactly multiplier_len
/// digits (1..9 for a single digit).
OperandPair sample_pair(const DomainSpec& spec, Region region, Rng& rng);

/// Pair whose operands both have at most `len` digits and at least one has
/// exactly `len` digits; the evaluation distribution for "length len".
/// Addition pairs whose sum does not fit in spec.l are redrawn.
OperandPair sample_length(const DomainSpec& spec, int len, Rng& rng);

int complexity_of(const DomainSpec& spec, const OperandPair& pair);

/// Rejection-samples seen-domain pairs with the requested complexity.
OperandPair sample_by_complexity(const DomainSpec& spec, int target, Rng& rng,
                                 std::int64_t budget = kDefaultRejectionBudget);

/// Complexity values the complexity-uniform sampler draws from.
std::vector<int> achievable_complexities(const DomainSpec& spec);

/// Multiplies both operands (add) or the multiplicand (mul) by 10^shift.
/// Throws std::invalid_argument when a shifted operand would exceed l.
OperandPair augment_zero_shift(const OperandPair& pair, int shift, int l,
                               Operation op = Operation::add);

/// All shifts s >= 0 for which the shifted pair still encodes in the format.
std::vector<int> feasible_shifts(const DomainSpec& spec, const OperandPair& pair);

/// Inserts 0..max_per_gap TEXT tokens before, between and after the two
/// integers. The answer stays right-aligned with the second integer.
Sample interleave_text(const Sample& sample, const TextNoiseSpec& noise, Rng& rng);

struct StreamOptions {
  bool augment_shifts = false;
  std::optional<TextNoiseSpec> text;
};

/// Lazily generated dataset. Sample k depends only on (spec, sampler, k),
/// so disjoint index ranges can be produced independently.
class DatasetStream {
 public:
  DatasetStream(DomainSpec spec, SamplerSpec sampler, std::int64_t count, StreamOptions options = {});

  std::optional<Sample> next();
  /// Operand pair behind sample `index`, before shifting or encoding.
  OperandPair pair_at(std::int64_t index) const;
  /// Every sample that index `index` expands to (several with augmentation).
  std::vector<Sample> samples_at(std::int64_t index) const;
  std::int64_t count() const { return count_; }
  void reset();

 private:
  DomainSpec spec_;
  SamplerSpec sampler_;
  std::int64_t count_;
  StreamOptions options_;
  std::vector<int> achievable_;
  std::int64_t index_ = 0;
  std::int64_t yielded_ = 0;
  std::vector<Sample> pending_;
};

std::vector<Sample> collect(DatasetStream& stream);

}  // namespace lengen::data

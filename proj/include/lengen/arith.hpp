#pragma once

// Exact decimal digit arithmetic, the parallel carry-handle reference
// algorithms, and the carry-complexity measures built on them.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lengen::arith {

/// Non-negative integer as little-endian base-10 digits (index 0 is the
/// least significant digit). Always canonical: no most-significant zeros
/// except for the single digit of zero.
class Digits {
 public:
  Digits() : digits_{0} {}

  static Digits from_uint(std::uint64_t value);
  /// Parses a big-endian decimal string such as "4095".
  static Digits from_string(std::string_view text);
  /// Validates every element is in [0,9] and strips most-significant zeros.
  static Digits from_little_endian(std::vector<std::uint8_t> digits);

  std::size_t size() const { return digits_.size(); }
  std::uint8_t operator[](std::size_t i) const { return digits_[i]; }
  /// Digit at position i, or 0 past the most significant digit.
  std::uint8_t at_or_zero(std::size_t i) const { return i < digits_.size() ? digits_[i] : 0; }
  std::span<const std::uint8_t> little_endian() const { return digits_; }
  bool is_zero() const { return digits_.size() == 1 && digits_[0] == 0; }

  /// Throws std::overflow_error above 2^64 - 1.
  std::uint64_t to_uint() const;
  std::string to_string() const;

  /// Multiply by 10^shift.
  Digits shifted(std::size_t shift) const;

  friend bool operator==(const Digits&, const Digits&) = default;

 private:
  explicit Digits(std::vector<std::uint8_t> canonical) : digits_(std::move(canonical)) {}
  std::vector<std::uint8_t> digits_;
};

struct AddResult {
  Digits sum;
  int iterations = 0;
};

struct MulResult {
  Digits product;
  int iterations = 0;
};

/// Carry-complexity of one operand pair.
///
/// For addition, per_position_chain[i] is nonzero only where a_i + b_i >= 10
/// and counts that position plus the run of 9-sum positions above it.
/// For multiplication, per_position_chain[i] is the carry pass after which
/// position i holds its final digit; dependency_levels is the total number
/// of passes.
struct ComplexityReport {
  int cascade_length = 0;
  int dependency_levels = 0;
  std::vector<int> per_position_chain;
};

enum class CascadeConvention {
  generator_counts,  // carry-generating position contributes 1 (default)
  nines_only,        // only the trailing 9-sum positions are counted
};

Digits school_add(const Digits& a, const Digits& b);
Digits school_mul(const Digits& a, const Digits& b);

/// Digit-wise sums followed by whole-array carry passes until every
/// position holds a single digit. Throws std::invalid_argument if an
/// operand is longer than `l`.
AddResult parallel_add(const Digits& a, const Digits& b, std::size_t l);

/// Multiplier times each multiplicand digit, then carry passes in which
/// digit k of every cell moves k positions up (k = 1..len(a)). The
/// multiplier must have at most 9 digits.
MulResult parallel_mul(const Digits& a, const Digits& b);

/// Allocation-free core of parallel_add for hot loops. `out` receives
/// l + 1 little-endian digits (not canonicalised). Returns the pass count.
int parallel_add_into(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b,
                      std::size_t l, std::vector<int>& work, std::vector<std::uint8_t>& out);

ComplexityReport cascade_complexity(const Digits& a, const Digits& b);

/// Cascade length under either counting convention. The default convention
/// agrees with cascade_complexity().cascade_length.
int cascade_length(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b,
                   CascadeConvention convention = CascadeConvention::generator_counts);

ComplexityReport mul_complexity(const Digits& a, const Digits& b);

/// 1-based input positions needed for output digit i (1 <= i <= l) under
/// the padded addition format: (1, ..., i, l+2, ..., i+l+1).
/// Throws std::out_of_range for i outside [1, l].
std::vector<int> sigma(int i, int l);

/// Relative offsets tracked when the cascade depth seen in training is d:
/// (-d, ..., -1, 0, l-d+1, ..., l, l+1). The list does not depend on i.
/// Throws std::invalid_argument if d > i or d < 0.
std::vector<int> sigma_rel(int i, int d, int l);

}  // namespace lengen::arith

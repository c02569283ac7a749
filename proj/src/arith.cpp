#include "lengen/arith.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace lengen::arith {

namespace {

void strip(std::vector<std::uint8_t>& d) {
  while (d.size() > 1 && d.back() == 0) d.pop_back();
  if (d.empty()) d.push_back(0);
}

constexpr std::uint64_t kPow10[] = {
    1ULL,          10ULL,          100ULL,          1000ULL,          10000ULL,
    100000ULL,     1000000ULL,     10000000ULL,     100000000ULL,     1000000000ULL,
    10000000000ULL};

}  // namespace

Digits Digits::from_uint(std::uint64_t value) {
  std::vector<std::uint8_t> d;
  do {
    d.push_back(static_cast<std::uint8_t>(value % 10));
    value /= 10;
  } while (value != 0);
  return Digits(std::move(d));
}

Digits Digits::from_string(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("empty digit string");
  std::vector<std::uint8_t> d;
  d.reserve(text.size());
  for (auto it = text.rbegin(); it != text.rend(); ++it) {
    if (*it < '0' || *it > '9') throw std::invalid_argument("non-digit character in '" + std::string(text) + "'");
    d.push_back(static_cast<std::uint8_t>(*it - '0'));
  }
  strip(d);
  return Digits(std::move(d));
}

Digits Digits::from_little_endian(std::vector<std::uint8_t> digits) {
  for (auto v : digits) {
    if (v > 9) throw std::invalid_argument("digit out of range [0,9]");
  }
  strip(digits);
  return Digits(std::move(digits));
}

std::uint64_t Digits::to_uint() const {
  std::uint64_t v = 0;
  for (auto it = digits_.rbegin(); it != digits_.rend(); ++it) {
    if (v > (std::numeric_limits<std::uint64_t>::max() - *it) / 10) {
      throw std::overflow_error("Digits value exceeds 64 bits");
    }
    v = v * 10 + *it;
  }
  return v;
}

std::string Digits::to_string() const {
  std::string s;
  s.reserve(digits_.size());
  for (auto it = digits_.rbegin(); it != digits_.rend(); ++it) s.push_back(static_cast<char>('0' + *it));
  return s;
}

Digits Digits::shifted(std::size_t shift) const {
  if (is_zero() || shift == 0) return *this;
  std::vector<std::uint8_t> d(shift, 0);
  d.insert(d.end(), digits_.begin(), digits_.end());
  return Digits(std::move(d));
}

Digits school_add(const Digits& a, const Digits& b) {
  const std::size_t n = std::max(a.size(), b.size());
  std::vector<std::uint8_t> out;
  out.reserve(n + 1);
  int carry = 0;
  for (std::size_t i = 0; i < n; ++i) {
    int s = a.at_or_zero(i) + b.at_or_zero(i) + carry;
    out.push_back(static_cast<std::uint8_t>(s % 10));
    carry = s / 10;
  }
  if (carry) out.push_back(static_cast<std::uint8_t>(carry));
  return Digits::from_little_endian(std::move(out));
}

Digits school_mul(const Digits& a, const Digits& b) {
  std::vector<int> acc(a.size() + b.size(), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    int carry = 0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      int cur = acc[i + j] + a[i] * b[j] + carry;
      acc[i + j] = cur % 10;
      carry = cur / 10;
    }
    std::size_t k = i + b.size();
    while (carry) {
      int cur = acc[k] + carry;
      acc[k] = cur % 10;
      carry = cur / 10;
      ++k;
    }
  }
  std::vector<std::uint8_t> out(acc.begin(), acc.end());
  return Digits::from_little_endian(std::move(out));
}

int parallel_add_into(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b,
                      std::size_t l, std::vector<int>& s, std::vector<std::uint8_t>& out) {
  if (a.size() > l || b.size() > l) throw std::invalid_argument("parallel_add: operand longer than l");
  s.assign(l + 1, 0);
  for (std::size_t i = 0; i < a.size(); ++i) s[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) s[i] += b[i];

  int passes = 0;
  auto pending = [&] { return std::any_of(s.begin(), s.end(), [](int v) { return v >= 10; }); };
  while (pending()) {
    // Every position keeps its remainder and takes the carry of the one
    // below; top-down so that s[j-1] is still the previous pass's value.
    for (std::size_t j = l; j >= 1; --j) s[j] = s[j] % 10 + s[j - 1] / 10;
    s[0] %= 10;
    ++passes;
  }
  out.resize(l + 1);
  for (std::size_t i = 0; i <= l; ++i) out[i] = static_cast<std::uint8_t>(s[i]);
  return passes;
}

AddResult parallel_add(const Digits& a, const Digits& b, std::size_t l) {
  std::vector<int> work;
  std::vector<std::uint8_t> out;
  int passes = parallel_add_into(a.little_endian(), b.little_endian(), l, work, out);
  return {Digits::from_little_endian(std::move(out)), passes};
}

namespace {

struct MulTrace {
  std::vector<std::uint64_t> cells;
  std::vector<int> settled_at;
  int passes = 0;
};

MulTrace run_parallel_mul(const Digits& a, const Digits& b) {
  if (a.size() > 9) throw std::invalid_argument("parallel_mul: multiplier longer than 9 digits");
  const std::size_t l1 = a.size();
  const std::size_t n = a.size() + b.size();
  const std::uint64_t av = a.to_uint();

  MulTrace t;
  t.cells.assign(n, 0);
  t.settled_at.assign(n, 0);
  for (std::size_t i = 0; i < b.size(); ++i) t.cells[i] = av * b[i];

  std::vector<std::uint64_t> incoming(n);
  auto pending = [&] { return std::any_of(t.cells.begin(), t.cells.end(), [](std::uint64_t v) { return v >= 10; }); };
  while (pending()) {
    std::fill(incoming.begin(), incoming.end(), 0);
    for (std::size_t k = 1; k <= l1; ++k) {
      for (std::size_t j = 0; j + k < n; ++j) {
        const std::uint64_t part = t.cells[j] / kPow10[k];
        incoming[j + k] += (k < l1) ? part % 10 : part;
      }
    }
    ++t.passes;
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint64_t next = t.cells[j] % 10 + incoming[j];
      if (next != t.cells[j] || t.cells[j] >= 10) t.settled_at[j] = t.passes;
      t.cells[j] = next;
    }
  }
  return t;
}

}  // namespace

MulResult parallel_mul(const Digits& a, const Digits& b) {
  MulTrace t = run_parallel_mul(a, b);
  std::vector<std::uint8_t> d(t.cells.begin(), t.cells.end());
  return {Digits::from_little_endian(std::move(d)), t.passes};
}

int cascade_length(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b,
                   CascadeConvention convention) {
  const std::size_t n = std::max(a.size(), b.size());
  auto sum_at = [&](std::size_t i) {
    return (i < a.size() ? a[i] : 0) + (i < b.size() ? b[i] : 0);
  };
  int best = 0;
  bool any = false;
  int nines_above = 0;  // run of 9-sums strictly above the current position
  for (std::size_t i = n; i-- > 0;) {
    const int s = sum_at(i);
    if (s >= 10) {
      any = true;
      best = std::max(best, nines_above);
    }
    nines_above = (s == 9) ? nines_above + 1 : 0;
  }
  if (!any) return 0;
  return convention == CascadeConvention::generator_counts ? best + 1 : best;
}

ComplexityReport cascade_complexity(const Digits& a, const Digits& b) {
  const std::size_t n = std::max(a.size(), b.size());
  ComplexityReport r;
  r.per_position_chain.assign(n, 0);
  std::vector<int> sums(n);
  for (std::size_t i = 0; i < n; ++i) sums[i] = a.at_or_zero(i) + b.at_or_zero(i);
  for (std::size_t i = 0; i < n; ++i) {
    if (sums[i] < 10) continue;
    int chain = 1;
    for (std::size_t j = i + 1; j < n && sums[j] == 9; ++j) ++chain;
    r.per_position_chain[i] = chain;
  }
  r.cascade_length = r.per_position_chain.empty()
                         ? 0
                         : *std::max_element(r.per_position_chain.begin(), r.per_position_chain.end());
  r.dependency_levels = r.cascade_length;
  return r;
}

ComplexityReport mul_complexity(const Digits& a, const Digits& b) {
  MulTrace t = run_parallel_mul(a, b);
  ComplexityReport r;
  r.dependency_levels = t.passes;
  r.per_position_chain = std::move(t.settled_at);
  r.cascade_length = t.passes;
  return r;
}

std::vector<int> sigma(int i, int l) {
  if (l < 1 || i < 1 || i > l) throw std::out_of_range("sigma: position must satisfy 1 <= i <= l");
  std::vector<int> out;
  out.reserve(2 * static_cast<std::size_t>(i));
  for (int p = 1; p <= i; ++p) out.push_back(p);
  for (int p = l + 2; p <= i + l + 1; ++p) out.push_back(p);
  return out;
}

std::vector<int> sigma_rel(int i, int d, int l) {
  if (d < 0 || d > i) throw std::invalid_argument("sigma_rel: requires 0 <= d <= i");
  std::vector<int> out;
  for (int k = -d; k <= 0; ++k) out.push_back(k);
  for (int k = l - d + 1; k <= l + 1; ++k) out.push_back(k);
  return out;
}

}  // namespace lengen::arith

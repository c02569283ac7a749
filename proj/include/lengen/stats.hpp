#pragma once

// Monte-Carlo histograms of carry-cascade length and multiplication
// dependency levels, and of the complexity mix a sampler produces.

#include <cstdint>
#include <map>

#include "lengen/arith.hpp"
#include "lengen/csv.hpp"
#include "lengen/datagen.hpp"

namespace lengen::stats {

struct Histogram {
  std::map<int, std::int64_t> counts;
  std::int64_t total = 0;

  void add(int value) {
    ++counts[value];
    ++total;
  }
  double prob(int value) const;
  double cdf(int value) const;  // P(X <= value)
};

/// Cascade lengths of uniform pairs below 10^digits under both counting
/// conventions. Work is split into fixed chunks with derived seeds.
struct CascadeDist {
  Histogram generator_counts;
  Histogram nines_only;
};
CascadeDist cascade_dist(int digits, std::int64_t samples, std::uint64_t seed);

/// Dependency levels of (multiplier, multiplicand) pairs: a uniform
/// 1..9 multiplier when multiplier_len is 1 (exactly multiplier_len digits
/// otherwise) times a multiplicand uniform below 10^digits.
Histogram mul_dep_dist(int multiplier_len, int digits, std::int64_t samples, std::uint64_t seed);

/// Complexities of the first `count` samples of a dataset stream.
Histogram complexity_hist(const data::DomainSpec& spec, const data::SamplerSpec& sampler, std::int64_t count);

/// Rows (value, count, probability, cumulative).
report::Table to_table(const Histogram& h);
/// Rows (convention, value, count, probability, cumulative).
report::Table to_table(const CascadeDist& d);

}  // namespace lengen::stats

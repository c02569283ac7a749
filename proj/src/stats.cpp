#include "lengen/stats.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace lengen::stats {

namespace {

constexpr std::int64_t kChunk = 100'000;

template <typename Fn>
void chunked(std::int64_t samples, std::uint64_t seed, Fn&& fn) {
  for (std::int64_t start = 0, chunk = 0; start < samples; start += kChunk, ++chunk) {
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(chunk)));
    const std::int64_t end = std::min(samples, start + kChunk);
    for (std::int64_t i = start; i < end; ++i) fn(rng);
  }
}

}  // namespace

double Histogram::prob(int value) const {
  const auto it = counts.find(value);
  return total == 0 || it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
}

double Histogram::cdf(int value) const {
  std::int64_t c = 0;
  for (const auto& [k, n] : counts) {
    if (k <= value) c += n;
  }
  return total == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(total);
}

CascadeDist cascade_dist(int digits, std::int64_t samples, std::uint64_t seed) {
  if (digits < 0) throw std::invalid_argument("cascade_dist: negative digit count");
  CascadeDist out;
  const std::size_t n = std::max(1, digits);
  std::vector<std::uint8_t> a(n, 0), b(n, 0);
  std::uniform_int_distribution<int> digit(0, 9);
  chunked(samples, seed, [&](Rng& rng) {
    for (int i = 0; i < digits; ++i) {
      a[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(digit(rng));
      b[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(digit(rng));
    }
    out.generator_counts.add(arith::cascade_length(a, b, arith::CascadeConvention::generator_counts));
    out.nines_only.add(arith::cascade_length(a, b, arith::CascadeConvention::nines_only));
  });
  return out;
}

Histogram mul_dep_dist(int multiplier_len, int digits, std::int64_t samples, std::uint64_t seed) {
  if (multiplier_len < 1 || digits < 0) throw std::invalid_argument("mul_dep_dist: bad lengths");
  data::DomainSpec spec;
  spec.op = data::Operation::mul;
  spec.multiplier_len = multiplier_len;
  spec.l = std::max(digits, 1) + 1;
  spec.l_s = std::max(digits, 1);
  Histogram h;
  chunked(samples, seed, [&](Rng& rng) {
    if (digits == 0) {
      h.add(0);
      return;
    }
    const auto pair = data::sample_pair(spec, data::Region::seen, rng);
    h.add(arith::mul_complexity(pair.first, pair.second).dependency_levels);
  });
  return h;
}

Histogram complexity_hist(const data::DomainSpec& spec, const data::SamplerSpec& sampler, std::int64_t count) {
  data::DatasetStream stream(spec, sampler, count);
  Histogram h;
  for (std::int64_t i = 0; i < count; ++i) h.add(data::complexity_of(spec, stream.pair_at(i)));
  return h;
}

report::Table to_table(const Histogram& h) {
  report::Table t({"value", "count", "probability", "cumulative"});
  for (const auto& [k, n] : h.counts) t.add(k, n, h.prob(k), h.cdf(k));
  return t;
}

report::Table to_table(const CascadeDist& d) {
  report::Table t({"convention", "value", "count", "probability", "cumulative"});
  for (const auto& [name, h] : {std::pair<std::string, const Histogram*>{"generator_counts", &d.generator_counts},
                                {"nines_only", &d.nines_only}}) {
    for (const auto& [k, n] : h->counts) t.add(name, k, n, h->prob(k), h->cdf(k));
  }
  return t;
}

}  // namespace lengen::stats

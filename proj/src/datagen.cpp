#include "lengen/datagen.hpp"

#include <algorithm>
#include <set>

namespace lengen::data {

std::string token_name(int id) {
  if (tok::is_digit(id)) return std::string(1, static_cast<char>('0' + id));
  switch (id) {
    case tok::kPlus: return "+";
    case tok::kTimes: return "x";
    case tok::kPad: return "pad";
    case tok::kIgnore: return "_";
    default: break;
  }
  if (tok::is_text(id)) return "t" + std::to_string(id - tok::kFirstText + 1);
  throw std::out_of_range("unknown token id " + std::to_string(id));
}

std::vector<std::string> vocab_table() {
  std::vector<std::string> out;
  for (int id = 0; id < tok::kVocabSize; ++id) out.push_back(token_name(id));
  return out;
}

std::string to_string(Operation op) { return op == Operation::add ? "add" : "mul"; }

Operation operation_from_string(const std::string& s) {
  if (s == "add") return Operation::add;
  if (s == "mul") return Operation::mul;
  throw std::invalid_argument("unknown operation '" + s + "' (expected add|mul)");
}

int SequenceLayout::canonical_position(int pos) const {
  if (pos >= first_start && pos < first_start + first_len) return pos - first_start;
  if (pos == op_pos) return first_len;
  if (pos >= second_start && pos < second_start + second_len) return first_len + 1 + (pos - second_start);
  return -1;
}

void DomainSpec::validate() const {
  if (l_s < 1 || l_s >= l) throw std::invalid_argument("DomainSpec: requires 1 <= l_s < l");
  if (op == Operation::mul && (multiplier_len < 1 || multiplier_len > 9)) {
    throw std::invalid_argument("DomainSpec: multiplier_len must be in [1,9]");
  }
}

SamplerSpec SamplerSpec::parse(const std::string& text, std::uint64_t seed) {
  SamplerSpec s;
  s.seed = seed;
  if (text == "uniform") {
    s.kind = SamplerKind::uniform;
  } else if (text == "cuniform") {
    s.kind = SamplerKind::complexity_uniform;
  } else if (text.rfind("mix:", 0) == 0) {
    s.kind = SamplerKind::mixture;
    s.mixture_p = std::stod(text.substr(4));
    if (s.mixture_p < 0.0 || s.mixture_p > 1.0) throw std::invalid_argument("mixture probability outside [0,1]");
  } else {
    throw std::invalid_argument("unknown sampler '" + text + "' (expected uniform|cuniform|mix:p)");
  }
  return s;
}

std::string SamplerSpec::to_string() const {
  switch (kind) {
    case SamplerKind::uniform: return "uniform";
    case SamplerKind::complexity_uniform: return "cuniform";
    case SamplerKind::mixture: return "mix:" + std::to_string(mixture_p);
  }
  return "uniform";
}

namespace {

void append_big_endian(std::vector<int>& out, const Digits& d) {
  for (std::size_t i = d.size(); i-- > 0;) out.push_back(d[i]);
}

void append(std::vector<int>& out, int token, int count) {
  out.insert(out.end(), static_cast<std::size_t>(std::max(count, 0)), token);
}

void fill_target(Sample& s, const Digits& answer) {
  const auto& lay = s.meta.layout;
  s.target.assign(s.input.size(), tok::kIgnore);
  s.mask.assign(s.input.size(), 0);
  const int blanks = lay.answer_len - static_cast<int>(answer.size());
  for (int k = 0; k < lay.answer_len; ++k) {
    const int pos = lay.answer_start + k;
    s.target[pos] = k < blanks ? tok::kPad : answer[static_cast<std::size_t>(lay.answer_len - 1 - k)];
    s.mask[pos] = 1;
  }
}

}  // namespace

Sample encode_add(const Digits& a, const Digits& b, int l) {
  if (static_cast<int>(a.size()) > l || static_cast<int>(b.size()) > l) {
    throw std::invalid_argument("encode_add: operand longer than l=" + std::to_string(l));
  }
  const Digits sum = arith::school_add(a, b);
  if (static_cast<int>(sum.size()) > l) {
    throw OverflowError("encode_add: " + a.to_string() + "+" + b.to_string() + " needs more than l digits");
  }
  Sample s;
  s.input.reserve(2 * l + 1);
  append(s.input, tok::kPad, l - static_cast<int>(a.size()));
  append_big_endian(s.input, a);
  s.input.push_back(tok::kPlus);
  append(s.input, tok::kPad, l - static_cast<int>(b.size()));
  append_big_endian(s.input, b);

  s.meta.op = Operation::add;
  s.meta.l = l;
  s.meta.len_a = static_cast<int>(a.size());
  s.meta.len_b = static_cast<int>(b.size());
  s.meta.complexity = arith::cascade_length(a.little_endian(), b.little_endian());
  s.meta.layout = {0, l, l, l + 1, l, l + 1, l};
  fill_target(s, sum);
  return s;
}

Sample encode_mul(const Digits& a, const Digits& b, int l) {
  if (static_cast<int>(b.size()) > l) {
    throw std::invalid_argument("encode_mul: multiplicand longer than l=" + std::to_string(l));
  }
  const int la = static_cast<int>(a.size());
  Sample s;
  append_big_endian(s.input, a);
  s.input.push_back(tok::kTimes);
  append(s.input, tok::kPad, l - static_cast<int>(b.size()));
  append_big_endian(s.input, b);

  const int total = static_cast<int>(s.input.size());
  s.meta.op = Operation::mul;
  s.meta.l = l;
  s.meta.len_a = la;
  s.meta.len_b = static_cast<int>(b.size());
  s.meta.complexity = arith::mul_complexity(a, b).dependency_levels;
  s.meta.layout = {0, la, la, la + 1, l, total - (l + la), l + la};
  fill_target(s, arith::school_mul(a, b));
  return s;
}

Sample encode(const DomainSpec& spec, const OperandPair& pair) {
  Sample s = spec.op == Operation::add ? encode_add(pair.first, pair.second, spec.l)
                                       : encode_mul(pair.first, pair.second, spec.l);
  s.meta.l_s = spec.l_s;
  return s;
}

Digits decode_answer(const Sample& s) {
  const auto& lay = s.meta.layout;
  std::string text;
  for (int k = 0; k < lay.answer_len; ++k) {
    const int t = s.target[lay.answer_start + k];
    if (t == tok::kPad) {
      if (!text.empty()) throw std::invalid_argument("decode_answer: pad inside the answer digits");
      continue;
    }
    if (!tok::is_digit(t)) throw std::invalid_argument("decode_answer: non-digit token in answer region");
    text.push_back(static_cast<char>('0' + t));
  }
  if (text.empty()) throw std::invalid_argument("decode_answer: empty answer");
  return Digits::from_string(text);
}

Digits uniform_below_pow10(int num_digits, Rng& rng) {
  std::uniform_int_distribution<int> digit(0, 9);
  std::vector<std::uint8_t> d(static_cast<std::size_t>(num_digits));
  for (auto& v : d) v = static_cast<std::uint8_t>(digit(rng));
  return Digits::from_little_endian(std::move(d));
}

namespace {

Digits uniform_exact_len(int len, Rng& rng) {
  if (len <= 1) return uniform_below_pow10(1, rng);
  std::uniform_int_distribution<int> digit(0, 9), lead(1, 9);
  std::vector<std::uint8_t> d(static_cast<std::size_t>(len));
  for (int i = 0; i + 1 < len; ++i) d[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(digit(rng));
  d.back() = static_cast<std::uint8_t>(lead(rng));
  return Digits::from_little_endian(std::move(d));
}

Digits sample_multiplier(int len, Rng& rng) {
  if (len == 1) {
    std::uniform_int_distribution<int> d(1, 9);
    return Digits::from_uint(static_cast<std::uint64_t>(d(rng)));
  }
  return uniform_exact_len(len, rng);
}

bool sum_fits(const OperandPair& p, int l) {
  return static_cast<int>(arith::school_add(p.first, p.second).size()) <= l;
}

}  // namespace

OperandPair sample_pair(const DomainSpec& spec, Region region, Rng& rng) {
  const int ls = spec.l_s;
  auto longer_than_seen = [ls](const Digits& d) { return static_cast<int>(d.size()) > ls; };
  if (spec.op == Operation::mul) {
    Digits a = sample_multiplier(spec.multiplier_len, rng);
    switch (region) {
      case Region::seen: return {a, uniform_below_pow10(ls, rng)};
      case Region::all: return {a, uniform_below_pow10(spec.l, rng)};
      case Region::unseen: {
        Digits b = uniform_below_pow10(spec.l, rng);
        while (!longer_than_seen(b)) b = uniform_below_pow10(spec.l, rng);
        return {a, b};
      }
    }
  }
  switch (region) {
    case Region::seen: return {uniform_below_pow10(ls, rng), uniform_below_pow10(ls, rng)};
    case Region::all: return {uniform_below_pow10(spec.l, rng), uniform_below_pow10(spec.l, rng)};
    case Region::unseen:
      break;
  }
  for (;;) {
    OperandPair p{uniform_below_pow10(spec.l, rng), uniform_below_pow10(spec.l, rng)};
    if (longer_than_seen(p.first) || longer_than_seen(p.second)) return p;
  }
}

OperandPair sample_length(const DomainSpec& spec, int len, Rng& rng) {
  if (len < 1 || len > spec.l) throw std::invalid_argument("sample_length: length outside [1, l]");
  if (spec.op == Operation::mul) return {sample_multiplier(spec.multiplier_len, rng), uniform_exact_len(len, rng)};
  for (;;) {
    OperandPair p{uniform_below_pow10(len, rng), uniform_below_pow10(len, rng)};
    const bool exact = len == 1 || static_cast<int>(std::max(p.first.size(), p.second.size())) == len;
    if (exact && sum_fits(p, spec.l)) return p;
  }
}

int complexity_of(const DomainSpec& spec, const OperandPair& pair) {
  if (spec.op == Operation::add) return arith::cascade_length(pair.first.little_endian(), pair.second.little_endian());
  return arith::mul_complexity(pair.first, pair.second).dependency_levels;
}

OperandPair sample_by_complexity(const DomainSpec& spec, int target, Rng& rng, std::int64_t budget) {
  for (std::int64_t draw = 0; draw < budget; ++draw) {
    OperandPair p = sample_pair(spec, Region::seen, rng);
    if (complexity_of(spec, p) == target) return p;
  }
  throw RejectionBudgetExceeded("no pair with complexity " + std::to_string(target) + " within " +
                                std::to_string(budget) + " draws (l_s=" + std::to_string(spec.l_s) + ")");
}

std::vector<int> achievable_complexities(const DomainSpec& spec) {
  std::vector<int> out;
  if (spec.op == Operation::add) {
    // A carry chain needs its generating position plus 9-sums above it, all
    // inside l_s digits; 5+5 followed by 9-sums reaches every length.
    for (int c = 0; c <= spec.l_s; ++c) out.push_back(c);
    return out;
  }
  Rng pilot = make_rng(derive_seed(hash_tag("achievable"), static_cast<std::uint64_t>(spec.l_s * 16 + spec.multiplier_len)));
  std::set<int> seen;
  for (int k = 0; k < 100'000; ++k) seen.insert(complexity_of(spec, sample_pair(spec, Region::seen, pilot)));
  out.assign(seen.begin(), seen.end());
  return out;
}

OperandPair augment_zero_shift(const OperandPair& pair, int shift, int l, Operation op) {
  if (shift < 0) throw std::invalid_argument("augment_zero_shift: negative shift");
  const int la = static_cast<int>(pair.first.size());
  const int lb = static_cast<int>(pair.second.size());
  if (op == Operation::add && la + shift > l) throw std::invalid_argument("augment_zero_shift: first operand exceeds l");
  if (lb + shift > l) throw std::invalid_argument("augment_zero_shift: second operand exceeds l");
  if (op == Operation::mul) return {pair.first, pair.second.shifted(static_cast<std::size_t>(shift))};
  return {pair.first.shifted(static_cast<std::size_t>(shift)), pair.second.shifted(static_cast<std::size_t>(shift))};
}

std::vector<int> feasible_shifts(const DomainSpec& spec, const OperandPair& pair) {
  std::vector<int> out;
  const int la = static_cast<int>(pair.first.size());
  const int lb = static_cast<int>(pair.second.size());
  if (spec.op == Operation::add) {
    const int ls = static_cast<int>(arith::school_add(pair.first, pair.second).size());
    for (int s = 0; la + s <= spec.l && lb + s <= spec.l && ls + s <= spec.l; ++s) out.push_back(s);
  } else {
    for (int s = 0; lb + s <= spec.l; ++s) out.push_back(s);
  }
  return out;
}

Sample interleave_text(const Sample& sample, const TextNoiseSpec& noise, Rng& rng) {
  const auto& lay = sample.meta.layout;
  std::uniform_int_distribution<int> gap(0, noise.max_per_gap);
  std::uniform_int_distribution<int> word(tok::kFirstText, tok::kVocabSize - 1);
  const int g0 = gap(rng), g1 = gap(rng), g2 = gap(rng);

  Sample out;
  out.meta = sample.meta;
  auto& in = out.input;
  auto text = [&](int n) {
    for (int k = 0; k < n; ++k) in.push_back(word(rng));
  };
  text(g0);
  SequenceLayout nl = lay;
  nl.first_start = static_cast<int>(in.size());
  in.insert(in.end(), sample.input.begin() + lay.first_start, sample.input.begin() + lay.first_start + lay.first_len);
  nl.op_pos = static_cast<int>(in.size());
  in.push_back(sample.input[lay.op_pos]);
  text(g1);
  nl.second_start = static_cast<int>(in.size());
  in.insert(in.end(), sample.input.begin() + lay.second_start, sample.input.begin() + lay.second_start + lay.second_len);
  const int second_end = static_cast<int>(in.size());
  text(g2);

  if (static_cast<int>(in.size()) > noise.max_len) {
    throw std::length_error("interleave_text: sequence of " + std::to_string(in.size()) + " exceeds max length " +
                            std::to_string(noise.max_len));
  }
  nl.answer_start = second_end - lay.answer_len;
  if (nl.answer_start < 0) throw std::length_error("interleave_text: answer region starts before the sequence");
  out.meta.layout = nl;

  out.target.assign(in.size(), tok::kIgnore);
  out.mask.assign(in.size(), 0);
  for (int k = 0; k < lay.answer_len; ++k) {
    out.target[nl.answer_start + k] = sample.target[lay.answer_start + k];
    out.mask[nl.answer_start + k] = 1;
  }
  return out;
}

DatasetStream::DatasetStream(DomainSpec spec, SamplerSpec sampler, std::int64_t count, StreamOptions options)
    : spec_(spec), sampler_(sampler), count_(count), options_(std::move(options)) {
  spec_.validate();
  if (sampler_.kind != SamplerKind::uniform) achievable_ = achievable_complexities(spec_);
}

OperandPair DatasetStream::pair_at(std::int64_t index) const {
  Rng rng = make_rng(derive_seed(sampler_.seed, static_cast<std::uint64_t>(index)));
  bool by_complexity = sampler_.kind == SamplerKind::complexity_uniform;
  if (sampler_.kind == SamplerKind::mixture) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    by_complexity = coin(rng) < sampler_.mixture_p;
  }
  if (by_complexity) {
    std::uniform_int_distribution<std::size_t> pick(0, achievable_.size() - 1);
    return sample_by_complexity(spec_, achievable_[pick(rng)], rng);
  }
  for (;;) {
    OperandPair p = sample_pair(spec_, Region::seen, rng);
    if (spec_.op == Operation::mul || sum_fits(p, spec_.l)) return p;
  }
}

std::vector<Sample> DatasetStream::samples_at(std::int64_t index) const {
  const OperandPair base = pair_at(index);
  std::vector<int> shifts = options_.augment_shifts ? feasible_shifts(spec_, base) : std::vector<int>{0};
  std::vector<Sample> out;
  Rng text_rng = make_rng(derive_seed(sampler_.seed ^ hash_tag("text"), static_cast<std::uint64_t>(index)));
  for (int s : shifts) {
    Sample smp = encode(spec_, s == 0 ? base : augment_zero_shift(base, s, spec_.l, spec_.op));
    smp.meta.shift = s;
    if (options_.text) smp = interleave_text(smp, *options_.text, text_rng);
    out.push_back(std::move(smp));
  }
  return out;
}

std::optional<Sample> DatasetStream::next() {
  if (yielded_ >= count_) return std::nullopt;
  while (pending_.empty()) {
    pending_ = samples_at(index_++);
    std::reverse(pending_.begin(), pending_.end());
  }
  Sample s = std::move(pending_.back());
  pending_.pop_back();
  ++yielded_;
  return s;
}

void DatasetStream::reset() {
  index_ = 0;
  yielded_ = 0;
  pending_.clear();
}

std::vector<Sample> collect(DatasetStream& stream) {
  std::vector<Sample> out;
  while (auto s = stream.next()) out.push_back(std::move(*s));
  return out;
}

}  // namespace lengen::data

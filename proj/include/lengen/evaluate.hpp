#pragma once

#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "lengen/dataset_io.hpp"
#include "lengen/model.hpp"

namespace lengen::eval {

/// Maps a sample to a predicted token at every position.
using Predictor = std::function<std::vector<int>(const data::Sample&)>;

class VocabMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Tally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double rate() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

/// per_digit[k] scores the k-th supervised position counted from the
/// right end of the answer, so index 0 is the units digit.
struct EvalMetrics {
  Tally exact;
  std::vector<Tally> per_digit;
  std::map<int, Tally> by_complexity;
};

EvalMetrics evaluate(const Predictor& predict, std::span<const data::Sample> samples);

/// Evaluates a transformer; every token id must lie in the model's vocabulary.
EvalMetrics evaluate(const nn::Transformer& model, const nn::Parameters& params, std::span<const data::Sample> samples);

/// Same, additionally rejecting datasets whose token table differs from
/// the one this build uses.
EvalMetrics evaluate(const nn::Transformer& model, const nn::Parameters& params, const data::Dataset& dataset);

}  // namespace lengen::eval

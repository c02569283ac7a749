#include "lengen/evaluate.hpp"

#include <string>

#include "lengen/vocab.hpp"

namespace lengen::eval {

EvalMetrics evaluate(const Predictor& predict, std::span<const data::Sample> samples) {
  EvalMetrics m;
  for (const auto& s : samples) {
    const auto pred = predict(s);
    if (pred.size() != s.size()) throw std::invalid_argument("evaluate: prediction length differs from sample");
    bool all = true;
    std::size_t k = 0;
    for (std::size_t t = s.size(); t-- > 0;) {
      if (!s.mask[t]) continue;
      if (m.per_digit.size() <= k) m.per_digit.resize(k + 1);
      const bool ok = pred[t] == s.target[t];
      m.per_digit[k].correct += ok;
      ++m.per_digit[k].total;
      all = all && ok;
      ++k;
    }
    m.exact.correct += all;
    ++m.exact.total;
    auto& bucket = m.by_complexity[s.meta.complexity];
    bucket.correct += all;
    ++bucket.total;
  }
  return m;
}

EvalMetrics evaluate(const nn::Transformer& model, const nn::Parameters& params,
                     std::span<const data::Sample> samples) {
  const int V = model.config().vocab;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t t = 0; t < samples[i].size(); ++t) {
      const int in = samples[i].input[t];
      const int tg = samples[i].target[t];
      if (in < 0 || in >= V || (samples[i].mask[t] && (tg < 0 || tg >= V))) {
        throw VocabMismatch("sample " + std::to_string(i) + " uses token ids outside the model vocabulary of " +
                            std::to_string(V));
      }
    }
  }
  return evaluate([&](const data::Sample& s) { return nn::predict(model, params, s); }, samples);
}

EvalMetrics evaluate(const nn::Transformer& model, const nn::Parameters& params, const data::Dataset& dataset) {
  if (dataset.header.vocab != data::vocab_table()) {
    throw VocabMismatch("dataset token table differs from this build's vocabulary");
  }
  if (static_cast<int>(dataset.header.vocab.size()) != model.config().vocab) {
    throw VocabMismatch("dataset vocabulary size " + std::to_string(dataset.header.vocab.size()) +
                        " differs from the model's " + std::to_string(model.config().vocab));
  }
  return evaluate(model, params, std::span<const data::Sample>(dataset.samples));
}

}  // namespace lengen::eval

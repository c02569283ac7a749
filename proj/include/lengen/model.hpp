#pragma once

// Toy encoder-only transformer with per-position classification and
// hand-written reverse-mode gradients. Pre-layer-norm residual blocks;
// pairwise positional vectors are added to attention keys.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lengen/datagen.hpp"
#include "lengen/posenc.hpp"
#include "lengen/rng.hpp"

namespace lengen::nn {

struct ModelConfig {
  int layers = 2;
  int heads = 4;
  int d_model = 64;
  int d_ff = 256;
  int vocab = data::tok::kVocabSize;
  int max_len = 64;
  pe::PEScheme scheme;
  double dropout = 0.0;
  bool per_layer_pe = false;
  double pe_init_std = 0.1;  // pairwise slot tables only

  int head_dim() const { return d_model / heads; }
  void validate() const;
};

/// Named tensor inside the flat parameter vector.
struct TensorSpec {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

class ParameterLayout {
 public:
  explicit ParameterLayout(const ModelConfig& cfg);

  const std::vector<TensorSpec>& tensors() const { return tensors_; }
  const TensorSpec& find(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t total() const { return total_; }
  /// "layer0.wq[17]" style path of a flat index.
  std::string path_of(std::size_t flat_index) const;

 private:
  void add(std::string name, int rows, int cols);
  std::vector<TensorSpec> tensors_;
  std::size_t total_ = 0;
};

struct Parameters {
  std::vector<double> values;

  std::span<double> tensor(const ParameterLayout& layout, const std::string& name) {
    const auto& t = layout.find(name);
    return std::span<double>(values).subspan(t.offset, t.size());
  }
  std::span<const double> tensor(const ParameterLayout& layout, const std::string& name) const {
    const auto& t = layout.find(name);
    return std::span<const double>(values).subspan(t.offset, t.size());
  }
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LayerTrace;

/// Everything backward() needs from one forward pass over one sequence.
struct ForwardTrace {
  ForwardTrace();
  ~ForwardTrace();
  ForwardTrace(ForwardTrace&&) noexcept;
  ForwardTrace& operator=(ForwardTrace&&) noexcept;

  int seq_len = 0;
  std::vector<int> tokens;
  std::vector<int> slots;
  std::vector<double> embed_mask;
  std::vector<LayerTrace> layers;
  std::vector<double> final_in, final_xhat, final_rstd, final_out;

  /// Attention probabilities of (layer, head) as seq_len x seq_len.
  std::span<const double> attention(int layer, int head) const;
};

class Transformer {
 public:
  explicit Transformer(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  const ParameterLayout& layout() const { return layout_; }

  Parameters init(std::uint64_t seed) const;

  /// Per-position logits, seq_len x vocab row-major. Throws
  /// std::length_error past max_len and std::invalid_argument for token ids
  /// outside the vocabulary. Dropout is applied only when `dropout_rng` is set.
  std::vector<double> forward(const Parameters& params, std::span<const int> tokens,
                              const data::SequenceLayout& layout, ForwardTrace* trace = nullptr,
                              Rng* dropout_rng = nullptr) const;

  /// Accumulates dLoss/dparams into `grad` given dLoss/dlogits.
  void backward(const Parameters& params, const ForwardTrace& trace, std::span<const double> d_logits,
                std::span<double> grad) const;

  /// Slot table used by `layer` (the shared one unless per-layer tables).
  std::string slot_table_name(int layer) const;

 private:
  ModelConfig cfg_;
  ParameterLayout layout_;
};

struct LossResult {
  double loss = 0.0;
  std::size_t supervised = 0;
};

/// Cross-entropy summed over mask-true positions (divided by `normaliser`
/// when one is given, else by their count). Writes dLoss/dlogits into
/// d_logits when non-empty. Throws std::invalid_argument for an empty mask.
LossResult loss_masked_ce(std::span<const double> logits, int vocab, std::span<const int> target,
                          std::span<const std::uint8_t> mask, std::span<double> d_logits = {},
                          double normaliser = 0.0);

struct BatchGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean masked cross-entropy over every supervised position of the batch and
/// its gradient. Throws NonFiniteGradient naming the first bad parameter.
BatchGrad compute_grad(const Transformer& model, const Parameters& params, std::span<const data::Sample> batch,
                       Rng* dropout_rng = nullptr);

double batch_loss(const Transformer& model, const Parameters& params, std::span<const data::Sample> batch);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // parameter path with the largest error
  std::size_t checked = 0;
};

/// Central finite differences of batch_loss against compute_grad over every
/// parameter. The error is |g - fd| / max(|g|, |fd|), except where both are
/// below abs_tol: there it is 0 if they also agree to abs_tol, else 1.
GradCheckReport gradient_check(const Transformer& model, const Parameters& params,
                               std::span<const data::Sample> batch, double h = 1e-5, double abs_tol = 1e-6);

/// Argmax prediction at every position.
std::vector<int> predict(const Transformer& model, const Parameters& params, const data::Sample& sample);

}  // namespace lengen::nn

#include "lengen/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

namespace lengen::nn {

namespace {

constexpr double kLnEps = 1e-5;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// Y[n x out] = X[n x in] * W[in x out] + b
void linear(std::span<const double> x, int n, int in, std::span<const double> w, std::span<const double> b, int out,
            std::vector<double>& y) {
  y.resize(static_cast<std::size_t>(n) * out);
  MutMap Y(y.data(), n, out);
  Y.noalias() = ConstMap(x.data(), n, in) * ConstMap(w.data(), in, out);
  Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data(), out);
}

void linear_backward(std::span<const double> dy, std::span<const double> x, int n, int in,
                     std::span<const double> w, int out, std::span<double> dx, std::span<double> dw,
                     std::span<double> db) {
  const ConstMap DY(dy.data(), n, out);
  for (int r = 0; r < n; ++r) {
    const double* row = dy.data() + static_cast<std::size_t>(r) * out;
    for (int c = 0; c < out; ++c) db[c] += row[c];
  }
  MutMap(dw.data(), in, out).noalias() += ConstMap(x.data(), n, in).transpose() * DY;
  if (!dx.empty()) MutMap(dx.data(), n, in).noalias() += DY * ConstMap(w.data(), in, out).transpose();
}

void layer_norm(std::span<const double> x, int n, int d, std::span<const double> g, std::span<const double> b,
                std::vector<double>& xhat, std::vector<double>& rstd, std::vector<double>& y) {
  xhat.resize(static_cast<std::size_t>(n) * d);
  y.resize(static_cast<std::size_t>(n) * d);
  rstd.resize(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    const double* xr = x.data() + static_cast<std::size_t>(r) * d;
    double mean = 0.0;
    for (int c = 0; c < d; ++c) mean += xr[c];
    mean /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= d;
    const double rs = 1.0 / std::sqrt(var + kLnEps);
    rstd[r] = rs;
    for (int c = 0; c < d; ++c) {
      const std::size_t idx = static_cast<std::size_t>(r) * d + c;
      xhat[idx] = (xr[c] - mean) * rs;
      y[idx] = xhat[idx] * g[c] + b[c];
    }
  }
}

void layer_norm_backward(std::span<const double> dy, std::span<const double> xhat, std::span<const double> rstd,
                         int n, int d, std::span<const double> g, std::span<double> dx, std::span<double> dg,
                         std::span<double> db) {
  std::vector<double> dxhat(static_cast<std::size_t>(d));
  for (int r = 0; r < n; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * d;
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (int c = 0; c < d; ++c) {
      dg[c] += dy[base + c] * xhat[base + c];
      db[c] += dy[base + c];
      dxhat[c] = dy[base + c] * g[c];
      mean_dxhat += dxhat[c];
      mean_dxhat_xhat += dxhat[c] * xhat[base + c];
    }
    mean_dxhat /= d;
    mean_dxhat_xhat /= d;
    for (int c = 0; c < d; ++c) dx[base + c] += rstd[r] * (dxhat[c] - mean_dxhat - xhat[base + c] * mean_dxhat_xhat);
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014327;
  return cdf + x * pdf;
}

std::vector<double> dropout_mask(std::size_t n, double rate, Rng* rng) {
  std::vector<double> mask(n, 1.0);
  if (rng == nullptr || rate <= 0.0) return mask;
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (auto& m : mask) m = keep(*rng) ? scale : 0.0;
  return mask;
}

std::string lname(int layer, const char* suffix) { return "layer" + std::to_string(layer) + "." + suffix; }

}  // namespace

struct LayerTrace {
  std::vector<double> x_in, ln1_xhat, ln1_rstd, h1;
  std::vector<double> q, k, v;          // heads x T x hd, head-major
  std::vector<double> probs;            // heads x T x T
  std::vector<double> concat, attn_mask;
  std::vector<double> x_mid, ln2_xhat, ln2_rstd, h2;
  std::vector<double> u, g, ffn_mask;
};

ForwardTrace::ForwardTrace() = default;
ForwardTrace::~ForwardTrace() = default;
ForwardTrace::ForwardTrace(ForwardTrace&&) noexcept = default;
ForwardTrace& ForwardTrace::operator=(ForwardTrace&&) noexcept = default;

std::span<const double> ForwardTrace::attention(int layer, int head) const {
  const auto tt = static_cast<std::size_t>(seq_len) * seq_len;
  return std::span<const double>(layers.at(static_cast<std::size_t>(layer)).probs).subspan(head * tt, tt);
}

void ModelConfig::validate() const {
  if (layers < 1 || heads < 1 || d_model < 1 || d_ff < 1 || vocab < 1 || max_len < 1) {
    throw std::invalid_argument("ModelConfig: sizes must be positive");
  }
  if (d_model % heads != 0) throw std::invalid_argument("ModelConfig: d_model must be divisible by heads");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("ModelConfig: dropout must be in [0,1)");
  if (scheme.is_pairwise() && scheme.slot_dim != head_dim()) {
    throw std::invalid_argument("ModelConfig: pairwise slot_dim must equal d_model / heads");
  }
  if (scheme.is_absolute() && std::get<pe::APE>(scheme.policy).max_len < max_len) {
    throw std::invalid_argument("ModelConfig: APE table shorter than max_len");
  }
}

ParameterLayout::ParameterLayout(const ModelConfig& cfg) {
  cfg.validate();
  const int d = cfg.d_model;
  add("tok_emb", cfg.vocab, d);
  if (cfg.scheme.is_absolute()) add("ape", std::get<pe::APE>(cfg.scheme.policy).max_len, d);
  if (cfg.scheme.is_pairwise()) {
    const int slots = pe::slot_count(cfg.scheme);
    if (cfg.per_layer_pe) {
      for (int l = 0; l < cfg.layers; ++l) add("pe." + std::to_string(l), slots, cfg.head_dim());
    } else {
      add("pe", slots, cfg.head_dim());
    }
  }
  for (int l = 0; l < cfg.layers; ++l) {
    add(lname(l, "ln1.g"), 1, d);
    add(lname(l, "ln1.b"), 1, d);
    add(lname(l, "wq"), d, d);
    add(lname(l, "bq"), 1, d);
    add(lname(l, "wk"), d, d);
    add(lname(l, "bk"), 1, d);
    add(lname(l, "wv"), d, d);
    add(lname(l, "bv"), 1, d);
    add(lname(l, "wo"), d, d);
    add(lname(l, "bo"), 1, d);
    add(lname(l, "ln2.g"), 1, d);
    add(lname(l, "ln2.b"), 1, d);
    add(lname(l, "w1"), d, cfg.d_ff);
    add(lname(l, "b1"), 1, cfg.d_ff);
    add(lname(l, "w2"), cfg.d_ff, d);
    add(lname(l, "b2"), 1, d);
  }
  add("lnf.g", 1, d);
  add("lnf.b", 1, d);
  add("head.w", d, cfg.vocab);
  add("head.b", 1, cfg.vocab);
}

void ParameterLayout::add(std::string name, int rows, int cols) {
  tensors_.push_back({std::move(name), total_, rows, cols});
  total_ += tensors_.back().size();
}

const TensorSpec& ParameterLayout::find(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw std::out_of_range("no parameter tensor named '" + name + "'");
}

bool ParameterLayout::contains(const std::string& name) const {
  return std::any_of(tensors_.begin(), tensors_.end(), [&](const TensorSpec& t) { return t.name == name; });
}

std::string ParameterLayout::path_of(std::size_t flat_index) const {
  for (const auto& t : tensors_) {
    if (flat_index >= t.offset && flat_index < t.offset + t.size()) {
      return t.name + "[" + std::to_string(flat_index - t.offset) + "]";
    }
  }
  return "<out of range>";
}

Transformer::Transformer(ModelConfig cfg) : cfg_(std::move(cfg)), layout_(cfg_) {}

std::string Transformer::slot_table_name(int layer) const {
  return cfg_.per_layer_pe ? "pe." + std::to_string(layer) : "pe";
}

Parameters Transformer::init(std::uint64_t seed) const {
  Parameters p;
  p.values.assign(layout_.total(), 0.0);
  Rng rng = make_rng(seed);
  for (const auto& t : layout_.tensors()) {
    auto span = p.tensor(layout_, t.name);
    const std::string& n = t.name;
    const bool gain = n.ends_with(".g");
    const bool bias = n.ends_with(".b") || n.ends_with("bq") || n.ends_with("bk") || n.ends_with("bv") ||
                      n.ends_with("bo") || n.ends_with("b1") || n.ends_with("b2");
    if (gain) {
      std::fill(span.begin(), span.end(), 1.0);
      continue;
    }
    if (bias) continue;
    double std = 1.0 / std::sqrt(static_cast<double>(t.rows));
    if (n == "tok_emb" || n == "ape") std = 1.0;
    if (n.starts_with("pe")) std = cfg_.pe_init_std;
    std::normal_distribution<double> dist(0.0, std);
    for (auto& v : span) v = dist(rng);
  }
  return p;
}

std::vector<double> Transformer::forward(const Parameters& params, std::span<const int> tokens,
                                         const data::SequenceLayout& seq_layout, ForwardTrace* trace,
                                         Rng* dropout_rng) const {
  const int T = static_cast<int>(tokens.size());
  const int d = cfg_.d_model;
  const int H = cfg_.heads;
  const int hd = cfg_.head_dim();
  const int ff = cfg_.d_ff;
  if (T > cfg_.max_len) {
    throw std::length_error("forward: sequence of " + std::to_string(T) + " exceeds max_len " +
                            std::to_string(cfg_.max_len));
  }
  if (T == 0) throw std::invalid_argument("forward: empty sequence");

  ForwardTrace local;
  ForwardTrace& tr = trace ? *trace : local;
  tr.seq_len = T;
  tr.tokens.assign(tokens.begin(), tokens.end());
  tr.slots = pe::slot_matrix(cfg_.scheme, T, seq_layout);
  tr.layers.assign(static_cast<std::size_t>(cfg_.layers), LayerTrace{});

  const auto P = [&](const std::string& name) { return params.tensor(layout_, name); };
  const std::size_t Td = static_cast<std::size_t>(T) * d;

  std::vector<double> x(Td);
  {
    auto emb = P("tok_emb");
    for (int t = 0; t < T; ++t) {
      const int id = tokens[t];
      if (id < 0 || id >= cfg_.vocab) throw std::invalid_argument("forward: token id outside vocabulary");
      std::copy_n(emb.begin() + static_cast<std::ptrdiff_t>(id) * d, d, x.begin() + static_cast<std::ptrdiff_t>(t) * d);
    }
    if (cfg_.scheme.is_absolute()) {
      const auto& ape = layout_.find("ape");
      pe::TableView view{P("ape"), ape.rows, ape.cols};
      for (int t = 0; t < T; ++t) {
        auto pv = pe::ape_vector(view, t);
        for (int c = 0; c < d; ++c) x[static_cast<std::size_t>(t) * d + c] += pv[c];
      }
    }
    tr.embed_mask = dropout_mask(Td, cfg_.dropout, dropout_rng);
    for (std::size_t i = 0; i < Td; ++i) x[i] *= tr.embed_mask[i];
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const std::size_t Thd = static_cast<std::size_t>(T) * hd;
  const std::size_t TT = static_cast<std::size_t>(T) * T;
  std::vector<double> Q, K, V, tmp;

  for (int l = 0; l < cfg_.layers; ++l) {
    LayerTrace& L = tr.layers[static_cast<std::size_t>(l)];
    L.x_in = x;
    layer_norm(x, T, d, P(lname(l, "ln1.g")), P(lname(l, "ln1.b")), L.ln1_xhat, L.ln1_rstd, L.h1);
    linear(L.h1, T, d, P(lname(l, "wq")), P(lname(l, "bq")), d, Q);
    linear(L.h1, T, d, P(lname(l, "wk")), P(lname(l, "bk")), d, K);
    linear(L.h1, T, d, P(lname(l, "wv")), P(lname(l, "bv")), d, V);

    L.q.assign(H * Thd, 0.0);
    L.k.assign(H * Thd, 0.0);
    L.v.assign(H * Thd, 0.0);
    for (int h = 0; h < H; ++h) {
      for (int t = 0; t < T; ++t) {
        for (int c = 0; c < hd; ++c) {
          const std::size_t src = static_cast<std::size_t>(t) * d + h * hd + c;
          const std::size_t dst = h * Thd + static_cast<std::size_t>(t) * hd + c;
          L.q[dst] = Q[src];
          L.k[dst] = K[src];
          L.v[dst] = V[src];
        }
      }
    }

    pe::TableView table{};
    if (cfg_.scheme.is_pairwise()) {
      const auto& spec = layout_.find(slot_table_name(l));
      table = {P(spec.name), spec.rows, spec.cols};
    }
    L.probs.assign(H * TT, 0.0);
    L.concat.assign(Td, 0.0);
    for (int h = 0; h < H; ++h) {
      std::span<double> probs(L.probs.data() + h * TT, TT);
      pe::attention_scores(std::span<const double>(L.q).subspan(h * Thd, Thd),
                           std::span<const double>(L.k).subspan(h * Thd, Thd), T, hd, tr.slots, table, scale, probs);
      for (int i = 0; i < T; ++i) {
        double* row = probs.data() + static_cast<std::size_t>(i) * T;
        const double mx = *std::max_element(row, row + T);
        double sum = 0.0;
        for (int j = 0; j < T; ++j) {
          row[j] = std::exp(row[j] - mx);
          sum += row[j];
        }
        for (int j = 0; j < T; ++j) row[j] /= sum;
        for (int j = 0; j < T; ++j) {
          const double a = row[j];
          const double* vj = L.v.data() + h * Thd + static_cast<std::size_t>(j) * hd;
          double* out = L.concat.data() + static_cast<std::size_t>(i) * d + h * hd;
          for (int c = 0; c < hd; ++c) out[c] += a * vj[c];
        }
      }
    }
    linear(L.concat, T, d, P(lname(l, "wo")), P(lname(l, "bo")), d, tmp);
    L.attn_mask = dropout_mask(Td, cfg_.dropout, dropout_rng);
    for (std::size_t i = 0; i < Td; ++i) x[i] += tmp[i] * L.attn_mask[i];

    L.x_mid = x;
    layer_norm(x, T, d, P(lname(l, "ln2.g")), P(lname(l, "ln2.b")), L.ln2_xhat, L.ln2_rstd, L.h2);
    linear(L.h2, T, d, P(lname(l, "w1")), P(lname(l, "b1")), ff, L.u);
    L.g.resize(L.u.size());
    for (std::size_t i = 0; i < L.u.size(); ++i) L.g[i] = gelu(L.u[i]);
    linear(L.g, T, ff, P(lname(l, "w2")), P(lname(l, "b2")), d, tmp);
    L.ffn_mask = dropout_mask(Td, cfg_.dropout, dropout_rng);
    for (std::size_t i = 0; i < Td; ++i) x[i] += tmp[i] * L.ffn_mask[i];
  }

  tr.final_in = x;
  layer_norm(x, T, d, P("lnf.g"), P("lnf.b"), tr.final_xhat, tr.final_rstd, tr.final_out);
  std::vector<double> logits;
  linear(tr.final_out, T, d, P("head.w"), P("head.b"), cfg_.vocab, logits);
  return logits;
}

void Transformer::backward(const Parameters& params, const ForwardTrace& tr, std::span<const double> d_logits,
                           std::span<double> grad) const {
  const int T = tr.seq_len;
  const int d = cfg_.d_model;
  const int H = cfg_.heads;
  const int hd = cfg_.head_dim();
  const int ff = cfg_.d_ff;
  const std::size_t Td = static_cast<std::size_t>(T) * d;
  const std::size_t Thd = static_cast<std::size_t>(T) * hd;
  const std::size_t TT = static_cast<std::size_t>(T) * T;

  const auto P = [&](const std::string& name) { return params.tensor(layout_, name); };
  const auto G = [&](const std::string& name) {
    const auto& t = layout_.find(name);
    return grad.subspan(t.offset, t.size());
  };

  std::vector<double> dfinal(Td, 0.0);
  linear_backward(d_logits, tr.final_out, T, d, P("head.w"), cfg_.vocab, dfinal, G("head.w"), G("head.b"));
  std::vector<double> dx(Td, 0.0);
  layer_norm_backward(dfinal, tr.final_xhat, tr.final_rstd, T, d, P("lnf.g"), dx, G("lnf.g"), G("lnf.b"));

  std::vector<double> dtmp, dh, du, dconcat, dq, dk, dv, dprobs(TT);
  for (int l = cfg_.layers - 1; l >= 0; --l) {
    const LayerTrace& L = tr.layers[static_cast<std::size_t>(l)];

    // Feed-forward branch: x_out = x_mid + dropout(W2 gelu(W1 ln2(x_mid)))
    dtmp.assign(Td, 0.0);
    for (std::size_t i = 0; i < Td; ++i) dtmp[i] = dx[i] * L.ffn_mask[i];
    std::vector<double> dg(static_cast<std::size_t>(T) * ff, 0.0);
    linear_backward(dtmp, L.g, T, ff, P(lname(l, "w2")), d, dg, G(lname(l, "w2")), G(lname(l, "b2")));
    du.assign(dg.size(), 0.0);
    for (std::size_t i = 0; i < dg.size(); ++i) du[i] = dg[i] * gelu_grad(L.u[i]);
    dh.assign(Td, 0.0);
    linear_backward(du, L.h2, T, d, P(lname(l, "w1")), ff, dh, G(lname(l, "w1")), G(lname(l, "b1")));
    layer_norm_backward(dh, L.ln2_xhat, L.ln2_rstd, T, d, P(lname(l, "ln2.g")), dx, G(lname(l, "ln2.g")),
                        G(lname(l, "ln2.b")));

    // Attention branch: x_mid = x_in + dropout(Wo concat_h(softmax(S_h) V_h))
    dtmp.assign(Td, 0.0);
    for (std::size_t i = 0; i < Td; ++i) dtmp[i] = dx[i] * L.attn_mask[i];
    dconcat.assign(Td, 0.0);
    linear_backward(dtmp, L.concat, T, d, P(lname(l, "wo")), d, dconcat, G(lname(l, "wo")), G(lname(l, "bo")));

    pe::TableView table{};
    std::span<double> dtable;
    if (cfg_.scheme.is_pairwise()) {
      const auto& spec = layout_.find(slot_table_name(l));
      table = {P(spec.name), spec.rows, spec.cols};
      dtable = G(spec.name);
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    dq.assign(H * Thd, 0.0);
    dk.assign(H * Thd, 0.0);
    dv.assign(H * Thd, 0.0);
    for (int h = 0; h < H; ++h) {
      const double* probs = L.probs.data() + h * TT;
      for (int i = 0; i < T; ++i) {
        const double* dout = dconcat.data() + static_cast<std::size_t>(i) * d + h * hd;
        double dot = 0.0;
        for (int j = 0; j < T; ++j) {
          const double* vj = L.v.data() + h * Thd + static_cast<std::size_t>(j) * hd;
          double* dvj = dv.data() + h * Thd + static_cast<std::size_t>(j) * hd;
          const double a = probs[static_cast<std::size_t>(i) * T + j];
          double dp = 0.0;
          for (int c = 0; c < hd; ++c) {
            dp += dout[c] * vj[c];
            dvj[c] += a * dout[c];
          }
          dprobs[static_cast<std::size_t>(i) * T + j] = dp;
          dot += a * dp;
        }
        for (int j = 0; j < T; ++j) {
          const std::size_t ij = static_cast<std::size_t>(i) * T + j;
          dprobs[ij] = probs[ij] * (dprobs[ij] - dot);
        }
      }
      pe::attention_scores_backward(dprobs, std::span<const double>(L.q).subspan(h * Thd, Thd),
                                    std::span<const double>(L.k).subspan(h * Thd, Thd), T, hd, tr.slots, table,
                                    scale, std::span<double>(dq).subspan(h * Thd, Thd),
                                    std::span<double>(dk).subspan(h * Thd, Thd), dtable);
    }
    std::vector<double> dQ(Td), dK(Td), dV(Td);
    for (int h = 0; h < H; ++h) {
      for (int t = 0; t < T; ++t) {
        for (int c = 0; c < hd; ++c) {
          const std::size_t dst = static_cast<std::size_t>(t) * d + h * hd + c;
          const std::size_t src = h * Thd + static_cast<std::size_t>(t) * hd + c;
          dQ[dst] = dq[src];
          dK[dst] = dk[src];
          dV[dst] = dv[src];
        }
      }
    }
    dh.assign(Td, 0.0);
    linear_backward(dQ, L.h1, T, d, P(lname(l, "wq")), d, dh, G(lname(l, "wq")), G(lname(l, "bq")));
    linear_backward(dK, L.h1, T, d, P(lname(l, "wk")), d, dh, G(lname(l, "wk")), G(lname(l, "bk")));
    linear_backward(dV, L.h1, T, d, P(lname(l, "wv")), d, dh, G(lname(l, "wv")), G(lname(l, "bv")));
    layer_norm_backward(dh, L.ln1_xhat, L.ln1_rstd, T, d, P(lname(l, "ln1.g")), dx, G(lname(l, "ln1.g")),
                        G(lname(l, "ln1.b")));
  }

  for (std::size_t i = 0; i < Td; ++i) dx[i] *= tr.embed_mask[i];
  auto demb = G("tok_emb");
  for (int t = 0; t < T; ++t) {
    const int id = tr.tokens[static_cast<std::size_t>(t)];
    for (int c = 0; c < d; ++c) demb[static_cast<std::size_t>(id) * d + c] += dx[static_cast<std::size_t>(t) * d + c];
  }
  if (cfg_.scheme.is_absolute()) {
    auto dape = G("ape");
    for (std::size_t i = 0; i < Td; ++i) dape[i] += dx[i];
  }
}

LossResult loss_masked_ce(std::span<const double> logits, int vocab, std::span<const int> target,
                          std::span<const std::uint8_t> mask, std::span<double> d_logits, double normaliser) {
  const std::size_t T = target.size();
  if (mask.size() != T || logits.size() != T * static_cast<std::size_t>(vocab)) {
    throw std::invalid_argument("loss_masked_ce: shape mismatch");
  }
  const std::size_t count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  if (count == 0) throw std::invalid_argument("loss_masked_ce: empty mask");
  const double norm = normaliser > 0.0 ? normaliser : static_cast<double>(count);

  LossResult r;
  r.supervised = count;
  for (std::size_t t = 0; t < T; ++t) {
    if (!mask[t]) continue;
    const double* row = logits.data() + t * vocab;
    const double mx = *std::max_element(row, row + vocab);
    double sum = 0.0;
    for (int c = 0; c < vocab; ++c) sum += std::exp(row[c] - mx);
    const double lse = mx + std::log(sum);
    const int y = target[t];
    if (y < 0 || y >= vocab) throw std::invalid_argument("loss_masked_ce: target id outside vocabulary");
    r.loss += (lse - row[y]) / norm;
    if (!d_logits.empty()) {
      double* drow = d_logits.data() + t * vocab;
      for (int c = 0; c < vocab; ++c) drow[c] += std::exp(row[c] - lse) / norm;
      drow[y] -= 1.0 / norm;
    }
  }
  return r;
}

BatchGrad compute_grad(const Transformer& model, const Parameters& params, std::span<const data::Sample> batch,
                       Rng* dropout_rng) {
  if (batch.empty()) throw std::invalid_argument("compute_grad: empty batch");
  double total_supervised = 0.0;
  for (const auto& s : batch) total_supervised += static_cast<double>(std::count(s.mask.begin(), s.mask.end(), 1));
  BatchGrad out;
  out.grad.assign(model.layout().total(), 0.0);
  const int V = model.config().vocab;
  ForwardTrace trace;
  std::vector<double> dlogits;
  for (const auto& s : batch) {
    auto logits = model.forward(params, s.input, s.meta.layout, &trace, dropout_rng);
    dlogits.assign(logits.size(), 0.0);
    out.loss += loss_masked_ce(logits, V, s.target, s.mask, dlogits, total_supervised).loss;
    model.backward(params, trace, dlogits, out.grad);
  }
  for (std::size_t i = 0; i < out.grad.size(); ++i) {
    if (!std::isfinite(out.grad[i])) {
      throw NonFiniteGradient("non-finite gradient at " + model.layout().path_of(i));
    }
  }
  return out;
}

double batch_loss(const Transformer& model, const Parameters& params, std::span<const data::Sample> batch) {
  double total_supervised = 0.0;
  for (const auto& s : batch) total_supervised += static_cast<double>(std::count(s.mask.begin(), s.mask.end(), 1));
  double loss = 0.0;
  for (const auto& s : batch) {
    auto logits = model.forward(params, s.input, s.meta.layout);
    loss += loss_masked_ce(logits, model.config().vocab, s.target, s.mask, {}, total_supervised).loss;
  }
  return loss;
}

GradCheckReport gradient_check(const Transformer& model, const Parameters& params,
                               std::span<const data::Sample> batch, double h, double abs_tol) {
  const auto analytic = compute_grad(model, params, batch).grad;
  Parameters p = params;
  GradCheckReport r;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double orig = p.values[i];
    p.values[i] = orig + h;
    const double fp = batch_loss(model, p, batch);
    p.values[i] = orig - h;
    const double fm = batch_loss(model, p, batch);
    p.values[i] = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double diff = std::abs(analytic[i] - fd);
    const double mag = std::max(std::abs(analytic[i]), std::abs(fd));
    const double err = mag <= abs_tol ? (diff <= abs_tol ? 0.0 : 1.0) : diff / mag;
    if (err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst = model.layout().path_of(i);
    }
    ++r.checked;
  }
  return r;
}

std::vector<int> predict(const Transformer& model, const Parameters& params, const data::Sample& sample) {
  auto logits = model.forward(params, sample.input, sample.meta.layout);
  const int V = model.config().vocab;
  std::vector<int> out(sample.size());
  for (std::size_t t = 0; t < sample.size(); ++t) {
    const double* row = logits.data() + t * V;
    out[t] = static_cast<int>(std::max_element(row, row + V) - row);
  }
  return out;
}

}  // namespace lengen::nn

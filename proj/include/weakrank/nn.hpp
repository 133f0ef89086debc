#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "weakrank/corpus.hpp"
#include "weakrank/rng.hpp"

namespace weakrank {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Activation { linear, relu, tanh_fn, sigmoid };

inline Vec activate(Activation act, const Vec& pre) {
  switch (act) {
    case Activation::linear:
      return pre;
    case Activation::relu:
      return pre.cwiseMax(0.0);
    case Activation::tanh_fn:
      return pre.array().tanh().matrix();
    case Activation::sigmoid:
      return (1.0 / (1.0 + (-pre.array()).exp())).matrix();
  }
  throw std::logic_error("unreachable");
}

// Derivative of the activation w.r.t. its pre-activation input.
inline Vec activation_grad(Activation act, const Vec& pre) {
  switch (act) {
    case Activation::linear:
      return Vec::Ones(pre.size());
    case Activation::relu:
      return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::tanh_fn: {
      Vec t = pre.array().tanh().matrix();
      return (1.0 - t.array().square()).matrix();
    }
    case Activation::sigmoid: {
      Vec s = (1.0 / (1.0 + (-pre.array()).exp())).matrix();
      return (s.array() * (1.0 - s.array())).matrix();
    }
  }
  throw std::logic_error("unreachable");
}

struct DenseLayer {
  Mat W;  // out x in
  Vec b;
  Activation act = Activation::relu;
};

// Sorted (index, value) pairs standing in for a mostly-zero input vector.
struct SparseVec {
  std::size_t dim = 0;
  std::vector<std::pair<std::uint32_t, double>> nz;
};

struct NetInput {
  const Vec* dense = nullptr;
  const SparseVec* sparse = nullptr;

  std::size_t dim() const { return dense ? static_cast<std::size_t>(dense->size()) : sparse->dim; }
};

struct ForwardCache {
  std::uint64_t params_version = 0;
  bool train_mode = false;
  bool sparse_input = false;
  Vec input_dense;
  SparseVec input_sparse;
  std::vector<Vec> pre;       // per layer
  std::vector<Vec> act_out;   // activation output before dropout
  std::vector<Vec> fed;       // what the next layer consumed (after dropout)
  std::vector<Vec> mask;      // dropout scale per unit; empty when not dropped
};

struct LayerGrads {
  std::vector<Mat> dW;
  std::vector<Vec> db;
};

// Plain fully-connected stack: ReLU hidden layers and a single-unit output
// layer whose activation is chosen by the ranking architecture. Dropout uses
// the inverted convention: surviving units are scaled by 1/(1-rate) during
// training so inference needs no rescaling.
class FeedForward {
 public:
  std::vector<DenseLayer> layers;
  std::uint64_t version = 1;  // bumped on every parameter mutation

  std::size_t input_dim() const { return static_cast<std::size_t>(layers.front().W.cols()); }

  double forward(const NetInput& x, bool train, double dropout_rate, Rng* rng,
                 ForwardCache* cache) const {
    if (layers.empty()) throw std::logic_error("forward: empty network");
    if (x.dim() != input_dim())
      throw std::invalid_argument("forward: input length " + std::to_string(x.dim()) +
                                  " does not match first layer " +
                                  std::to_string(input_dim()));
    if (train && dropout_rate > 0.0 && rng == nullptr)
      throw std::invalid_argument("forward: dropout in train mode needs an rng");

    const std::size_t L = layers.size();
    std::vector<Vec> pre(L), act_out(L), fed(L), mask;
    const bool dropping = train && dropout_rate > 0.0;
    if (dropping) mask.resize(L);

    for (std::size_t i = 0; i < L; ++i) {
      const DenseLayer& layer = layers[i];
      if (i == 0) {
        pre[0] = layer.b;
        if (x.sparse) {
          for (const auto& [idx, v] : x.sparse->nz) pre[0] += layer.W.col(idx) * v;
        } else {
          pre[0] += layer.W * (*x.dense);
        }
      } else {
        pre[i] = layer.W * fed[i - 1] + layer.b;
      }
      act_out[i] = activate(layer.act, pre[i]);
      if (dropping && i + 1 < L) {  // hidden layers only
        Vec m(act_out[i].size());
        const double scale = 1.0 / (1.0 - dropout_rate);
        for (Eigen::Index u = 0; u < m.size(); ++u)
          m(u) = rng->next_bool(dropout_rate) ? 0.0 : scale;
        mask[i] = m;
        fed[i] = act_out[i].cwiseProduct(m);
      } else {
        fed[i] = act_out[i];
      }
    }
    const double out = fed[L - 1](0);
    if (cache) {
      cache->params_version = version;
      cache->train_mode = train;
      cache->sparse_input = x.sparse != nullptr;
      if (x.sparse)
        cache->input_sparse = *x.sparse;
      else
        cache->input_dense = *x.dense;
      cache->pre = std::move(pre);
      cache->act_out = std::move(act_out);
      cache->fed = std::move(fed);
      cache->mask = std::move(mask);
    }
    return out;
  }

  // Accumulates exact gradients into `grads`; `d_pre_out` is the loss
  // gradient w.r.t. the output unit's pre-activation. Returns the gradient
  // w.r.t. the input when `dinput` is non-null (needed by the embedding
  // representation, pointless for the sparse one).
  void backward(const ForwardCache& cache, double d_pre_out, LayerGrads& grads,
                Vec* dinput = nullptr) const {
    if (cache.params_version != version)
      throw std::invalid_argument("backward: stale forward cache");
    const std::size_t L = layers.size();
    if (grads.dW.size() != L || grads.db.size() != L)
      throw std::invalid_argument("backward: gradient sink has wrong shape");

    Vec d_pre = Vec::Constant(1, d_pre_out);
    for (std::size_t i = L; i-- > 0;) {
      const Vec& below = i == 0 ? cache.input_dense : cache.fed[i - 1];
      if (i == 0 && cache.sparse_input) {
        for (const auto& [idx, v] : cache.input_sparse.nz)
          grads.dW[0].col(idx) += d_pre * v;
      } else {
        grads.dW[i].noalias() += d_pre * below.transpose();
      }
      grads.db[i] += d_pre;
      if (i == 0) {
        if (dinput) {
          if (cache.sparse_input)
            throw std::invalid_argument("backward: no input gradient for sparse input");
          *dinput = layers[0].W.transpose() * d_pre;
        }
        break;
      }
      Vec d_fed = layers[i].W.transpose() * d_pre;
      if (!cache.mask.empty() && cache.mask[i - 1].size() > 0)
        d_fed = d_fed.cwiseProduct(cache.mask[i - 1]);
      d_pre = d_fed.cwiseProduct(activation_grad(layers[i - 1].act, cache.pre[i - 1]));
    }
  }

  LayerGrads make_grads() const {
    LayerGrads g;
    for (const auto& layer : layers) {
      g.dW.push_back(Mat::Zero(layer.W.rows(), layer.W.cols()));
      g.db.push_back(Vec::Zero(layer.b.size()));
    }
    return g;
  }
};

inline FeedForward make_feed_forward(std::size_t input_dim,
                                     const std::vector<int>& hidden,
                                     Activation output_act, Rng& rng) {
  FeedForward net;
  std::size_t in = input_dim;
  auto add_layer = [&](std::size_t out, Activation act) {
    DenseLayer layer;
    layer.W = Mat(out, in);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (Eigen::Index r = 0; r < layer.W.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.W.cols(); ++c)
        layer.W(r, c) = rng.next_double(-limit, limit);
    layer.b = Vec::Zero(static_cast<Eigen::Index>(out));
    layer.act = act;
    net.layers.push_back(std::move(layer));
    in = out;
  };
  for (int h : hidden) {
    if (h <= 0) throw std::invalid_argument("hidden layer size must be positive");
    add_layer(static_cast<std::size_t>(h), Activation::relu);
  }
  add_layer(1, output_act);
  return net;
}

// ---------------------------------------------------------------------------
// Embedding table and the weighted bag composition.

struct EmbeddingTable {
  Mat E;   // |V| x m, one row per term
  Vec W;   // |V| raw term weights

  std::size_t vocab_size() const { return static_cast<std::size_t>(E.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(E.cols()); }
};

enum class WeightingMode { learned, uniform, idf };

// Numerically stable softmax over one field's raw weights.
inline Vec softmax_weights(const Vec& raw) {
  if (raw.size() == 0) throw std::invalid_argument("softmax_weights: empty field");
  const double mx = raw.maxCoeff();
  Vec e = (raw.array() - mx).exp().matrix();
  return e / e.sum();
}

// A field is a bag of in-vocabulary terms with multiplicities, kept in
// ascending term order so every reduction has a fixed summation order.
struct FieldTerms {
  std::vector<std::pair<TermId, std::uint32_t>> entries;  // (term, count)
  std::uint32_t total = 0;
};

inline FieldTerms field_from_tokens(const std::vector<TermId>& tokens) {
  FieldTerms f;
  std::vector<TermId> ids;
  for (TermId t : tokens)
    if (t != kOovTerm) ids.push_back(t);
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size();) {
    std::size_t j = i;
    while (j < ids.size() && ids[j] == ids[i]) ++j;
    f.entries.emplace_back(ids[i], static_cast<std::uint32_t>(j - i));
    i = j;
  }
  f.total = static_cast<std::uint32_t>(ids.size());
  return f;
}

inline FieldTerms field_from_doc(const std::vector<std::pair<TermId, std::uint32_t>>& doc_terms) {
  FieldTerms f;
  f.entries = doc_terms;
  for (const auto& [t, c] : f.entries) f.total += c;
  return f;
}

struct FieldCache {
  FieldTerms terms;
  std::vector<double> entry_weight;  // effective weight per entry, sums to 1
};

// Normalized per-occurrence weights folded over term multiplicities:
// entry_weight(t) = count(t) * w(t) / sum over the field. For the learned
// mode w(t) = exp(W(t) - max), for uniform w(t) = 1, for idf w(t) = idf(t).
inline Vec compose_field(const FieldTerms& field, const EmbeddingTable& table,
                         WeightingMode mode, const std::vector<double>* idf,
                         FieldCache* cache) {
  if (field.entries.empty())
    throw std::invalid_argument("compose_field: field has no in-vocabulary terms");
  const std::size_t n = field.entries.size();
  std::vector<double> w(n);
  switch (mode) {
    case WeightingMode::learned: {
      double mx = -std::numeric_limits<double>::infinity();
      for (const auto& [t, c] : field.entries) mx = std::max(mx, table.W(t));
      for (std::size_t i = 0; i < n; ++i)
        w[i] = std::exp(table.W(field.entries[i].first) - mx);
      break;
    }
    case WeightingMode::uniform:
      std::fill(w.begin(), w.end(), 1.0);
      break;
    case WeightingMode::idf:
      if (!idf) throw std::invalid_argument("compose_field: idf weights missing");
      for (std::size_t i = 0; i < n; ++i) w[i] = (*idf)[field.entries[i].first];
      break;
  }
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += static_cast<double>(field.entries[i].second) * w[i];
  if (!(z > 0.0)) throw std::invalid_argument("compose_field: degenerate field weights");

  Vec out = Vec::Zero(static_cast<Eigen::Index>(table.dim()));
  std::vector<double> entry_weight(n);
  for (std::size_t i = 0; i < n; ++i) {
    entry_weight[i] = static_cast<double>(field.entries[i].second) * w[i] / z;
    out += entry_weight[i] * table.E.row(field.entries[i].first).transpose();
  }
  if (cache) {
    cache->terms = field;
    cache->entry_weight = std::move(entry_weight);
  }
  return out;
}

// Backward of compose_field. For the learned mode the softmax Jacobian gives
// dL/dW(t_i) = a_i * (u_i - sum_j a_j u_j) with a = entry weights and
// u_i = g . E(t_i).
inline void compose_backward(const FieldCache& cache, const Vec& g,
                             const EmbeddingTable& table, WeightingMode mode,
                             Mat& dE, Vec& dW) {
  const std::size_t n = cache.terms.entries.size();
  for (std::size_t i = 0; i < n; ++i) {
    const TermId t = cache.terms.entries[i].first;
    dE.row(t) += cache.entry_weight[i] * g.transpose();
  }
  if (mode != WeightingMode::learned) return;
  std::vector<double> u(n);
  double mean_u = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = g.dot(table.E.row(cache.terms.entries[i].first).transpose());
    mean_u += cache.entry_weight[i] * u[i];
  }
  for (std::size_t i = 0; i < n; ++i)
    dW(cache.terms.entries[i].first) += cache.entry_weight[i] * (u[i] - mean_u);
}

inline EmbeddingTable make_embedding_table(std::size_t vocab_size, std::size_t dim,
                                           Rng& rng) {
  EmbeddingTable t;
  t.E = Mat(static_cast<Eigen::Index>(vocab_size), static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < t.E.rows(); ++r)
    for (Eigen::Index c = 0; c < t.E.cols(); ++c) t.E(r, c) = rng.next_double(-0.05, 0.05);
  // zero raw weights: the initial normalized weighting is uniform
  t.W = Vec::Zero(static_cast<Eigen::Index>(vocab_size));
  return t;
}

// ---------------------------------------------------------------------------
// Adam. https://arxiv.org/abs/1412.6980

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
void adam_update(T& param, const T& grad, T& m1, T& m2, const AdamConfig& cfg,
                 std::uint64_t t) {
  m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
  m2 = (cfg.beta2 * m2.array() + (1.0 - cfg.beta2) * grad.array().square()).matrix();
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  param.array() -=
      cfg.lr * (m1.array() / bc1) / ((m2.array() / bc2).sqrt() + cfg.eps);
}

}  // namespace weakrank

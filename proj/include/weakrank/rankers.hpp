#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "weakrank/eval.hpp"
#include "weakrank/model.hpp"
#include "weakrank/weak_labels.hpp"

namespace weakrank {

inline constexpr double kProbClamp = 1e-12;

struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t epochs = 5;
  double margin = 1.0;  // hinge margin, outputs live in [-1, 1]
  double learning_rate = 1e-3;
  double dropout = 0.0;
  std::uint64_t seed = 1;
  std::size_t eval_every = 0;  // steps between validation passes; 0 = each epoch end
  AdamConfig adam() const {
    AdamConfig c;
    c.lr = learning_rate;
    return c;
  }
};

struct CurvePoint {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool has_val = false;
};

struct TrainResult {
  std::vector<CurvePoint> curve;
  double best_val_loss = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t best_step = 0;
  std::uint64_t steps = 0;
};

namespace detail {

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct BatchPass {
  const RankerModel& model;
  const InvertedIndex& index;
  double dropout = 0.0;
  Rng* rng = nullptr;      // needed only when dropout > 0
  ModelGrads* grads = nullptr;  // accumulate when non-null

  double point_mse(const std::vector<Query>& queries,
                   const PointInstance* items, std::size_t count) const {
    const double inv = 1.0 / static_cast<double>(count);
    double loss = 0.0;
    InstanceCache cache;
    for (std::size_t i = 0; i < count; ++i) {
      const PointInstance& it = items[i];
      const double pred =
          model_forward(model, index, queries[it.query], it.doc, grads != nullptr,
                        dropout, rng, grads ? &cache : nullptr);
      const double err = pred - it.s;
      loss += err * err * inv;
      if (grads) {
        // linear output: d(pre) == d(pred)
        model_backward(model, cache, 2.0 * err * inv, *grads);
      }
    }
    return loss;
  }

  double pair_hinge(const std::vector<Query>& queries, const PairInstance* items,
                    std::size_t count, double margin) const {
    const double inv = 1.0 / static_cast<double>(count);
    double loss = 0.0;
    InstanceCache cache1, cache2;
    for (std::size_t i = 0; i < count; ++i) {
      const PairInstance& it = items[i];
      if (it.s1 == it.s2)
        throw std::invalid_argument("loss_rank: instance with equal weak scores");
      const Query& q = queries[it.query];
      const double o1 = model_forward(model, index, q, it.doc1, grads != nullptr,
                                      dropout, rng, grads ? &cache1 : nullptr);
      const double o2 = model_forward(model, index, q, it.doc2, grads != nullptr,
                                      dropout, rng, grads ? &cache2 : nullptr);
      const double sgn = sign(it.s1 - it.s2);
      const double violation = margin - sgn * (o1 - o2);
      if (violation > 0.0) {
        loss += violation * inv;
        if (grads) {
          // both towers share parameters; tanh output
          const double d1 = -sgn * inv * (1.0 - o1 * o1);
          const double d2 = sgn * inv * (1.0 - o2 * o2);
          model_backward(model, cache1, d1, *grads);
          model_backward(model, cache2, d2, *grads);
        }
      }
    }
    return loss;
  }

  double pair_cross_entropy(const std::vector<Query>& queries,
                            const PairInstance* items, std::size_t count) const {
    const double inv = 1.0 / static_cast<double>(count);
    double loss = 0.0;
    InstanceCache cache;
    for (std::size_t i = 0; i < count; ++i) {
      const PairInstance& it = items[i];
      const Query& q = queries[it.query];
      const double raw = model_forward_pair(model, index, q, it.doc1, it.doc2,
                                            grads != nullptr, dropout, rng,
                                            grads ? &cache : nullptr);
      const double p = pair_probability(it.s1, it.s2);
      const double r = std::clamp(raw, kProbClamp, 1.0 - kProbClamp);
      loss += -(p * std::log(r) + (1.0 - p) * std::log(1.0 - r)) * inv;
      if (grads) {
        // sigmoid output folded into the cross-entropy gradient
        model_backward(model, cache, (raw - p) * inv, *grads);
      }
    }
    return loss;
  }
};

}  // namespace detail

// Mean squared error between predicted and weak scores (score architecture).
inline double loss_score(const RankerModel& model, const InvertedIndex& index,
                         const std::vector<Query>& queries,
                         const std::vector<PointInstance>& batch) {
  if (model.cfg.arch != Arch::score)
    throw std::invalid_argument("loss_score: model architecture is not `score`");
  if (batch.empty()) throw std::invalid_argument("loss_score: empty batch");
  return detail::BatchPass{model, index}.point_mse(queries, batch.data(), batch.size());
}

// Mean hinge loss over signed score differences (rank architecture).
inline double loss_rank(const RankerModel& model, const InvertedIndex& index,
                        const std::vector<Query>& queries,
                        const std::vector<PairInstance>& batch, double margin = 1.0) {
  if (model.cfg.arch != Arch::rank)
    throw std::invalid_argument("loss_rank: model architecture is not `rank`");
  if (batch.empty()) throw std::invalid_argument("loss_rank: empty batch");
  return detail::BatchPass{model, index}.pair_hinge(queries, batch.data(), batch.size(),
                                                    margin);
}

// Cross-entropy against the weak preference probability (rankprob).
inline double loss_rankprob(const RankerModel& model, const InvertedIndex& index,
                            const std::vector<Query>& queries,
                            const std::vector<PairInstance>& batch) {
  if (model.cfg.arch != Arch::rankprob)
    throw std::invalid_argument("loss_rankprob: model architecture is not `rankprob`");
  if (batch.empty()) throw std::invalid_argument("loss_rankprob: empty batch");
  return detail::BatchPass{model, index}.pair_cross_entropy(queries, batch.data(),
                                                            batch.size());
}

// Inference-mode batch loss for whichever arity the architecture expects.
inline double batch_loss(const RankerModel& model, const InvertedIndex& index,
                         const std::vector<Query>& queries,
                         const std::vector<PointInstance>* points,
                         const std::vector<PairInstance>* pairs, double margin = 1.0) {
  detail::BatchPass pass{model, index};
  switch (model.cfg.arch) {
    case Arch::score:
      return pass.point_mse(queries, points->data(), points->size());
    case Arch::rank:
      return pass.pair_hinge(queries, pairs->data(), pairs->size(), margin);
    case Arch::rankprob:
      return pass.pair_cross_entropy(queries, pairs->data(), pairs->size());
  }
  throw std::logic_error("unreachable");
}

// Batch loss with exact parameter gradients accumulated into `grads`
// (dropout off, so the value matches an inference-mode loss). The instance
// arity must match the architecture: point instances for score, pairs for
// rank and rankprob.
inline double batch_gradients(const RankerModel& model, const InvertedIndex& index,
                              const std::vector<Query>& queries,
                              const std::vector<PointInstance>* points,
                              const std::vector<PairInstance>* pairs,
                              ModelGrads& grads, double margin = 1.0) {
  detail::BatchPass pass{model, index, 0.0, nullptr, &grads};
  switch (model.cfg.arch) {
    case Arch::score:
      if (!points || points->empty())
        throw std::invalid_argument("batch_gradients: score needs point instances");
      return pass.point_mse(queries, points->data(), points->size());
    case Arch::rank:
      if (!pairs || pairs->empty())
        throw std::invalid_argument("batch_gradients: rank needs pair instances");
      return pass.pair_hinge(queries, pairs->data(), pairs->size(), margin);
    case Arch::rankprob:
      if (!pairs || pairs->empty())
        throw std::invalid_argument("batch_gradients: rankprob needs pair instances");
      return pass.pair_cross_entropy(queries, pairs->data(), pairs->size());
  }
  throw std::logic_error("unreachable");
}

// Deterministic inference-mode score for the point-wise architectures.
inline double score_pointwise(const RankerModel& model, const InvertedIndex& index,
                              const Query& q, std::uint32_t doc) {
  if (model.cfg.arch == Arch::rankprob)
    throw std::invalid_argument("score_pointwise: use rerank for rankprob models");
  return model_forward(model, index, q, doc);
}

// Core of the pair-wise re-ranking: each candidate's score is the mean
// prediction against every other candidate. Ties keep the incoming
// (BM25) order, which is itself doc_id-tie-broken and deterministic.
template <typename PairScorer>
std::vector<std::pair<std::size_t, double>> average_pair_preferences(std::size_t n,
                                                                     PairScorer&& score) {
  std::vector<std::pair<std::size_t, double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      sum += score(i, j);
    }
    out[i] = {i, sum / static_cast<double>(n - 1)};
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

// Re-rank BM25 candidates with the model. Input order must be the BM25
// ranking; fewer than 2 candidates pass through unchanged.
inline std::vector<ScoredDoc> rerank_candidates(const RankerModel& model,
                                                const InvertedIndex& index,
                                                const Query& q,
                                                const std::vector<ScoredDoc>& candidates) {
  if (model.cfg.arch == Arch::rankprob) {
    if (candidates.size() < 2) return candidates;
    const auto ranked = average_pair_preferences(
        candidates.size(), [&](std::size_t i, std::size_t j) {
          return model_forward_pair(model, index, q, candidates[i].doc,
                                    candidates[j].doc);
        });
    std::vector<ScoredDoc> out;
    out.reserve(ranked.size());
    for (const auto& [idx, score] : ranked) out.push_back({candidates[idx].doc, score});
    return out;
  }
  std::vector<std::pair<std::size_t, double>> scored(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    scored[i] = {i, score_pointwise(model, index, q, candidates[i].doc)};
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<ScoredDoc> out;
  out.reserve(scored.size());
  for (const auto& [idx, score] : scored) out.push_back({candidates[idx].doc, score});
  return out;
}

// ---------------------------------------------------------------------------
// Training loop: seeded shuffled mini-batches, Adam updates, per-step train
// loss, periodic validation loss, best-validation checkpointing.

namespace detail {

struct ParamSnapshot {
  std::vector<DenseLayer> layers;
  EmbeddingTable embed;

  static ParamSnapshot take(const RankerModel& m) {
    return {m.net.layers, m.embed};
  }
  void restore(RankerModel& m) const {
    m.net.layers = layers;
    m.embed = embed;
    ++m.net.version;
  }
};

}  // namespace detail

// `train_points`/`val_points` feed the score architecture; the pair sets feed
// rank and rankprob. Passing the wrong arity is an error. Validation sets are
// optional; without one the final parameters are kept.
inline TrainResult train(RankerModel& model, const InvertedIndex& index,
                         const PointwiseSet* train_points,
                         const PairwiseSet* train_pairs,
                         const PointwiseSet* val_points, const PairwiseSet* val_pairs,
                         const TrainConfig& cfg) {
  const bool pointwise = model.cfg.arch == Arch::score;
  if (pointwise && (!train_points || train_points->items.empty()))
    throw std::invalid_argument("train: score architecture needs point-wise instances");
  if (!pointwise && (!train_pairs || train_pairs->items.empty()))
    throw std::invalid_argument("train: pair-wise architecture needs pair instances");
  if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");

  const std::size_t n_train =
      pointwise ? train_points->items.size() : train_pairs->items.size();
  const bool has_val = pointwise ? (val_points && !val_points->items.empty())
                                 : (val_pairs && !val_pairs->items.empty());

  ModelGrads grads = make_grads(model);
  AdamState adam = make_adam(model, cfg.adam());
  Rng rng(cfg.seed);

  auto val_loss = [&]() {
    detail::BatchPass pass{model, index};
    if (pointwise)
      return pass.point_mse(val_points->queries, val_points->items.data(),
                            val_points->items.size());
    if (model.cfg.arch == Arch::rank)
      return pass.pair_hinge(val_pairs->queries, val_pairs->items.data(),
                             val_pairs->items.size(), cfg.margin);
    return pass.pair_cross_entropy(val_pairs->queries, val_pairs->items.data(),
                                   val_pairs->items.size());
  };

  TrainResult result;
  detail::ParamSnapshot best;
  double best_val = std::numeric_limits<double>::infinity();
  std::uint64_t step = 0;

  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

  std::vector<PointInstance> point_batch;
  std::vector<PairInstance> pair_batch;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = Rng(cfg.seed).fork(0x1000 + epoch);
    shuffle(order, shuffle_rng);
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n_train - start);
      grads.zero();
      detail::BatchPass pass{model, index, cfg.dropout,
                             cfg.dropout > 0.0 ? &rng : nullptr, &grads};
      double batch_loss = 0.0;
      if (pointwise) {
        point_batch.clear();
        for (std::size_t i = 0; i < count; ++i)
          point_batch.push_back(train_points->items[order[start + i]]);
        batch_loss = pass.point_mse(train_points->queries, point_batch.data(), count);
      } else {
        pair_batch.clear();
        for (std::size_t i = 0; i < count; ++i)
          pair_batch.push_back(train_pairs->items[order[start + i]]);
        batch_loss = model.cfg.arch == Arch::rank
                         ? pass.pair_hinge(train_pairs->queries, pair_batch.data(),
                                           count, cfg.margin)
                         : pass.pair_cross_entropy(train_pairs->queries,
                                                   pair_batch.data(), count);
      }
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("train: loss diverged at step " + std::to_string(step) +
                                 " (non-finite value); lower the learning rate");
      adam_step(adam, model, grads);
      ++step;

      CurvePoint point{step, epoch, batch_loss, 0.0, false};
      const bool epoch_end = start + count >= n_train;
      const bool eval_now =
          has_val && (cfg.eval_every > 0 ? step % cfg.eval_every == 0
                                         : epoch_end);
      if (eval_now) {
        point.val_loss = val_loss();
        point.has_val = true;
        if (point.val_loss < best_val) {
          best_val = point.val_loss;
          best = detail::ParamSnapshot::take(model);
          result.best_step = step;
        }
      }
      result.curve.push_back(point);
    }
  }
  result.steps = step;
  if (has_val && std::isfinite(best_val)) {
    best.restore(model);
    result.best_val_loss = best_val;
  }
  return result;
}

// Loss-curve CSV: step, epoch, train_loss, val_loss (blank when the step had
// no validation pass).
inline void write_loss_curve_csv(const std::vector<CurvePoint>& curve,
                                 const std::string& path,
                                 const std::vector<std::string>& header_comments = {}) {
  write_file_atomic(path, [&](std::ostream& out) {
    for (const auto& c : header_comments) out << "# " << c << "\n";
    out << "step,epoch,train_loss,val_loss\n";
    for (const auto& p : curve) {
      out << p.step << ',' << p.epoch << ',' << format_g9(p.train_loss) << ',';
      if (p.has_val) out << format_g9(p.val_loss);
      out << "\n";
    }
  });
}

// ---------------------------------------------------------------------------
// Supervised fine-tuning from relevance judgments: binary labels, one sampled
// non-relevant document per relevant one. Negatives are drawn from the BM25
// candidate pool minus the judged-relevant set (falling back to the whole
// collection when the pool is exhausted). Queries without judged-relevant
// documents are skipped.

struct SupervisedSets {
  PointwiseSet points;
  PairwiseSet pairs;
  std::size_t skipped_queries = 0;
};

inline SupervisedSets build_supervised_sets(const InvertedIndex& index,
                                            const BM25Params& params,
                                            const std::vector<Query>& queries,
                                            const Qrels& qrels,
                                            std::size_t candidate_pool,
                                            std::uint64_t seed) {
  SupervisedSets sets;
  sets.points.queries = queries;
  sets.pairs.queries = queries;
  const Rng base(seed);
  for (std::uint32_t qi = 0; qi < queries.size(); ++qi) {
    const auto jt = qrels.find(queries[qi].query_id);
    if (jt == qrels.end()) {
      ++sets.skipped_queries;
      continue;
    }
    std::vector<std::uint32_t> relevant;
    for (const auto& [doc_id, grade] : jt->second)
      if (grade > 0 && index.has_doc(doc_id)) relevant.push_back(index.doc_number(doc_id));
    if (relevant.empty()) {
      ++sets.skipped_queries;
      continue;
    }
    std::vector<std::uint8_t> is_relevant(index.num_docs(), 0);
    for (auto d : relevant) is_relevant[d] = 1;

    std::vector<std::uint32_t> pool;
    for (const auto& hit : retrieve_top_k(index, params, queries[qi], candidate_pool))
      if (!is_relevant[hit.doc]) pool.push_back(hit.doc);

    Rng rng = base.fork(qi);
    std::vector<std::uint32_t> negatives;
    negatives.reserve(relevant.size());
    for (std::size_t i = 0; i < relevant.size(); ++i) {
      if (!pool.empty()) {
        const std::size_t pick = static_cast<std::size_t>(rng.next_below(pool.size()));
        negatives.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
      } else {
        std::uint32_t d;
        do {
          d = static_cast<std::uint32_t>(rng.next_below(index.num_docs()));
        } while (is_relevant[d]);
        negatives.push_back(d);
      }
    }
    for (std::size_t i = 0; i < relevant.size(); ++i) {
      sets.points.items.push_back({qi, relevant[i], 1.0});
      sets.points.items.push_back({qi, negatives[i], 0.0});
      if (rng.next_bool(0.5))
        sets.pairs.items.push_back({qi, relevant[i], negatives[i], 1.0, 0.0});
      else
        sets.pairs.items.push_back({qi, negatives[i], relevant[i], 0.0, 1.0});
    }
  }
  return sets;
}

// Continue training (or train from scratch, for the supervised-only baseline)
// on judged data with the model's own loss.
inline TrainResult fine_tune(RankerModel& model, const InvertedIndex& index,
                             const BM25Params& params,
                             const std::vector<Query>& queries, const Qrels& qrels,
                             const TrainConfig& cfg, std::size_t candidate_pool = 1000) {
  const SupervisedSets sets =
      build_supervised_sets(index, params, queries, qrels, candidate_pool, cfg.seed);
  const bool pointwise = model.cfg.arch == Arch::score;
  if ((pointwise && sets.points.items.empty()) ||
      (!pointwise && sets.pairs.items.empty()))
    throw std::runtime_error("fine_tune: no supervised instances (no judged queries?)");
  return train(model, index, pointwise ? &sets.points : nullptr,
               pointwise ? nullptr : &sets.pairs, nullptr, nullptr, cfg);
}

}  // namespace weakrank

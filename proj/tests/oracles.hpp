// Independent reference implementations used only by the tests. Each oracle
// recomputes its quantity from first principles, sharing no code with the
// implementation path it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "weakrank/index.hpp"
#include "weakrank/model.hpp"
#include "weakrank/rankers.hpp"

namespace oracles {

// ---------------------------------------------------------------------------
// Reference BM25: recounts tf/df/lengths directly from raw token lists.

struct RefCorpus {
  std::vector<std::string> doc_ids;
  std::vector<std::vector<std::string>> docs;  // token lists
};

inline double reference_bm25(const RefCorpus& corpus,
                             const std::vector<std::string>& query_terms,
                             std::size_t doc, double k1, double b, double k3) {
  const double n_docs = static_cast<double>(corpus.docs.size());
  double total_len = 0.0;
  for (const auto& d : corpus.docs) total_len += static_cast<double>(d.size());
  const double avg_dl = total_len / n_docs;
  const double dl = static_cast<double>(corpus.docs[doc].size());

  // distinct query terms with query frequency
  std::map<std::string, int> qtf;
  for (const auto& t : query_terms) ++qtf[t];

  double score = 0.0;
  for (const auto& [term, qf] : qtf) {
    double tf = 0.0;
    for (const auto& tok : corpus.docs[doc])
      if (tok == term) tf += 1.0;
    if (tf == 0.0) continue;
    double df = 0.0;
    for (const auto& d : corpus.docs) {
      for (const auto& tok : d) {
        if (tok == term) {
          df += 1.0;
          break;
        }
      }
    }
    const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
    const double tf_part = tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avg_dl));
    const double qtf_part = (k3 + 1.0) * qf / (k3 + qf);
    score += idf * tf_part * qtf_part;
  }
  return score;
}

// ---------------------------------------------------------------------------
// Brute-force retrieval metrics.

inline double brute_average_precision(const std::vector<std::string>& ranked,
                                      const std::map<std::string, int>& judgments,
                                      std::size_t cutoff) {
  int total_relevant = 0;
  for (const auto& [d, g] : judgments)
    if (g > 0) ++total_relevant;
  if (total_relevant == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < ranked.size() && i < cutoff; ++i) {
    auto it = judgments.find(ranked[i]);
    if (it == judgments.end() || it->second <= 0) continue;
    // precision at rank i+1, recounted from scratch
    int hits = 0;
    for (std::size_t j = 0; j <= i; ++j) {
      auto jt = judgments.find(ranked[j]);
      if (jt != judgments.end() && jt->second > 0) ++hits;
    }
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / total_relevant;
}

inline double brute_precision_at(const std::vector<std::string>& ranked,
                                 const std::map<std::string, int>& judgments,
                                 std::size_t k) {
  int hits = 0;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
    auto it = judgments.find(ranked[i]);
    if (it != judgments.end() && it->second > 0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

inline double brute_ndcg_at(const std::vector<std::string>& ranked,
                            const std::map<std::string, int>& judgments,
                            std::size_t k) {
  auto dcg_of = [&](const std::vector<int>& grades) {
    double dcg = 0.0;
    for (std::size_t i = 0; i < grades.size() && i < k; ++i)
      dcg += (std::exp2(static_cast<double>(grades[i])) - 1.0) /
             (std::log(static_cast<double>(i + 2)) / std::log(2.0));
    return dcg;
  };
  std::vector<int> actual;
  for (const auto& d : ranked) {
    auto it = judgments.find(d);
    actual.push_back(it == judgments.end() ? 0 : it->second);
  }
  std::vector<int> ideal;
  for (const auto& [d, g] : judgments) ideal.push_back(g);
  std::sort(ideal.rbegin(), ideal.rend());
  const double idcg = dcg_of(ideal);
  if (idcg <= 0.0) return 0.0;
  return dcg_of(actual) / idcg;
}

// ---------------------------------------------------------------------------
// Student-t two-tailed p-value via adaptive Simpson integration of the pdf,
// an algebraically independent route from the incomplete-beta evaluation.

inline double t_pdf(double x, double dof) {
  const double c =
      std::exp(std::lgamma((dof + 1.0) / 2.0) - std::lgamma(dof / 2.0)) /
      std::sqrt(dof * M_PI);
  return c * std::pow(1.0 + x * x / dof, -(dof + 1.0) / 2.0);
}

inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double fa, double fm, double fb, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, eps / 2.0, depth - 1) +
         simpson(f, m, b, fm, frm, fb, eps / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double eps) {
  const double m = 0.5 * (a + b);
  return simpson(f, a, b, f(a), f(m), f(b), eps, 40);
}

// P(|T| > |t|) for T ~ Student-t(dof).
inline double two_tailed_p(double t, double dof) {
  const double at = std::fabs(t);
  if (at == 0.0) return 1.0;
  auto pdf = [dof](double x) { return t_pdf(x, dof); };
  const double central = integrate(pdf, 0.0, at, 1e-12);
  return std::max(0.0, 1.0 - 2.0 * central);
}

// ---------------------------------------------------------------------------
// Central finite-difference gradient check over every trainable parameter.

struct GradCheckStats {
  double max_rel_err = 0.0;
  std::size_t params_checked = 0;
  std::string worst;
};

// Enumerates trainable scalars, perturbs each with a central difference of
// the given loss closure, and compares against the analytic gradient.
inline GradCheckStats finite_difference_check(
    weakrank::RankerModel& model, const weakrank::ModelGrads& analytic,
    const std::function<double()>& loss_fn, double step = 1e-5,
    double abs_floor = 1e-8) {
  GradCheckStats stats;
  auto check_scalar = [&](double& ref, double analytic_g, const std::string& name) {
    const double saved = ref;
    ref = saved + step;
    const double up = loss_fn();
    ref = saved - step;
    const double down = loss_fn();
    ref = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::fabs(numeric), std::fabs(analytic_g), abs_floor});
    const double rel = std::fabs(numeric - analytic_g) / denom;
    if (rel > stats.max_rel_err) {
      stats.max_rel_err = rel;
      stats.worst = name;
    }
    ++stats.params_checked;
  };

  for (std::size_t l = 0; l < model.net.layers.size(); ++l) {
    auto& layer = model.net.layers[l];
    for (Eigen::Index r = 0; r < layer.W.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.W.cols(); ++c)
        check_scalar(layer.W(r, c), analytic.layers.dW[l](r, c),
                     "W" + std::to_string(l) + "(" + std::to_string(r) + "," +
                         std::to_string(c) + ")");
    for (Eigen::Index i = 0; i < layer.b.size(); ++i)
      check_scalar(layer.b(i), analytic.layers.db[l](i),
                   "b" + std::to_string(l) + "(" + std::to_string(i) + ")");
  }
  if (model.trains_embedding()) {
    for (Eigen::Index r = 0; r < model.embed.E.rows(); ++r)
      for (Eigen::Index c = 0; c < model.embed.E.cols(); ++c)
        check_scalar(model.embed.E(r, c), analytic.dE(r, c),
                     "E(" + std::to_string(r) + "," + std::to_string(c) + ")");
  }
  if (model.trains_term_weights()) {
    for (Eigen::Index i = 0; i < model.embed.W.size(); ++i)
      check_scalar(model.embed.W(i), analytic.dW(i), "Wt(" + std::to_string(i) + ")");
  }
  return stats;
}

}  // namespace oracles

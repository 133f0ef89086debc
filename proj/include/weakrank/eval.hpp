#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "weakrank/io.hpp"
#include "weakrank/model.hpp"

namespace weakrank {

// (query_id, doc_id) -> integer relevance grade >= 0. std::map keeps file
// output deterministic.
using Qrels = std::map<std::string, std::map<std::string, int>>;

// Qrels file: `qid 0 docid grade`, whitespace-separated.
inline Qrels load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open qrels: " + path);
  Qrels qrels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string qid, iter, docid;
    int grade;
    if (!(ss >> qid >> iter >> docid >> grade))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected `qid 0 docid grade`");
    if (grade < 0)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": negative grade");
    qrels[qid][docid] = grade;
  }
  return qrels;
}

inline void save_qrels(const Qrels& qrels, const std::string& path,
                       const std::vector<std::string>& header_comments = {}) {
  write_file_atomic(path, [&](std::ostream& out) {
    for (const auto& c : header_comments) out << "# " << c << "\n";
    for (const auto& [qid, docs] : qrels)
      for (const auto& [docid, grade] : docs)
        out << qid << " 0 " << docid << ' ' << grade << "\n";
  });
}

struct RunEntry {
  std::string doc_id;
  double score;
};

// Ranked retrieval output per query, TREC exchange format on disk. The rank
// column is derived from list order; order wins over the printed score.
struct RunFile {
  std::string tag;
  std::map<std::string, std::vector<RunEntry>> rankings;
};

inline void save_run(const RunFile& run, const std::string& path,
                     const std::vector<std::string>& header_comments = {}) {
  write_file_atomic(path, [&](std::ostream& out) {
    for (const auto& c : header_comments) out << "# " << c << "\n";
    for (const auto& [qid, entries] : run.rankings) {
      std::size_t rank = 1;
      for (const auto& e : entries) {
        out << qid << " Q0 " << e.doc_id << ' ' << rank << ' ' << format_g9(e.score)
            << ' ' << run.tag << "\n";
        ++rank;
      }
    }
  });
}

inline RunFile load_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run file: " + path);
  RunFile run;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string qid, q0, docid, tag;
    std::size_t rank;
    double score;
    if (!(ss >> qid >> q0 >> docid >> rank >> score >> tag))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad run line");
    run.rankings[qid].push_back({docid, score});
    run.tag = tag;
  }
  return run;
}

// ---------------------------------------------------------------------------
// Metrics. Judged relevance means grade > 0.

inline double average_precision(const std::vector<std::string>& ranked,
                                const std::map<std::string, int>& judgments,
                                std::size_t cutoff = 1000) {
  if (cutoff == 0) throw std::invalid_argument("average_precision: cutoff must be >= 1");
  std::size_t total_relevant = 0;
  for (const auto& [doc, grade] : judgments)
    if (grade > 0) ++total_relevant;
  if (total_relevant == 0) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  const std::size_t n = std::min(cutoff, ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto it = judgments.find(ranked[i]);
    if (it != judgments.end() && it->second > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(total_relevant);
}

// Denominator is k even when fewer than k documents were retrieved.
inline double precision_at(const std::vector<std::string>& ranked,
                           const std::map<std::string, int>& judgments,
                           std::size_t k = 20) {
  if (k == 0) throw std::invalid_argument("precision_at: k must be >= 1");
  std::size_t hits = 0;
  const std::size_t n = std::min(k, ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto it = judgments.find(ranked[i]);
    if (it != judgments.end() && it->second > 0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

// Graded gain (2^rel - 1) with log2(i + 1) discount; the ideal list sorts the
// judged grades descending. https://en.wikipedia.org/wiki/Discounted_cumulative_gain
inline double ndcg_at(const std::vector<std::string>& ranked,
                      const std::map<std::string, int>& judgments, std::size_t k = 20) {
  if (k == 0) throw std::invalid_argument("ndcg_at: k must be >= 1");
  double dcg = 0.0;
  const std::size_t n = std::min(k, ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto it = judgments.find(ranked[i]);
    const int grade = it != judgments.end() ? it->second : 0;
    if (grade > 0)
      dcg += (std::pow(2.0, grade) - 1.0) / std::log2(static_cast<double>(i + 2));
  }
  std::vector<int> grades;
  for (const auto& [doc, grade] : judgments)
    if (grade > 0) grades.push_back(grade);
  std::sort(grades.begin(), grades.end(), std::greater<int>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, grades.size()); ++i)
    idcg += (std::pow(2.0, grades[i]) - 1.0) / std::log2(static_cast<double>(i + 2));
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

struct MetricReport {
  // per judged query (>= 1 relevant document), keyed by query_id
  std::map<std::string, double> ap, p_at_k, ndcg;
  double mean_ap = 0.0, mean_p = 0.0, mean_ndcg = 0.0;
  std::size_t judged_queries = 0;
};

// Queries without a single judged-relevant document are excluded from the
// means, matching the usual trec_eval accounting.
inline MetricReport evaluate_run(const RunFile& run, const Qrels& qrels,
                                 std::size_t ap_cutoff = 1000, std::size_t k = 20) {
  MetricReport report;
  for (const auto& [qid, judgments] : qrels) {
    bool any_relevant = false;
    for (const auto& [doc, grade] : judgments)
      if (grade > 0) { any_relevant = true; break; }
    if (!any_relevant) continue;
    std::vector<std::string> ranked;
    auto it = run.rankings.find(qid);
    if (it != run.rankings.end()) {
      ranked.reserve(it->second.size());
      for (const auto& e : it->second) ranked.push_back(e.doc_id);
    }
    report.ap[qid] = average_precision(ranked, judgments, ap_cutoff);
    report.p_at_k[qid] = precision_at(ranked, judgments, k);
    report.ndcg[qid] = ndcg_at(ranked, judgments, k);
  }
  report.judged_queries = report.ap.size();
  if (report.judged_queries > 0) {
    for (const auto& [q, v] : report.ap) report.mean_ap += v;
    for (const auto& [q, v] : report.p_at_k) report.mean_p += v;
    for (const auto& [q, v] : report.ndcg) report.mean_ndcg += v;
    const auto n = static_cast<double>(report.judged_queries);
    report.mean_ap /= n;
    report.mean_p /= n;
    report.mean_ndcg /= n;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Paired two-tailed t-test via the regularized incomplete beta function.
// https://en.wikipedia.org/wiki/Student%27s_t-distribution

namespace detail {

// Continued fraction for the incomplete beta, modified Lentz method.
inline double ibeta_cf(double x, double a, double b) {
  const double tiny = 1e-300;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double result = d;
  for (int m = 1; m <= 300; ++m) {
    const double dm = static_cast<double>(m);
    double numer = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
    d = 1.0 + numer * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + numer / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    result *= d * c;
    numer = -(a + dm) * (a + b + dm) * x / ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
    d = 1.0 + numer * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + numer / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double mult = d * c;
    result *= mult;
    if (std::fabs(mult - 1.0) < 1e-15) break;
  }
  return result;
}

}  // namespace detail

inline double regularized_incomplete_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0 && a > 0.0 && b > 0.0))
    throw std::invalid_argument("regularized_incomplete_beta: bad arguments");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - log_beta);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * detail::ibeta_cf(x, a, b) / a;
  return 1.0 - front * detail::ibeta_cf(1.0 - x, b, a) / b;
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double threshold = 0.05;
  bool significant = false;
};

// Two-tailed paired t-test with a Bonferroni-corrected threshold
// 0.05 / num_comparisons. Zero variance of the differences degenerates to
// p = 1 when the means agree and p = 0 otherwise.
inline TTestResult paired_ttest(const std::vector<double>& a,
                                const std::vector<double>& b,
                                std::size_t num_comparisons = 1) {
  if (a.size() != b.size())
    throw std::invalid_argument("paired_ttest: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("paired_ttest: need at least 2 pairs");
  if (num_comparisons == 0)
    throw std::invalid_argument("paired_ttest: num_comparisons must be >= 1");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  TTestResult r;
  r.threshold = 0.05 / static_cast<double>(num_comparisons);
  const double var = ss / (n - 1.0);
  if (var == 0.0) {
    r.t = mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity() * (mean > 0 ? 1 : -1);
    r.p = mean == 0.0 ? 1.0 : 0.0;
    r.significant = r.p < r.threshold;
    return r;
  }
  r.t = mean / std::sqrt(var / n);
  const double dof = n - 1.0;
  // two-tailed p-value: I_{dof/(t^2+dof)}(dof/2, 1/2)
  r.p = regularized_incomplete_beta(dof / (r.t * r.t + dof), dof / 2.0, 0.5);
  r.significant = r.p < r.threshold;
  return r;
}

inline double pearson_correlation(const std::vector<double>& x,
                                  const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("pearson_correlation: need two equal-length samples");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw std::invalid_argument("pearson_correlation: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

struct WeightIdfRow {
  std::string term;
  double weight;
  double idf;
};

struct WeightIdfReport {
  std::vector<WeightIdfRow> rows;  // terms with df > 0, ascending term id
  double pearson_r = 0.0;
};

// Correlation between the raw learned term weight and idf, over terms that
// occur in the collection.
inline WeightIdfReport weight_idf_correlation(const RankerModel& model,
                                              const InvertedIndex& index) {
  if (!model.uses_embedding() || model.cfg.weighting != WeightingMode::learned)
    throw std::invalid_argument(
        "weight_idf_correlation: model has no learned term weights");
  WeightIdfReport report;
  std::vector<double> w, idf;
  for (TermId t = 0; t < index.vocab.size(); ++t) {
    if (index.vocab.df(t) == 0) continue;
    report.rows.push_back({index.vocab.term(t), model.embed.W(t), index.idf(t)});
    w.push_back(model.embed.W(t));
    idf.push_back(index.idf(t));
  }
  report.pearson_r = pearson_correlation(w, idf);
  return report;
}

}  // namespace weakrank

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "weakrank/index.hpp"
#include "weakrank/io.hpp"
#include "weakrank/rng.hpp"

namespace weakrank {

struct PointInstance {
  std::uint32_t query;  // position in the owning query list
  std::uint32_t doc;    // internal doc number
  double s;             // normalized weak score in [0, 1]
};

struct PairInstance {
  std::uint32_t query;
  std::uint32_t doc1;
  std::uint32_t doc2;
  double s1;
  double s2;  // s1 != s2 by construction
};

// Per-query min-max map onto [0, 1]; a constant list maps to all 0.5.
// Order-preserving, so the argsort of the candidate list is unchanged.
inline std::vector<double> normalize_scores(const std::vector<double>& raw) {
  if (raw.empty()) throw std::invalid_argument("normalize_scores: empty list");
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(raw.size());
  if (hi == lo) {
    std::fill(out.begin(), out.end(), 0.5);
  } else {
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - lo) / (hi - lo);
  }
  return out;
}

// Probability that doc1 outranks doc2 given their weak scores.
inline double pair_probability(double s1, double s2) {
  if (!(s1 + s2 > 0.0))
    throw std::invalid_argument("pair_probability: s1 + s2 must be positive");
  return s1 / (s1 + s2);
}

struct PointwiseSet {
  std::vector<Query> queries;
  std::vector<PointInstance> items;
  std::size_t skipped_queries = 0;  // queries with zero hits
};

struct PairwiseSet {
  std::vector<Query> queries;
  std::vector<PairInstance> items;
  std::size_t skipped_queries = 0;  // queries with < 2 distinct-score candidates
};

// One block per query, in query order; candidates in descending BM25 order.
inline PointwiseSet generate_pointwise(const InvertedIndex& index,
                                       const BM25Params& params,
                                       const std::vector<Query>& queries,
                                       std::size_t depth) {
  if (depth == 0) throw std::invalid_argument("generate_pointwise: depth must be >= 1");
  PointwiseSet set;
  set.queries = queries;
  for (std::uint32_t qi = 0; qi < queries.size(); ++qi) {
    const auto hits = retrieve_top_k(index, params, queries[qi], depth);
    if (hits.empty()) {
      ++set.skipped_queries;
      continue;
    }
    std::vector<double> raw(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) raw[i] = hits[i].score;
    const auto norm = normalize_scores(raw);
    for (std::size_t i = 0; i < hits.size(); ++i)
      set.items.push_back({qi, hits[i].doc, norm[i]});
  }
  return set;
}

namespace detail {

// Sample `want` distinct ordered candidate pairs with unequal normalized
// scores, uniformly over the valid set. Rejection sampling covers the sparse
// case; a partial Fisher-Yates over the enumerated valid set covers the rest.
inline void sample_query_pairs(std::uint32_t qi, const std::vector<ScoredDoc>& hits,
                               const std::vector<double>& norm, std::size_t want,
                               Rng& rng, std::vector<PairInstance>& out) {
  const std::size_t n = hits.size();
  std::size_t valid = 0;
  {
    // count ordered pairs with distinct scores via score multiplicities
    std::unordered_map<double, std::size_t> mult;
    for (double s : norm) ++mult[s];
    std::size_t equal_pairs = 0;
    for (const auto& [s, c] : mult) equal_pairs += c * (c - 1);
    valid = n * (n - 1) - equal_pairs;
  }
  if (valid == 0) return;

  const std::size_t take = std::min(want, valid);
  if (take * 3 < valid) {
    std::unordered_set<std::uint64_t> chosen;
    std::size_t emitted = 0;
    while (emitted < take) {
      const auto i = static_cast<std::size_t>(rng.next_below(n));
      const auto j = static_cast<std::size_t>(rng.next_below(n));
      if (i == j || norm[i] == norm[j]) continue;
      const std::uint64_t key = static_cast<std::uint64_t>(i) * n + j;
      if (!chosen.insert(key).second) continue;
      out.push_back({qi, hits[i].doc, hits[j].doc, norm[i], norm[j]});
      ++emitted;
    }
    return;
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  pairs.reserve(valid);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < n; ++j)
      if (i != j && norm[i] != norm[j]) pairs.emplace_back(i, j);
  for (std::size_t idx = 0; idx < take; ++idx) {
    const std::size_t pick = idx + static_cast<std::size_t>(rng.next_below(pairs.size() - idx));
    std::swap(pairs[idx], pairs[pick]);
    const auto [i, j] = pairs[idx];
    out.push_back({qi, hits[i].doc, hits[j].doc, norm[i], norm[j]});
  }
}

}  // namespace detail

inline PairwiseSet generate_pairwise(const InvertedIndex& index,
                                     const BM25Params& params,
                                     const std::vector<Query>& queries,
                                     std::size_t depth, std::size_t pairs_per_query,
                                     std::uint64_t seed) {
  if (depth == 0) throw std::invalid_argument("generate_pairwise: depth must be >= 1");
  if (pairs_per_query == 0)
    throw std::invalid_argument("generate_pairwise: pairs_per_query must be >= 1");
  PairwiseSet set;
  set.queries = queries;
  const Rng base(seed);
  for (std::uint32_t qi = 0; qi < queries.size(); ++qi) {
    const auto hits = retrieve_top_k(index, params, queries[qi], depth);
    if (hits.size() < 2) {
      ++set.skipped_queries;
      continue;
    }
    std::vector<double> raw(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) raw[i] = hits[i].score;
    const auto norm = normalize_scores(raw);
    Rng rng = base.fork(qi);
    const std::size_t before = set.items.size();
    detail::sample_query_pairs(qi, hits, norm, pairs_per_query, rng, set.items);
    if (set.items.size() == before) ++set.skipped_queries;
  }
  return set;
}

// Training-set TSV: one header line, then `q_id doc_id s` rows (point-wise)
// or `q_id doc1_id doc2_id s1 s2` rows (pair-wise), floats with 9 significant
// digits. Lines starting with '#' are stamp comments.

inline void write_pointwise_tsv(const PointwiseSet& set, const InvertedIndex& index,
                                const std::string& path,
                                const std::vector<std::string>& header_comments = {}) {
  write_file_atomic(path, [&](std::ostream& out) {
    for (const auto& c : header_comments) out << "# " << c << "\n";
    out << "query_id\tdoc_id\ts\n";
    for (const auto& it : set.items) {
      out << set.queries[it.query].query_id << '\t' << index.doc_ids[it.doc] << '\t'
          << format_g9(it.s) << "\n";
    }
  });
}

inline void write_pairwise_tsv(const PairwiseSet& set, const InvertedIndex& index,
                               const std::string& path,
                               const std::vector<std::string>& header_comments = {}) {
  write_file_atomic(path, [&](std::ostream& out) {
    for (const auto& c : header_comments) out << "# " << c << "\n";
    out << "query_id\tdoc1_id\tdoc2_id\ts1\ts2\n";
    for (const auto& it : set.items) {
      out << set.queries[it.query].query_id << '\t' << index.doc_ids[it.doc1] << '\t'
          << index.doc_ids[it.doc2] << '\t' << format_g9(it.s1) << '\t'
          << format_g9(it.s2) << "\n";
    }
  });
}

namespace detail {

inline std::unordered_map<std::string, std::uint32_t> query_positions(
    const std::vector<Query>& queries) {
  std::unordered_map<std::string, std::uint32_t> pos;
  for (std::uint32_t i = 0; i < queries.size(); ++i) pos[queries[i].query_id] = i;
  return pos;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

}  // namespace detail

inline PointwiseSet read_pointwise_tsv(const std::string& path,
                                       const std::vector<Query>& queries,
                                       const InvertedIndex& index) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open training set: " + path);
  PointwiseSet set;
  set.queries = queries;
  const auto pos = detail::query_positions(queries);
  std::string line;
  bool header_seen = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // column names
      continue;
    }
    const auto f = detail::split_tabs(line);
    if (f.size() != 3)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 3 fields");
    const auto qit = pos.find(f[0]);
    if (qit == pos.end())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown query " + f[0]);
    set.items.push_back({qit->second, index.doc_number(f[1]), std::stod(f[2])});
  }
  return set;
}

inline PairwiseSet read_pairwise_tsv(const std::string& path,
                                     const std::vector<Query>& queries,
                                     const InvertedIndex& index) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open training set: " + path);
  PairwiseSet set;
  set.queries = queries;
  const auto pos = detail::query_positions(queries);
  std::string line;
  bool header_seen = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto f = detail::split_tabs(line);
    if (f.size() != 5)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 5 fields");
    const auto qit = pos.find(f[0]);
    if (qit == pos.end())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown query " + f[0]);
    set.items.push_back({qit->second, index.doc_number(f[1]), index.doc_number(f[2]),
                         std::stod(f[3]), std::stod(f[4])});
  }
  return set;
}

}  // namespace weakrank

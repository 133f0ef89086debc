#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "weakrank/index.hpp"
#include "weakrank/nn.hpp"

namespace weakrank {

enum class Repr { dense, sparse, embed };

// Dense feature layout, point-wise (3 + 2k values):
//   [N, avg_dl, l_d, df(t_1), tf(t_1,d), ..., df(t_k), tf(t_k,d)]
// and pair-wise (4 + 3k values) with l_d2 and the second document's tf block
// appended. Query terms are taken in query order, OOV terms are skipped,
// longer queries are truncated to k and shorter ones zero-padded. Counts are
// raw by default; log1p is an opt-in transform.
inline Vec dense_features(const InvertedIndex& index, const Query& q,
                          std::uint32_t doc, int k, bool log1p = false) {
  if (k <= 0) throw std::invalid_argument("dense_features: k must be positive");
  Vec out = Vec::Zero(3 + 2 * k);
  auto enc = [log1p](double v) { return log1p ? std::log1p(v) : v; };
  out(0) = enc(static_cast<double>(index.num_docs()));
  out(1) = enc(index.avg_doc_len());
  out(2) = enc(static_cast<double>(index.doc_len[doc]));
  int slot = 0;
  for (TermId t : q.tokens) {
    if (t == kOovTerm) continue;
    if (slot == k) break;
    out(3 + 2 * slot) = enc(static_cast<double>(index.vocab.df(t)));
    out(3 + 2 * slot + 1) = enc(static_cast<double>(index.tf(t, doc)));
    ++slot;
  }
  return out;
}

inline Vec dense_features(const InvertedIndex& index, const Query& q,
                          std::uint32_t doc1, std::uint32_t doc2, int k,
                          bool log1p = false) {
  const Vec point = dense_features(index, q, doc1, k, log1p);
  Vec out = Vec::Zero(4 + 3 * k);
  out.head(3 + 2 * k) = point;
  auto enc = [log1p](double v) { return log1p ? std::log1p(v) : v; };
  out(3 + 2 * k) = enc(static_cast<double>(index.doc_len[doc2]));
  int slot = 0;
  for (TermId t : q.tokens) {
    if (t == kOovTerm) continue;
    if (slot == k) break;
    out(4 + 2 * k + slot) = enc(static_cast<double>(index.tf(t, doc2)));
    ++slot;
  }
  return out;
}

namespace detail {

inline void append_block(SparseVec& vec, std::size_t offset, const FieldTerms& field) {
  for (const auto& [t, c] : field.entries)
    vec.nz.emplace_back(static_cast<std::uint32_t>(offset + t), static_cast<double>(c));
}

}  // namespace detail

// Sparse bag-of-words blocks [tfv_c || tfv_q || tfv_d] (and tfv_d2 pair-wise).
// tfv_c holds the collection term frequencies and is identical for every
// instance; it still occupies its own |V| coordinates.
inline SparseVec sparse_features(const InvertedIndex& index, const Query& q,
                                 std::uint32_t doc) {
  const std::size_t v = index.vocab.size();
  SparseVec out;
  out.dim = 3 * v;
  for (TermId t = 0; t < v; ++t) {
    const auto ctf = index.vocab.collection_tf(t);
    if (ctf > 0) out.nz.emplace_back(t, static_cast<double>(ctf));
  }
  detail::append_block(out, v, field_from_tokens(q.tokens));
  detail::append_block(out, 2 * v, field_from_doc(index.doc_terms(doc)));
  return out;
}

inline SparseVec sparse_features(const InvertedIndex& index, const Query& q,
                                 std::uint32_t doc1, std::uint32_t doc2) {
  const std::size_t v = index.vocab.size();
  SparseVec out;
  out.dim = 4 * v;
  for (TermId t = 0; t < v; ++t) {
    const auto ctf = index.vocab.collection_tf(t);
    if (ctf > 0) out.nz.emplace_back(t, static_cast<double>(ctf));
  }
  detail::append_block(out, v, field_from_tokens(q.tokens));
  detail::append_block(out, 2 * v, field_from_doc(index.doc_terms(doc1)));
  detail::append_block(out, 3 * v, field_from_doc(index.doc_terms(doc2)));
  return out;
}

// Embedded field extraction; composition itself lives in nn.hpp because it is
// part of the differentiable path.
inline FieldTerms query_field(const Query& q) { return field_from_tokens(q.tokens); }

inline FieldTerms doc_field(const InvertedIndex& index, std::uint32_t doc) {
  return field_from_doc(index.doc_terms(doc));
}

// Pretrained embedding text file: `term v1 v2 ... vm` per line. Terms absent
// from the file keep their random initialization; returns how many rows were
// loaded.
inline std::size_t load_pretrained_embeddings(const std::string& path,
                                              const Vocabulary& vocab,
                                              EmbeddingTable& table) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  std::string line;
  std::size_t loaded = 0;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string term;
    ss >> term;
    const auto id = vocab.lookup(term);
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (vals.size() != table.dim())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(table.dim()) + " values");
    if (!id) continue;
    for (std::size_t j = 0; j < vals.size(); ++j)
      table.E(*id, static_cast<Eigen::Index>(j)) = vals[j];
    ++loaded;
  }
  return loaded;
}

}  // namespace weakrank

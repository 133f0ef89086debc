#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "weakrank/corpus.hpp"
#include "weakrank/io.hpp"

namespace weakrank {

// https://en.wikipedia.org/wiki/Okapi_BM25
struct BM25Params {
  double k1 = 1.2;
  double b = 0.75;
  double k3 = 1000.0;

  void validate() const {
    if (k1 < 0.0 || b < 0.0 || b > 1.0 || k3 < 0.0)
      throw std::invalid_argument("invalid BM25 parameters");
  }
};

struct Posting {
  std::uint32_t doc;  // dense internal doc number, ascending within a list
  std::uint32_t tf;
};

struct ScoredDoc {
  std::uint32_t doc;
  double score;
};

// Inverted index over an immutable corpus snapshot. Internal doc numbers are
// assigned in ascending doc_id order, so posting lists and score ties are
// ordered the same way the run files are.
class InvertedIndex {
 public:
  Vocabulary vocab;
  std::vector<std::string> doc_ids;   // internal number -> external id
  std::vector<std::uint32_t> doc_len;
  std::vector<std::vector<Posting>> postings;  // one list per term

  std::size_t num_docs() const { return doc_ids.size(); }
  double avg_doc_len() const { return avg_dl_; }

  std::uint32_t doc_number(const std::string& doc_id) const {
    auto it = doc_number_.find(doc_id);
    if (it == doc_number_.end())
      throw std::invalid_argument("unknown doc_id: " + doc_id);
    return it->second;
  }

  bool has_doc(const std::string& doc_id) const {
    return doc_number_.count(doc_id) != 0;
  }

  // Forward view: per-document (term, tf) pairs in ascending term order.
  // Rebuilt from the postings, used by the input representations.
  const std::vector<std::pair<TermId, std::uint32_t>>& doc_terms(std::uint32_t doc) const {
    return doc_terms_.at(doc);
  }

  std::uint32_t tf(TermId term, std::uint32_t doc) const {
    const auto& list = postings.at(term);
    auto it = std::lower_bound(list.begin(), list.end(), doc,
                               [](const Posting& p, std::uint32_t d) { return p.doc < d; });
    return (it != list.end() && it->doc == doc) ? it->tf : 0;
  }

  // Smoothed so the value is positive for every df <= N.
  double idf(TermId term) const {
    const double n = static_cast<double>(num_docs());
    const double df = static_cast<double>(vocab.df(term));
    return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
  }

  // Number of documents containing at least one of the given terms.
  std::size_t matching_doc_count(const std::vector<TermId>& terms) const {
    std::vector<TermId> uniq;
    for (TermId t : terms)
      if (t != kOovTerm) uniq.push_back(t);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<std::uint8_t> seen(num_docs(), 0);
    std::size_t count = 0;
    for (TermId t : uniq) {
      for (const Posting& p : postings[t]) {
        if (!seen[p.doc]) {
          seen[p.doc] = 1;
          ++count;
        }
      }
    }
    return count;
  }

  void finalize() {
    avg_dl_ = 0.0;
    for (auto len : doc_len) avg_dl_ += static_cast<double>(len);
    if (!doc_len.empty()) avg_dl_ /= static_cast<double>(doc_len.size());
    doc_number_.clear();
    doc_number_.reserve(doc_ids.size());
    for (std::uint32_t i = 0; i < doc_ids.size(); ++i) doc_number_[doc_ids[i]] = i;
    doc_terms_.assign(num_docs(), {});
    for (TermId t = 0; t < postings.size(); ++t)
      for (const Posting& p : postings[t]) doc_terms_[p.doc].emplace_back(t, p.tf);
  }

 private:
  double avg_dl_ = 0.0;
  std::unordered_map<std::string, std::uint32_t> doc_number_;
  std::vector<std::vector<std::pair<TermId, std::uint32_t>>> doc_terms_;
};

inline InvertedIndex build_index(const Corpus& corpus) {
  if (corpus.docs.empty()) throw std::invalid_argument("build_index: empty corpus");

  std::vector<std::uint32_t> order(corpus.docs.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return corpus.docs[a].doc_id < corpus.docs[b].doc_id;
  });

  InvertedIndex index;
  index.vocab = corpus.vocab;
  index.doc_ids.reserve(corpus.docs.size());
  index.doc_len.reserve(corpus.docs.size());
  index.postings.assign(corpus.vocab.size(), {});

  std::vector<std::uint32_t> tf_buf(corpus.vocab.size(), 0);
  for (std::uint32_t num = 0; num < order.size(); ++num) {
    const Document& doc = corpus.docs[order[num]];
    index.doc_ids.push_back(doc.doc_id);
    index.doc_len.push_back(doc.length());
    std::vector<TermId> touched;
    for (TermId t : doc.tokens) {
      if (tf_buf[t] == 0) touched.push_back(t);
      ++tf_buf[t];
    }
    std::sort(touched.begin(), touched.end());
    for (TermId t : touched) {
      index.postings[t].push_back({num, tf_buf[t]});
      index.vocab.bump_collection_tf(t, tf_buf[t]);
      index.vocab.bump_df(t);
      tf_buf[t] = 0;
    }
  }
  index.finalize();
  return index;
}

// Okapi BM25 with +1-inside-log idf smoothing and the k3 query-frequency
// factor. Query terms are deduplicated; each distinct term contributes once
// with its query frequency qtf.
inline double bm25_score(const InvertedIndex& index, const BM25Params& params,
                         const Query& query, std::uint32_t doc) {
  if (doc >= index.num_docs())
    throw std::invalid_argument("bm25_score: doc number out of range");
  std::vector<std::pair<TermId, std::uint32_t>> qterms;  // (term, qtf), term asc
  {
    std::vector<TermId> ids;
    for (TermId t : query.tokens)
      if (t != kOovTerm) ids.push_back(t);
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size();) {
      std::size_t j = i;
      while (j < ids.size() && ids[j] == ids[i]) ++j;
      qterms.emplace_back(ids[i], static_cast<std::uint32_t>(j - i));
      i = j;
    }
  }
  const double dl = static_cast<double>(index.doc_len[doc]);
  const double norm = 1.0 - params.b + params.b * dl / index.avg_doc_len();
  double score = 0.0;
  for (const auto& [term, qtf] : qterms) {
    const double tf = static_cast<double>(index.tf(term, doc));
    if (tf <= 0.0) continue;
    const double tf_part = tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
    const double qtf_part =
        (params.k3 + 1.0) * static_cast<double>(qtf) / (params.k3 + static_cast<double>(qtf));
    score += index.idf(term) * tf_part * qtf_part;
  }
  return score;
}

inline double bm25_score(const InvertedIndex& index, const BM25Params& params,
                         const Query& query, const std::string& doc_id) {
  return bm25_score(index, params, query, index.doc_number(doc_id));
}

// Top-k retrieval. Only documents containing at least one query term are
// candidates; ordering is (score descending, doc number ascending), and the
// doc numbers themselves follow ascending doc_id.
inline std::vector<ScoredDoc> retrieve_top_k(const InvertedIndex& index,
                                             const BM25Params& params,
                                             const Query& query, std::size_t k) {
  if (k == 0) throw std::invalid_argument("retrieve_top_k: k must be >= 1");
  std::vector<std::pair<TermId, std::uint32_t>> qterms;
  {
    std::vector<TermId> ids;
    for (TermId t : query.tokens)
      if (t != kOovTerm) ids.push_back(t);
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size();) {
      std::size_t j = i;
      while (j < ids.size() && ids[j] == ids[i]) ++j;
      qterms.emplace_back(ids[i], static_cast<std::uint32_t>(j - i));
      i = j;
    }
  }
  std::vector<double> score(index.num_docs(), 0.0);
  std::vector<std::uint8_t> seen(index.num_docs(), 0);
  std::vector<std::uint32_t> touched;
  for (const auto& [term, qtf] : qterms) {
    const double idf = index.idf(term);
    const double qtf_part =
        (params.k3 + 1.0) * static_cast<double>(qtf) / (params.k3 + static_cast<double>(qtf));
    for (const Posting& p : index.postings[term]) {
      const double dl = static_cast<double>(index.doc_len[p.doc]);
      const double norm = 1.0 - params.b + params.b * dl / index.avg_doc_len();
      const double tf = static_cast<double>(p.tf);
      score[p.doc] += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm) * qtf_part;
      if (!seen[p.doc]) {
        seen[p.doc] = 1;
        touched.push_back(p.doc);
      }
    }
  }
  std::vector<ScoredDoc> hits;
  hits.reserve(touched.size());
  for (std::uint32_t d : touched)
    if (score[d] > 0.0) hits.push_back({d, score[d]});
  std::sort(hits.begin(), hits.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc < b.doc;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

// Index file ("WRIX1"): little-endian sections for the vocabulary, the doc
// table, and the postings. Full layout is documented in the README.
inline constexpr char kIndexMagic[] = "WRIX1";
inline constexpr std::uint32_t kIndexVersion = 1;

struct FileStamp {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string tool_version;
};

inline void save_index(const InvertedIndex& index, const std::string& path,
                       const FileStamp& stamp) {
  write_file_atomic(path, [&](std::ostream& out) {
    out.write(kIndexMagic, 5);
    write_u32(out, kIndexVersion);
    write_string(out, stamp.tool_version);
    write_u64(out, stamp.config_hash);
    write_u64(out, stamp.seed);
    write_u32(out, static_cast<std::uint32_t>(index.vocab.size()));
    for (TermId t = 0; t < index.vocab.size(); ++t) {
      write_string(out, index.vocab.term(t));
      write_u64(out, index.vocab.collection_tf(t));
      write_u32(out, index.vocab.df(t));
    }
    write_u32(out, static_cast<std::uint32_t>(index.num_docs()));
    for (std::uint32_t d = 0; d < index.num_docs(); ++d) {
      write_string(out, index.doc_ids[d]);
      write_u32(out, index.doc_len[d]);
    }
    for (TermId t = 0; t < index.vocab.size(); ++t) {
      const auto& list = index.postings[t];
      write_u32(out, static_cast<std::uint32_t>(list.size()));
      for (const Posting& p : list) {
        write_u32(out, p.doc);
        write_u32(out, p.tf);
      }
    }
  }, /*binary=*/true);
}

inline InvertedIndex load_index(const std::string& path, FileStamp* stamp = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open index file: " + path);
  expect_magic(in, kIndexMagic);
  const std::uint32_t version = read_u32(in);
  if (version != kIndexVersion)
    throw std::runtime_error("unsupported index version " + std::to_string(version));
  FileStamp local;
  local.tool_version = read_string(in);
  local.config_hash = read_u64(in);
  local.seed = read_u64(in);
  if (stamp) *stamp = local;

  InvertedIndex index;
  const std::uint32_t vocab_size = read_u32(in);
  for (std::uint32_t t = 0; t < vocab_size; ++t) {
    const std::string term = read_string(in);
    const TermId id = index.vocab.add(term);
    const std::uint64_t ctf = read_u64(in);
    const std::uint32_t df = read_u32(in);
    index.vocab.set_counts(id, ctf, df);
  }
  const std::uint32_t num_docs = read_u32(in);
  index.doc_ids.reserve(num_docs);
  index.doc_len.reserve(num_docs);
  for (std::uint32_t d = 0; d < num_docs; ++d) {
    index.doc_ids.push_back(read_string(in));
    index.doc_len.push_back(read_u32(in));
  }
  index.postings.assign(vocab_size, {});
  for (std::uint32_t t = 0; t < vocab_size; ++t) {
    const std::uint32_t n = read_u32(in);
    index.postings[t].reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::uint32_t doc = read_u32(in);
      const std::uint32_t tf = read_u32(in);
      index.postings[t].push_back({doc, tf});
    }
    if (index.postings[t].size() != index.vocab.df(t))
      throw std::runtime_error("index file corrupt: df mismatch for term " +
                               index.vocab.term(t));
  }
  index.finalize();
  return index;
}

}  // namespace weakrank

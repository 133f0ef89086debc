#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "weakrank/rng.hpp"

namespace weakrank {

using TermId = std::uint32_t;

// Reserved id for query terms that never occur in the corpus. Such terms are
// skipped by every input representation and by the scorer.
inline constexpr TermId kOovTerm = std::numeric_limits<TermId>::max();

// Lowercase, split on any non-alphanumeric byte, drop empty tokens.
// Locale-independent and idempotent on its own space-joined output.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    const bool alnum = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    if (alnum) {
      cur.push_back(static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i];
  }
  return s;
}

class Vocabulary {
 public:
  TermId add(const std::string& term) {
    auto it = ids_.find(term);
    if (it != ids_.end()) return it->second;
    const TermId id = static_cast<TermId>(terms_.size());
    ids_.emplace(term, id);
    terms_.push_back(term);
    collection_tf_.push_back(0);
    df_.push_back(0);
    return id;
  }

  std::optional<TermId> lookup(const std::string& term) const {
    auto it = ids_.find(term);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& term(TermId id) const { return terms_.at(id); }
  std::size_t size() const { return terms_.size(); }

  std::uint64_t collection_tf(TermId id) const { return collection_tf_.at(id); }
  std::uint32_t df(TermId id) const { return df_.at(id); }

  void bump_collection_tf(TermId id, std::uint64_t n) { collection_tf_.at(id) += n; }
  void bump_df(TermId id) { df_.at(id) += 1; }

  // Used by the index deserializer, which restores counts verbatim.
  void set_counts(TermId id, std::uint64_t ctf, std::uint32_t df) {
    collection_tf_.at(id) = ctf;
    df_.at(id) = df;
  }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, TermId> ids_;
  std::vector<std::uint64_t> collection_tf_;
  std::vector<std::uint32_t> df_;
};

struct Document {
  std::string doc_id;
  std::vector<TermId> tokens;  // in corpus order; every id < vocab size
  std::uint32_t length() const { return static_cast<std::uint32_t>(tokens.size()); }
};

struct Query {
  std::string query_id;
  std::vector<TermId> tokens;  // may contain kOovTerm
  std::string text;            // normalized (tokenized, space-joined)

  std::size_t in_vocab_count() const {
    std::size_t n = 0;
    for (TermId t : tokens)
      if (t != kOovTerm) ++n;
    return n;
  }
};

struct RawQuery {
  std::string query_id;
  std::string text;
};

struct Corpus {
  std::vector<Document> docs;
  Vocabulary vocab;
};

using StopwordSet = std::unordered_set<std::string>;

inline StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stopword file: " + path);
  StopwordSet set;
  std::string line;
  while (std::getline(in, line)) {
    for (const auto& tok : tokenize(line)) set.insert(tok);
  }
  return set;
}

// Corpus TSV: one document per line, `doc_id <TAB> text`, UTF-8, LF.
inline Corpus load_corpus_tsv(const std::string& path,
                              const StopwordSet* stopwords = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  Corpus corpus;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected doc_id<TAB>text");
    std::string doc_id = line.substr(0, tab);
    if (doc_id.empty())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty doc_id");
    if (!seen_ids.insert(doc_id).second)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": duplicate doc_id " + doc_id);
    Document doc;
    doc.doc_id = std::move(doc_id);
    for (auto& tok : tokenize(std::string_view(line).substr(tab + 1))) {
      if (stopwords && stopwords->count(tok)) continue;
      doc.tokens.push_back(corpus.vocab.add(tok));
    }
    corpus.docs.push_back(std::move(doc));
  }
  if (corpus.docs.empty()) throw std::runtime_error("empty corpus: " + path);
  return corpus;
}

// Query file: `query_id <TAB> text` per line.
inline std::vector<RawQuery> load_queries_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open query file: " + path);
  std::vector<RawQuery> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected query_id<TAB>text");
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

// Map raw query text onto vocabulary ids; unknown terms become kOovTerm.
inline Query make_query(const Vocabulary& vocab, const std::string& query_id,
                        const std::string& text,
                        const StopwordSet* stopwords = nullptr) {
  Query q;
  q.query_id = query_id;
  std::vector<std::string> kept;
  for (auto& tok : tokenize(text)) {
    if (stopwords && stopwords->count(tok)) continue;
    auto id = vocab.lookup(tok);
    q.tokens.push_back(id ? *id : kOovTerm);
    kept.push_back(tok);
  }
  q.text = join_tokens(kept);
  return q;
}

inline bool contains_url_fragment(const std::string& text) {
  static const char* kFragments[] = {"http", "www.", ".com", ".net", ".org", ".edu"};
  std::string lower;
  lower.reserve(text.size());
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    lower.push_back(static_cast<char>(c));
  }
  for (const char* frag : kFragments)
    if (lower.find(frag) != std::string::npos) return true;
  return false;
}

// Training-query filter: drops navigational queries (URL substrings),
// normalizes to alphanumeric tokens, deduplicates on the normalized text,
// drops queries present in the evaluation set, and keeps only queries with
// at least `min_hits` matching documents. `hit_count` receives the query's
// token ids and returns the number of documents matching at least one term.
template <typename HitCount>
std::vector<Query> filter_training_queries(const std::vector<RawQuery>& raw,
                                           const Vocabulary& vocab,
                                           HitCount&& hit_count,
                                           std::size_t min_hits,
                                           const std::vector<RawQuery>& eval_queries = {},
                                           const StopwordSet* stopwords = nullptr) {
  std::unordered_set<std::string> excluded;
  for (const auto& e : eval_queries)
    excluded.insert(join_tokens(tokenize(e.text)));

  std::vector<Query> kept;
  std::unordered_set<std::string> seen;
  for (const auto& rq : raw) {
    if (contains_url_fragment(rq.text)) continue;
    Query q = make_query(vocab, rq.query_id, rq.text, stopwords);
    if (q.tokens.empty()) continue;
    if (excluded.count(q.text)) continue;
    if (!seen.insert(q.text).second) continue;
    if (hit_count(q.tokens) < min_hits) continue;
    kept.push_back(std::move(q));
  }
  return kept;
}

// Disjoint seeded partition; `fraction` of the queries (rounded) go to train.
inline std::pair<std::vector<Query>, std::vector<Query>> split_train_validation(
    const std::vector<Query>& queries, double fraction, std::uint64_t seed) {
  if (queries.size() < 2)
    throw std::invalid_argument("split_train_validation: need at least 2 queries");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split_train_validation: fraction must be in (0, 1)");
  std::vector<std::size_t> order(queries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);
  auto n_train = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(queries.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, queries.size() - 1);
  std::pair<std::vector<Query>, std::vector<Query>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.first : out.second).push_back(queries[order[i]]);
  }
  return out;
}

}  // namespace weakrank

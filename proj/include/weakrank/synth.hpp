#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "weakrank/eval.hpp"
#include "weakrank/io.hpp"
#include "weakrank/rng.hpp"

namespace weakrank {

// Synthetic retrieval benchmark. Every concept has two surface forms, a
// primary word and a synonym; documents mention their topic concepts through
// a random mix of the two, plus stray single mentions of off-topic concepts
// and Zipf-distributed filler words. Queries use primary forms only, and a
// document is relevant when every query concept is mentioned (either form)
// at least `relevant_min_mentions` times. A lexical ranker only sees the
// primary-form matches, so documents that lean on the synonym form are
// systematically under-ranked while the mention oracle counts them fully.
struct SynthSpec {
  std::size_t num_docs = 5000;
  std::size_t num_concepts = 150;
  std::size_t num_fillers = 200;
  std::size_t num_train_queries = 2000;
  std::size_t num_test_queries = 100;
  std::size_t num_supervised_queries = 30;
  double primary_prob = 0.45;       // chance a topical mention uses the primary form
  double topic_zipf = 0.3;          // skew of the document topic distribution
  double query_zipf = 0.0;          // flatter skew for query concepts (coverage)
  std::size_t min_topics = 1, max_topics = 2;
  std::size_t min_mentions = 6, max_mentions = 9;
  std::size_t max_strays = 5;       // off-topic single mentions per document
  std::size_t min_filler = 25, max_filler = 50;
  double two_concept_query_prob = 0.5;
  double query_filler_prob = 0.0;   // train queries only: appended noise word
  std::size_t relevant_min_mentions = 2;
  std::size_t strong_mentions = 9;  // grade-2 threshold on total query-concept mentions
  std::size_t qrels_nonrelevant_sample = 20;
  double junk_query_prob = 0.02;    // URL-flavored queries, removed by the filter
  std::uint64_t seed = 42;
};

struct SynthData {
  std::vector<std::pair<std::string, std::string>> docs;  // (doc_id, text)
  std::vector<RawQuery> train_queries;
  std::vector<RawQuery> test_queries;
  std::vector<RawQuery> supervised_queries;
  Qrels test_qrels;
  Qrels supervised_qrels;
};

namespace detail {

class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double exponent) : cdf_(n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += 1.0 / std::pow(static_cast<double>(i + 1), exponent);
      cdf_[i] = sum;
    }
    for (auto& c : cdf_) c /= sum;
  }

  std::size_t sample(Rng& rng) const {
    const double u = rng.next_double();
    return static_cast<std::size_t>(
        std::lower_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

inline std::string padded(const char* prefix, std::size_t n, int width) {
  std::string digits = std::to_string(n);
  std::string out(prefix);
  for (int i = static_cast<int>(digits.size()); i < width; ++i) out.push_back('0');
  return out + digits;
}

}  // namespace detail

inline SynthData generate_synthetic(const SynthSpec& spec) {
  SynthData data;
  const Rng base(spec.seed);

  // three surface forms per concept: the primary name (used by queries), a
  // synonym, and a context word that co-occurs with the topic but is never
  // queried
  std::vector<std::string> primary(spec.num_concepts), synonym(spec.num_concepts),
      context(spec.num_concepts);
  for (std::size_t c = 0; c < spec.num_concepts; ++c) {
    primary[c] = detail::padded("p", c, 4);
    synonym[c] = detail::padded("s", c, 4);
    context[c] = detail::padded("c", c, 4);
  }
  std::vector<std::string> filler(spec.num_fillers);
  for (std::size_t f = 0; f < spec.num_fillers; ++f)
    filler[f] = detail::padded("f", f, 4);

  const detail::ZipfSampler concept_dist(spec.num_concepts, spec.topic_zipf);
  const detail::ZipfSampler query_dist(spec.num_concepts, spec.query_zipf);
  const detail::ZipfSampler filler_dist(spec.num_fillers, 1.0);

  // docs + per-doc mention counts per concept (primary + synonym combined)
  std::vector<std::unordered_map<std::size_t, std::size_t>> mentions(spec.num_docs);
  std::vector<std::vector<std::size_t>> topics(spec.num_docs);
  for (std::size_t d = 0; d < spec.num_docs; ++d) {
    Rng rng = base.fork(0x0D0C0000ULL + d);
    std::set<std::size_t> topic_set;
    const std::size_t n_topics =
        spec.min_topics + rng.next_below(spec.max_topics - spec.min_topics + 1);
    while (topic_set.size() < n_topics) topic_set.insert(concept_dist.sample(rng));
    topics[d].assign(topic_set.begin(), topic_set.end());

    std::vector<std::string> tokens;
    for (std::size_t c : topics[d]) {
      const std::size_t n_mentions =
          spec.min_mentions + rng.next_below(spec.max_mentions - spec.min_mentions + 1);
      mentions[d][c] += n_mentions;
      for (std::size_t i = 0; i < n_mentions; ++i)
        tokens.push_back(rng.next_bool(spec.primary_prob) ? primary[c] : synonym[c]);
      const std::size_t n_context = 1 + rng.next_below(3);
      for (std::size_t i = 0; i < n_context; ++i) tokens.push_back(context[c]);
    }
    // stray single mentions follow the query distribution, so frequently
    // queried concepts accumulate plenty of one-off lexical noise
    const std::size_t n_strays = rng.next_below(spec.max_strays + 1);
    for (std::size_t i = 0; i < n_strays; ++i) {
      const std::size_t c = query_dist.sample(rng);
      mentions[d][c] += 1;
      tokens.push_back(primary[c]);
    }
    const std::size_t n_filler =
        spec.min_filler + rng.next_below(spec.max_filler - spec.min_filler + 1);
    for (std::size_t i = 0; i < n_filler; ++i)
      tokens.push_back(filler[filler_dist.sample(rng)]);

    shuffle(tokens, rng);
    std::string text;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) text.push_back(' ');
      text += tokens[i];
    }
    data.docs.emplace_back(detail::padded("D", d, 5), std::move(text));
  }

  // relevant docs per concept under the mention-count oracle
  std::vector<std::vector<std::size_t>> docs_by_concept(spec.num_concepts);
  for (std::size_t d = 0; d < spec.num_docs; ++d)
    for (const auto& [c, n] : mentions[d])
      if (n >= spec.relevant_min_mentions) docs_by_concept[c].push_back(d);
  for (auto& v : docs_by_concept) std::sort(v.begin(), v.end());

  auto make_query = [&](Rng& rng, std::vector<std::size_t>& concepts) -> std::string {
    concepts.clear();
    if (rng.next_bool(spec.two_concept_query_prob)) {
      // take two topics of one actual document so joint relevance is non-empty
      for (std::size_t tries = 0; tries < 64; ++tries) {
        const std::size_t d = rng.next_below(spec.num_docs);
        if (topics[d].size() >= 2) {
          std::size_t i = rng.next_below(topics[d].size());
          std::size_t j = rng.next_below(topics[d].size() - 1);
          if (j >= i) ++j;
          concepts = {std::min(topics[d][i], topics[d][j]),
                      std::max(topics[d][i], topics[d][j])};
          break;
        }
      }
    }
    if (concepts.empty()) concepts = {query_dist.sample(rng)};
    std::string text;
    for (std::size_t i = 0; i < concepts.size(); ++i) {
      if (i) text.push_back(' ');
      text += primary[concepts[i]];
    }
    return text;
  };

  auto relevant_docs = [&](const std::vector<std::size_t>& concepts) {
    std::vector<std::size_t> out = docs_by_concept[concepts[0]];
    for (std::size_t i = 1; i < concepts.size(); ++i) {
      std::vector<std::size_t> merged;
      std::set_intersection(out.begin(), out.end(), docs_by_concept[concepts[i]].begin(),
                            docs_by_concept[concepts[i]].end(),
                            std::back_inserter(merged));
      out = std::move(merged);
    }
    return out;
  };

  auto emit_judged_queries = [&](std::size_t count, const char* prefix,
                                 std::uint64_t stream, std::vector<RawQuery>& queries,
                                 Qrels& qrels,
                                 std::unordered_set<std::string>& used_texts) {
    Rng rng = base.fork(stream);
    std::size_t emitted = 0;
    while (emitted < count) {
      std::vector<std::size_t> concepts;
      const std::string text = make_query(rng, concepts);
      if (used_texts.count(text)) continue;
      const auto rel = relevant_docs(concepts);
      if (rel.size() < 3) continue;
      used_texts.insert(text);
      const std::string qid = detail::padded(prefix, emitted, 4);
      queries.push_back({qid, text});
      for (std::size_t d : rel) {
        std::size_t total = 0;
        for (std::size_t c : concepts) total += mentions[d].at(c);
        qrels[qid][data.docs[d].first] = total >= spec.strong_mentions ? 2 : 1;
      }
      // a few judged non-relevant documents (single stray mentions and misses)
      std::unordered_set<std::size_t> rel_set(rel.begin(), rel.end());
      std::size_t added = 0;
      for (std::size_t tries = 0;
           tries < 10 * spec.qrels_nonrelevant_sample &&
           added < spec.qrels_nonrelevant_sample;
           ++tries) {
        const std::size_t d = rng.next_below(spec.num_docs);
        if (rel_set.count(d)) continue;
        if (qrels[qid].count(data.docs[d].first)) continue;
        qrels[qid][data.docs[d].first] = 0;
        ++added;
      }
      ++emitted;
    }
  };

  std::unordered_set<std::string> used_texts;
  emit_judged_queries(spec.num_test_queries, "EQ", 0x7E570000ULL, data.test_queries,
                      data.test_qrels, used_texts);
  emit_judged_queries(spec.num_supervised_queries, "SQ", 0x50B00000ULL,
                      data.supervised_queries, data.supervised_qrels, used_texts);

  {
    Rng rng = base.fork(0x7EA10000ULL);
    for (std::size_t i = 0; i < spec.num_train_queries; ++i) {
      const std::string qid = detail::padded("TQ", i, 5);
      if (rng.next_bool(spec.junk_query_prob)) {
        data.train_queries.push_back({qid, "http www." + primary[concept_dist.sample(rng)] + ".com"});
        continue;
      }
      std::vector<std::size_t> concepts;
      std::string text = make_query(rng, concepts);
      // log-style noise: many raw variants of the same intent survive
      // deduplication and keep every concept covered on the query side even
      // after the evaluation queries are excluded from training
      if (rng.next_bool(spec.query_filler_prob))
        text += " " + filler[filler_dist.sample(rng)];
      data.train_queries.push_back({qid, std::move(text)});
    }
  }
  return data;
}

inline void write_synthetic(const SynthData& data, const std::string& dir,
                            const std::vector<std::string>& header_comments = {}) {
  auto write_queries = [&](const std::vector<RawQuery>& queries, const std::string& path) {
    write_file_atomic(path, [&](std::ostream& out) {
      for (const auto& c : header_comments) out << "# " << c << "\n";
      for (const auto& q : queries) out << q.query_id << '\t' << q.text << "\n";
    });
  };
  write_file_atomic(dir + "/corpus.tsv", [&](std::ostream& out) {
    for (const auto& c : header_comments) out << "# " << c << "\n";
    for (const auto& [id, text] : data.docs) out << id << '\t' << text << "\n";
  });
  write_queries(data.train_queries, dir + "/queries_train.tsv");
  write_queries(data.test_queries, dir + "/queries_test.tsv");
  write_queries(data.supervised_queries, dir + "/queries_supervised.tsv");
  save_qrels(data.test_qrels, dir + "/qrels_test.txt", header_comments);
  save_qrels(data.supervised_qrels, dir + "/qrels_supervised.txt", header_comments);
}

}  // namespace weakrank

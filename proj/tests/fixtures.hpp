#pragma once

#include <string>
#include <vector>

#include "weakrank/corpus.hpp"
#include "weakrank/index.hpp"
#include "weakrank/rng.hpp"

namespace fixtures {

inline weakrank::Corpus corpus_from_texts(
    const std::vector<std::pair<std::string, std::string>>& docs) {
  weakrank::Corpus corpus;
  for (const auto& [id, text] : docs) {
    weakrank::Document doc;
    doc.doc_id = id;
    for (const auto& tok : weakrank::tokenize(text))
      doc.tokens.push_back(corpus.vocab.add(tok));
    corpus.docs.push_back(std::move(doc));
  }
  return corpus;
}

// Three tiny documents with hand-countable statistics:
//   d1: "cat dog cat"            (len 3)
//   d2: "dog bird"               (len 2)
//   d3: "fish bird bird fish"    (len 4)
inline weakrank::Corpus hand_corpus() {
  return corpus_from_texts({{"d1", "cat dog cat"},
                            {"d2", "dog bird"},
                            {"d3", "fish bird bird fish"}});
}

// Random corpus over a small vocabulary, for property tests.
inline weakrank::Corpus random_corpus(std::size_t num_docs, std::size_t vocab,
                                      std::size_t min_len, std::size_t max_len,
                                      std::uint64_t seed) {
  weakrank::Rng rng(seed);
  std::vector<std::pair<std::string, std::string>> docs;
  for (std::size_t d = 0; d < num_docs; ++d) {
    const std::size_t len = min_len + rng.next_below(max_len - min_len + 1);
    std::string text;
    for (std::size_t i = 0; i < len; ++i) {
      if (i) text.push_back(' ');
      text += "t" + std::to_string(rng.next_below(vocab));
    }
    docs.emplace_back("doc" + std::to_string(1000 + d), text);
  }
  return corpus_from_texts(docs);
}

inline weakrank::Query query_of(const weakrank::Vocabulary& vocab,
                                const std::string& text,
                                const std::string& id = "q1") {
  return weakrank::make_query(vocab, id, text);
}

}  // namespace fixtures

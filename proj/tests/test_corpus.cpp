#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "weakrank/corpus.hpp"
#include "weakrank/index.hpp"

using namespace weakrank;

TEST_CASE("tokenize basics", "[corpus]") {
  CHECK(tokenize("Neural Ranking!") == std::vector<std::string>{"neural", "ranking"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("BM25-model") == std::vector<std::string>{"bm25", "model"});
  CHECK(tokenize("  \t\n ") == std::vector<std::string>{});
  CHECK(tokenize("a,b;;c") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("tokenize is idempotent on its own joined output", "[corpus]") {
  Rng rng(7);
  const std::string alphabet = "aB9 .,!-_/#\t太";
  for (int iter = 0; iter < 200; ++iter) {
    std::string text;
    const std::size_t len = rng.next_below(40);
    for (std::size_t i = 0; i < len; ++i)
      text.push_back(alphabet[rng.next_below(alphabet.size())]);
    const auto once = tokenize(text);
    const auto twice = tokenize(join_tokens(once));
    CHECK(once == twice);
  }
}

TEST_CASE("vocabulary round trip and counts", "[corpus]") {
  const Corpus corpus = fixtures::hand_corpus();
  for (TermId i = 0; i < corpus.vocab.size(); ++i)
    CHECK(corpus.vocab.lookup(corpus.vocab.term(i)) == i);
  CHECK(corpus.vocab.size() == 4);  // cat dog bird fish

  const InvertedIndex index = build_index(corpus);
  for (TermId i = 0; i < index.vocab.size(); ++i) {
    CHECK(index.vocab.df(i) <= index.num_docs());
    CHECK(index.vocab.collection_tf(i) >= index.vocab.df(i));
  }
  const TermId cat = *index.vocab.lookup("cat");
  CHECK(index.vocab.collection_tf(cat) == 2);
  CHECK(index.vocab.df(cat) == 1);
}

TEST_CASE("corpus TSV loading", "[corpus]") {
  const auto dir = std::filesystem::temp_directory_path() / "weakrank_corpus_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "corpus.tsv").string();
  {
    std::ofstream out(path);
    out << "# comment line\n";
    out << "d1\tHello, World!\n";
    out << "d2\tanother doc\n";
  }
  const Corpus corpus = load_corpus_tsv(path);
  REQUIRE(corpus.docs.size() == 2);
  CHECK(corpus.docs[0].doc_id == "d1");
  CHECK(corpus.docs[0].length() == 2);

  {
    std::ofstream out(path);
    out << "d1\ta\nd1\tb\n";
  }
  CHECK_THROWS_AS(load_corpus_tsv(path), std::runtime_error);

  {
    std::ofstream out(path);
    out << "";
  }
  CHECK_THROWS_AS(load_corpus_tsv(path), std::runtime_error);
}

TEST_CASE("query mapping marks OOV terms", "[corpus]") {
  const Corpus corpus = fixtures::hand_corpus();
  const Query q = make_query(corpus.vocab, "q1", "cat zebra");
  REQUIRE(q.tokens.size() == 2);
  CHECK(q.tokens[0] == *corpus.vocab.lookup("cat"));
  CHECK(q.tokens[1] == kOovTerm);
  CHECK(q.in_vocab_count() == 1);
}

TEST_CASE("training query filter", "[corpus]") {
  const Corpus corpus = fixtures::corpus_from_texts({
      {"d1", "cheap flights to rome"},
      {"d2", "rome hotels cheap"},
      {"d3", "flights and hotels"},
  });
  const InvertedIndex index = build_index(corpus);
  auto hits = [&](const std::vector<TermId>& tokens) {
    return index.matching_doc_count(tokens);
  };

  const std::vector<RawQuery> raw = {
      {"q1", "www.example.com cheap flights"},  // URL fragment
      {"q2", "cheap flights"},
      {"q3", "Cheap   FLIGHTS!"},  // duplicate of q2 after normalization
      {"q4", "zebra stripes"},     // zero hits
      {"q5", "rome hotels"},
      {"q6", "held out"},
  };
  const std::vector<RawQuery> eval = {{"e1", "held out"}};

  const auto kept = filter_training_queries(raw, index.vocab, hits, 2, eval);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].query_id == "q2");
  CHECK(kept[1].query_id == "q5");

  SECTION("output is a subset of input and filtering is idempotent") {
    std::vector<RawQuery> again;
    for (const auto& q : kept) again.push_back({q.query_id, q.text});
    const auto twice = filter_training_queries(again, index.vocab, hits, 2, eval);
    REQUIRE(twice.size() == kept.size());
    for (std::size_t i = 0; i < twice.size(); ++i) CHECK(twice[i].text == kept[i].text);
  }

  SECTION("min_hits threshold removes sparse queries") {
    const std::vector<RawQuery> one = {{"q", "rome"}};
    CHECK(filter_training_queries(one, index.vocab, hits, 3, {}).empty());
    CHECK(filter_training_queries(one, index.vocab, hits, 2, {}).size() == 1);
  }
}

TEST_CASE("train/validation split", "[corpus]") {
  std::vector<Query> queries;
  for (int i = 0; i < 100; ++i)
    queries.push_back({"q" + std::to_string(i), {}, "text " + std::to_string(i)});

  const auto [train, val] = split_train_validation(queries, 0.8, 11);
  CHECK(train.size() == 80);
  CHECK(val.size() == 20);

  const auto [train2, val2] = split_train_validation(queries, 0.8, 11);
  for (std::size_t i = 0; i < train.size(); ++i)
    CHECK(train[i].query_id == train2[i].query_id);

  // disjoint partition
  std::unordered_set<std::string> seen;
  for (const auto& q : train) seen.insert(q.query_id);
  for (const auto& q : val) CHECK(seen.insert(q.query_id).second);
  CHECK(seen.size() == 100);

  CHECK_THROWS_AS(split_train_validation(queries, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_train_validation(queries, 1.0, 1), std::invalid_argument);
  std::vector<Query> one = {queries[0]};
  CHECK_THROWS_AS(split_train_validation(one, 0.5, 1), std::invalid_argument);
}

TEST_CASE("stopword file drops terms everywhere", "[corpus]") {
  const auto dir = std::filesystem::temp_directory_path() / "weakrank_corpus_test";
  std::filesystem::create_directories(dir);
  const auto stop_path = (dir / "stop.txt").string();
  {
    std::ofstream out(stop_path);
    out << "the\nand\n";
  }
  const StopwordSet stop = load_stopwords(stop_path);
  const auto corpus_path = (dir / "stop_corpus.tsv").string();
  {
    std::ofstream out(corpus_path);
    out << "d1\tthe cat and the hat\n";
  }
  const Corpus corpus = load_corpus_tsv(corpus_path, &stop);
  CHECK(corpus.docs[0].length() == 2);  // cat hat
  const Query q = make_query(corpus.vocab, "q", "the cat", &stop);
  CHECK(q.tokens.size() == 1);
}

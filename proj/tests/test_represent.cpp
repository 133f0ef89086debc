#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "weakrank/represent.hpp"

using namespace weakrank;

namespace {

// corpus with hand-countable tf/df:
//   da: "cat dog cat"          len 3
//   db: "dog bird"             len 2
//   dc: "fish bird bird fish"  len 4
struct Fixture {
  Corpus corpus = fixtures::hand_corpus();
  InvertedIndex index = build_index(corpus);
};

}  // namespace

TEST_CASE("dense feature layout and hand counts", "[represent]") {
  Fixture fx;
  const auto d1 = fx.index.doc_number("d1");
  const auto d3 = fx.index.doc_number("d3");

  SECTION("empty query gives stats plus zero padding") {
    const Query q = fixtures::query_of(fx.index.vocab, "");
    const Vec v = dense_features(fx.index, q, d1, 5);
    REQUIRE(v.size() == 13);
    CHECK(v(0) == 3.0);                    // N
    CHECK(v(1) == Catch::Approx(3.0));     // avg_dl = (3+2+4)/3
    CHECK(v(2) == 3.0);                    // l_d
    for (int i = 3; i < 13; ++i) CHECK(v(i) == 0.0);
  }

  SECTION("two-term query fills the first two slots") {
    const Query q = fixtures::query_of(fx.index.vocab, "cat bird");
    const Vec v = dense_features(fx.index, q, d1, 5);
    REQUIRE(v.size() == 13);
    CHECK(v(3) == 1.0);  // df(cat)
    CHECK(v(4) == 2.0);  // tf(cat, d1)
    CHECK(v(5) == 2.0);  // df(bird)
    CHECK(v(6) == 0.0);  // tf(bird, d1)
    for (int i = 7; i < 13; ++i) CHECK(v(i) == 0.0);
  }

  SECTION("query terms beyond k are dropped and OOV terms are skipped") {
    const Query q = fixtures::query_of(fx.index.vocab, "zebra cat dog bird fish cat dog");
    const Vec v = dense_features(fx.index, q, d1, 2);
    REQUIRE(v.size() == 7);
    CHECK(v(3) == 1.0);  // df(cat), zebra skipped
    CHECK(v(4) == 2.0);
    CHECK(v(5) == 2.0);  // df(dog)
    CHECK(v(6) == 1.0);  // tf(dog, d1)
  }

  SECTION("pair-wise layout appends the second document block") {
    const Query q = fixtures::query_of(fx.index.vocab, "cat bird");
    const Vec v = dense_features(fx.index, q, d1, d3, 5);
    REQUIRE(v.size() == 19);
    CHECK(v(13) == 4.0);  // l_d2
    CHECK(v(14) == 0.0);  // tf(cat, d3)
    CHECK(v(15) == 2.0);  // tf(bird, d3)
    for (int i = 16; i < 19; ++i) CHECK(v(i) == 0.0);
  }
}

TEST_CASE("sparse features", "[represent]") {
  Fixture fx;
  const std::size_t v = fx.index.vocab.size();
  REQUIRE(v == 4);
  const auto d1 = fx.index.doc_number("d1");
  const auto d3 = fx.index.doc_number("d3");
  const TermId cat = *fx.index.vocab.lookup("cat");
  const TermId dog = *fx.index.vocab.lookup("dog");
  const TermId bird = *fx.index.vocab.lookup("bird");
  const TermId fish = *fx.index.vocab.lookup("fish");

  auto value_at = [](const SparseVec& sv, std::uint32_t idx) {
    for (const auto& [i, val] : sv.nz)
      if (i == idx) return val;
    return 0.0;
  };

  SECTION("point-wise blocks: collection, query, document") {
    const Query q = fixtures::query_of(fx.index.vocab, "cat cat dog");
    const SparseVec sv = sparse_features(fx.index, q, d1);
    CHECK(sv.dim == 3 * v);
    // collection block: total term frequencies
    CHECK(value_at(sv, cat) == 2.0);
    CHECK(value_at(sv, dog) == 2.0);
    CHECK(value_at(sv, bird) == 3.0);
    CHECK(value_at(sv, fish) == 2.0);
    // query block
    CHECK(value_at(sv, v + cat) == 2.0);
    CHECK(value_at(sv, v + dog) == 1.0);
    CHECK(value_at(sv, v + bird) == 0.0);
    // doc block for d1 = "cat dog cat"
    CHECK(value_at(sv, 2 * v + cat) == 2.0);
    CHECK(value_at(sv, 2 * v + dog) == 1.0);
    CHECK(value_at(sv, 2 * v + fish) == 0.0);
  }

  SECTION("empty query leaves the query block empty") {
    const Query q = fixtures::query_of(fx.index.vocab, "zebra");
    const SparseVec sv = sparse_features(fx.index, q, d1);
    for (const auto& [i, val] : sv.nz) {
      const bool in_query_block = i >= v && i < 2 * v;
      CHECK_FALSE(in_query_block);
    }
  }

  SECTION("document covering the whole vocabulary once is all ones") {
    Corpus corpus = fixtures::corpus_from_texts({{"all", "cat dog bird fish"},
                                                 {"other", "cat"}});
    const InvertedIndex idx = build_index(corpus);
    const Query q = fixtures::query_of(idx.vocab, "cat");
    const SparseVec sv = sparse_features(idx, q, idx.doc_number("all"));
    const std::size_t vv = idx.vocab.size();
    int ones = 0;
    for (const auto& [i, val] : sv.nz) {
      if (i >= 2 * vv) {
        CHECK(val == 1.0);
        ++ones;
      }
    }
    CHECK(ones == 4);
  }

  SECTION("pair-wise adds a fourth block") {
    const Query q = fixtures::query_of(fx.index.vocab, "cat");
    const SparseVec sv = sparse_features(fx.index, q, d1, d3);
    CHECK(sv.dim == 4 * v);
    CHECK(value_at(sv, 3 * v + bird) == 2.0);
    CHECK(value_at(sv, 3 * v + fish) == 2.0);
  }

  SECTION("feature builders are pure") {
    const Query q = fixtures::query_of(fx.index.vocab, "cat dog");
    const SparseVec a = sparse_features(fx.index, q, d1);
    const SparseVec b = sparse_features(fx.index, q, d1);
    CHECK(a.nz == b.nz);
    const Vec da = dense_features(fx.index, q, d1, 5);
    const Vec db = dense_features(fx.index, q, d1, 5);
    CHECK((da - db).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("embed field weighting modes", "[represent]") {
  Fixture fx;
  Rng rng(4);
  EmbeddingTable table =
      make_embedding_table(fx.index.vocab.size(), 3, rng);
  const TermId cat = *fx.index.vocab.lookup("cat");
  const TermId bird = *fx.index.vocab.lookup("bird");

  SECTION("uniform mode averages the rows") {
    const FieldTerms f = field_from_tokens({cat, bird});
    const Vec out = compose_field(f, table, WeightingMode::uniform, nullptr, nullptr);
    const Vec expected = 0.5 * (table.E.row(cat) + table.E.row(bird)).transpose();
    CHECK((out - expected).cwiseAbs().maxCoeff() < 1e-15);
  }

  SECTION("idf mode weights proportionally to idf") {
    std::vector<double> idf(fx.index.vocab.size());
    for (TermId t = 0; t < fx.index.vocab.size(); ++t) idf[t] = fx.index.idf(t);
    const FieldTerms f = field_from_tokens({cat, bird});
    FieldCache cache;
    compose_field(f, table, WeightingMode::idf, &idf, &cache);
    const double z = idf[cat] + idf[bird];
    // entries are sorted by term id; find each
    for (std::size_t i = 0; i < cache.terms.entries.size(); ++i) {
      const TermId t = cache.terms.entries[i].first;
      CHECK(cache.entry_weight[i] == Catch::Approx(idf[t] / z).margin(1e-15));
    }
  }

  SECTION("embed field output lengths follow arity") {
    // checked at the model level: 2m point-wise, 3m pair-wise
    const FieldTerms qf = field_from_tokens({cat});
    const Vec one = compose_field(qf, table, WeightingMode::uniform, nullptr, nullptr);
    CHECK(one.size() == 3);
  }
}

TEST_CASE("pretrained embedding file loading", "[represent]") {
  Fixture fx;
  Rng rng(6);
  EmbeddingTable table = make_embedding_table(fx.index.vocab.size(), 2, rng);
  const Mat before = table.E;

  const auto dir = std::filesystem::temp_directory_path() / "weakrank_repr_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "vectors.txt").string();
  {
    std::ofstream out(path);
    out << "cat 0.5 -0.25\n";
    out << "notinvocab 1 2\n";
  }
  const std::size_t loaded = load_pretrained_embeddings(path, fx.index.vocab, table);
  CHECK(loaded == 1);
  const TermId cat = *fx.index.vocab.lookup("cat");
  CHECK(table.E(cat, 0) == 0.5);
  CHECK(table.E(cat, 1) == -0.25);
  const TermId dog = *fx.index.vocab.lookup("dog");
  CHECK(table.E(dog, 0) == before(dog, 0));  // untouched rows keep random init

  {
    std::ofstream out(path);
    out << "cat 0.5\n";  // wrong dimension
  }
  CHECK_THROWS_AS(load_pretrained_embeddings(path, fx.index.vocab, table),
                  std::runtime_error);
}

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "weakrank/pipeline.hpp"

using namespace weakrank;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// small but complete synthetic setup; tuned for seconds, not quality
std::string tiny_config(const std::string& workdir) {
  return "workdir = " + workdir + "\n" +
         "seed = 7\n"
         "synth_docs = 300\n"
         "synth_concepts = 40\n"
         "synth_fillers = 80\n"
         "synth_train_queries = 120\n"
         "synth_test_queries = 12\n"
         "synth_supervised_queries = 6\n"
         "min_hits = 3\n"
         "train_depth = 20\n"
         "rerank_depth = 20\n"
         "pairs_per_query = 6\n"
         "arch = rankprob\n"
         "repr = embed\n"
         "hidden = 8,8\n"
         "embedding_dim = 8\n"
         "batch_size = 64\n"
         "epochs = 2\n"
         "learning_rate = 0.001\n"
         "dropout = 0.1\n";
}

}  // namespace

TEST_CASE("config parsing", "[config]") {
  const Config cfg = Config::from_string(
      "# a comment\n"
      "workdir = /tmp/x\n"
      "epochs = 12   # trailing comment\n"
      "learning_rate = 5e-4\n"
      "hidden = 64,32\n"
      "dense_log1p = true\n");
  CHECK(cfg.get("workdir") == "/tmp/x");
  CHECK(cfg.get_int("epochs") == 12);
  CHECK(cfg.get_double("learning_rate") == Catch::Approx(5e-4));
  CHECK(cfg.get_int_list("hidden", {}) == std::vector<int>{64, 32});
  CHECK(cfg.get_bool("dense_log1p", false));
  CHECK(cfg.get("missing", "fallback") == "fallback");
  CHECK_THROWS_AS(cfg.get("missing"), std::runtime_error);
  CHECK_THROWS_AS(Config::from_string("not a kv line\n"), std::runtime_error);
  CHECK_THROWS_AS(Config::from_string("epochs = twelve\n").get_int("epochs"),
                  std::runtime_error);

  // hash covers the raw text, so any edit changes it
  CHECK(Config::from_string("a = 1\n").hash() != Config::from_string("a = 2\n").hash());
}

TEST_CASE("synthetic data generator invariants", "[synth]") {
  SynthSpec spec;
  spec.num_docs = 200;
  spec.num_concepts = 30;
  spec.num_fillers = 50;
  spec.num_train_queries = 60;
  spec.num_test_queries = 10;
  spec.num_supervised_queries = 5;
  spec.seed = 9;
  const SynthData data = generate_synthetic(spec);

  CHECK(data.docs.size() == 200);
  CHECK(data.train_queries.size() == 60);
  CHECK(data.test_queries.size() == 10);
  CHECK(data.supervised_queries.size() == 5);

  SECTION("same seed regenerates identical data") {
    const SynthData again = generate_synthetic(spec);
    CHECK(again.docs == data.docs);
    CHECK(again.test_qrels == data.test_qrels);
  }

  SECTION("every judged query has at least 3 relevant documents") {
    for (const auto& q : data.test_queries) {
      int relevant = 0;
      for (const auto& [doc, grade] : data.test_qrels.at(q.query_id))
        if (grade > 0) ++relevant;
      CHECK(relevant >= 3);
    }
  }

  SECTION("test and supervised query texts never collide") {
    std::set<std::string> texts;
    for (const auto& q : data.test_queries) texts.insert(q.text);
    for (const auto& q : data.supervised_queries) CHECK(texts.insert(q.text).second);
  }

  SECTION("relevance tracks the combined primary+synonym mention count") {
    // rebuild mention counts from the emitted text and check a sample query
    const auto& q = data.test_queries[0];
    const auto toks = tokenize(q.text);
    REQUIRE_FALSE(toks.empty());
    for (const auto& [doc_id, grade] : data.test_qrels.at(q.query_id)) {
      const auto it = std::find_if(data.docs.begin(), data.docs.end(),
                                   [&](const auto& d) { return d.first == doc_id; });
      REQUIRE(it != data.docs.end());
      std::size_t min_count = SIZE_MAX;
      for (const auto& qt : toks) {
        REQUIRE(qt[0] == 'p');
        const std::string syn = "s" + qt.substr(1);
        std::size_t count = 0;
        for (const auto& tok : tokenize(it->second))
          if (tok == qt || tok == syn) ++count;
        min_count = std::min(min_count, count);
      }
      if (grade > 0)
        CHECK(min_count >= spec.relevant_min_mentions);
      else
        CHECK(min_count < spec.relevant_min_mentions);
    }
  }
}

TEST_CASE("pipeline stages end to end on a tiny synthetic corpus", "[pipeline]") {
  const auto dir =
      std::filesystem::temp_directory_path() / "weakrank_pipeline_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const Config cfg = Config::from_string(tiny_config(dir.string()));
  const PipelinePaths paths = pipeline_paths(cfg);

  cmd_synth(cfg);
  CHECK(std::filesystem::exists(paths.corpus));
  cmd_index(cfg);
  CHECK(std::filesystem::exists(paths.index_file()));
  cmd_generate(cfg);
  CHECK(std::filesystem::exists(paths.train_pairs()));
  const auto outcome = cmd_train(cfg);
  CHECK(outcome.result.steps > 0);
  CHECK(std::filesystem::exists(paths.checkpoint("rankprob", "embed")));
  CHECK(std::filesystem::exists(paths.loss_curve("rankprob", "embed")));
  cmd_rerank(cfg);
  CHECK(std::filesystem::exists(paths.bm25_run()));
  CHECK(std::filesystem::exists(paths.model_run("rankprob", "embed")));

  const auto eval_outcome =
      cmd_evaluate(cfg, {paths.bm25_run(), paths.model_run("rankprob", "embed")});
  REQUIRE(eval_outcome.reports.size() == 2);
  CHECK(eval_outcome.reports[0].judged_queries > 0);
  CHECK(std::filesystem::exists(paths.metrics_report()));

  const auto analyze_outcome = cmd_analyze(cfg);
  CHECK(analyze_outcome.terms > 0);
  CHECK(std::filesystem::exists(paths.weight_idf_csv()));

  SECTION("checkpoints reload into identical rankings") {
    const InvertedIndex index = load_index(paths.index_file());
    const RankerModel model =
        load_checkpoint(paths.checkpoint("rankprob", "embed"), index);
    CHECK(model.cfg.arch == Arch::rankprob);
    // run files exist and parse back
    const RunFile run = load_run(paths.model_run("rankprob", "embed"));
    CHECK_FALSE(run.rankings.empty());
  }

  SECTION("outputs start with stamp comments") {
    const std::string text = slurp(paths.train_pairs());
    CHECK(text.rfind("# weakrank", 0) == 0);
    CHECK(text.find("config_hash") != std::string::npos);
    CHECK(text.find("seed") != std::string::npos);
  }
}

TEST_CASE("pipeline is byte-identical across reruns", "[pipeline][determinism]") {
  const auto dir = std::filesystem::temp_directory_path() / "weakrank_det_test";
  const Config cfg = Config::from_string(tiny_config(dir.string()));
  const PipelinePaths paths = pipeline_paths(cfg);

  auto run_all = [&] {
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    cmd_synth(cfg);
    cmd_index(cfg);
    cmd_generate(cfg);
    cmd_train(cfg);
    cmd_rerank(cfg);
  };

  run_all();
  const std::string pairs1 = slurp(paths.train_pairs());
  const std::string bm25_1 = slurp(paths.bm25_run());
  const std::string model1 = slurp(paths.model_run("rankprob", "embed"));
  const std::string ckpt1 = slurp(paths.checkpoint("rankprob", "embed"));
  const std::string index1 = slurp(paths.index_file());

  run_all();
  CHECK(slurp(paths.train_pairs()) == pairs1);
  CHECK(slurp(paths.bm25_run()) == bm25_1);
  CHECK(slurp(paths.model_run("rankprob", "embed")) == model1);
  CHECK(slurp(paths.checkpoint("rankprob", "embed")) == ckpt1);
  CHECK(slurp(paths.index_file()) == index1);
}

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "weakrank/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::int64_t seed = -1;  // -1 = use config
  std::string arch;
  std::string repr;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "pipeline config file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed, "override the config seed");
  cmd->add_option("--arch", opts.arch, "score|rank|rankprob (overrides config)");
  cmd->add_option("--repr", opts.repr, "dense|sparse|embed (overrides config)");
}

weakrank::Config load_config(const CommonOpts& opts) {
  weakrank::Config cfg = weakrank::Config::from_file(opts.config_path);
  if (opts.seed >= 0) cfg.set("seed", std::to_string(opts.seed));
  if (!opts.arch.empty()) cfg.set("arch", opts.arch);
  if (!opts.repr.empty()) cfg.set("repr", opts.repr);
  return cfg;
}

// Stage-specific exit codes so scripted pipelines can tell failures apart.
enum StageExit {
  kSynthFailed = 10,
  kIndexFailed = 11,
  kGenerateFailed = 12,
  kTrainFailed = 13,
  kRerankFailed = 14,
  kEvaluateFailed = 15,
  kAnalyzeFailed = 16,
};

template <typename Fn>
int run_stage(const char* name, int fail_code, Fn&& fn) {
  try {
    fn();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << name << ": " << e.what() << "\n";
    return fail_code;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakrank: BM25-supervised neural ranking pipeline"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string checkpoint;
  std::vector<std::string> run_files;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus and queries");
  add_common(synth, opts);

  CLI::App* index = app.add_subcommand("index", "build the inverted index");
  add_common(index, opts);

  CLI::App* generate =
      app.add_subcommand("generate", "filter queries and write weak training sets");
  add_common(generate, opts);

  CLI::App* train = app.add_subcommand("train", "train a ranking model");
  add_common(train, opts);

  CLI::App* rerank =
      app.add_subcommand("rerank", "re-rank BM25 candidates with a trained model");
  add_common(rerank, opts);
  rerank->add_option("--checkpoint", checkpoint, "checkpoint path (default from config)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score run files against qrels");
  add_common(evaluate, opts);
  evaluate->add_option("--run", run_files, "run files; first one is the baseline")
      ->required()
      ->expected(-1);

  CLI::App* analyze =
      app.add_subcommand("analyze", "learned term weight vs idf correlation");
  add_common(analyze, opts);
  analyze->add_option("--checkpoint", checkpoint, "checkpoint path (default from config)");

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed())
    return run_stage("synth", kSynthFailed, [&] { weakrank::cmd_synth(load_config(opts)); });
  if (index->parsed())
    return run_stage("index", kIndexFailed, [&] { weakrank::cmd_index(load_config(opts)); });
  if (generate->parsed())
    return run_stage("generate", kGenerateFailed,
                     [&] { weakrank::cmd_generate(load_config(opts)); });
  if (train->parsed())
    return run_stage("train", kTrainFailed, [&] {
      const auto outcome = weakrank::cmd_train(load_config(opts));
      std::cout << "trained " << weakrank::to_string(outcome.model.cfg.arch) << "+"
                << weakrank::to_string(outcome.model.cfg.repr) << " for "
                << outcome.result.steps << " steps";
      if (std::isfinite(outcome.result.best_val_loss))
        std::cout << ", best val loss " << outcome.result.best_val_loss << " at step "
                  << outcome.result.best_step;
      std::cout << "\n";
    });
  if (rerank->parsed())
    return run_stage("rerank", kRerankFailed,
                     [&] { weakrank::cmd_rerank(load_config(opts), checkpoint); });
  if (evaluate->parsed())
    return run_stage("evaluate", kEvaluateFailed, [&] {
      const auto outcome = weakrank::cmd_evaluate(load_config(opts), run_files);
      for (std::size_t r = 0; r < outcome.run_tags.size(); ++r) {
        const auto& rep = outcome.reports[r];
        std::cout << outcome.run_tags[r] << ": map=" << rep.mean_ap
                  << " p@20=" << rep.mean_p << " ndcg@20=" << rep.mean_ndcg
                  << " queries=" << rep.judged_queries << "\n";
      }
      for (std::size_t r = 1; r < outcome.run_tags.size(); ++r) {
        const auto& sig = outcome.significance[r - 1];
        std::cout << outcome.run_tags[r] << " vs " << outcome.run_tags[0]
                  << ": map p=" << sig[0].p << (sig[0].significant ? "*" : "")
                  << " p@20 p=" << sig[1].p << (sig[1].significant ? "*" : "")
                  << " ndcg p=" << sig[2].p << (sig[2].significant ? "*" : "") << "\n";
      }
    });
  if (analyze->parsed())
    return run_stage("analyze", kAnalyzeFailed, [&] {
      const auto outcome = weakrank::cmd_analyze(load_config(opts), checkpoint);
      std::cout << "pearson_r=" << outcome.pearson_r << " over " << outcome.terms
                << " terms\n";
    });
  return 1;
}

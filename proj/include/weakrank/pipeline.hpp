#pragma once

#include <array>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "weakrank/config.hpp"
#include "weakrank/corpus.hpp"
#include "weakrank/eval.hpp"
#include "weakrank/index.hpp"
#include "weakrank/model.hpp"
#include "weakrank/rankers.hpp"
#include "weakrank/synth.hpp"
#include "weakrank/weak_labels.hpp"

namespace weakrank {

// Stage functions behind the CLI subcommands. Every stage reads its inputs
// fresh from disk, writes outputs atomically, and stamps them with the tool
// version, the config hash, and the seed, so stages are independently
// re-runnable and full re-runs are byte-identical.

struct PipelinePaths {
  std::string workdir;

  std::string corpus, queries_train, queries_test, queries_supervised;
  std::string qrels_test, qrels_supervised;

  std::string index_file() const { return workdir + "/index.wrix"; }
  std::string filtered_train() const { return workdir + "/queries_filtered_train.tsv"; }
  std::string filtered_val() const { return workdir + "/queries_filtered_val.tsv"; }
  std::string train_points() const { return workdir + "/train_point.tsv"; }
  std::string train_pairs() const { return workdir + "/train_pair.tsv"; }
  std::string val_points() const { return workdir + "/val_point.tsv"; }
  std::string val_pairs() const { return workdir + "/val_pair.tsv"; }
  std::string checkpoint(const std::string& arch, const std::string& repr) const {
    return workdir + "/model_" + arch + "_" + repr + ".ckpt";
  }
  std::string loss_curve(const std::string& arch, const std::string& repr) const {
    return workdir + "/loss_" + arch + "_" + repr + ".csv";
  }
  std::string bm25_run() const { return workdir + "/bm25.run"; }
  std::string model_run(const std::string& arch, const std::string& repr) const {
    return workdir + "/model_" + arch + "_" + repr + ".run";
  }
  std::string metrics_report() const { return workdir + "/metrics.tsv"; }
  std::string weight_idf_csv() const { return workdir + "/weight_idf.csv"; }
};

inline PipelinePaths pipeline_paths(const Config& cfg) {
  PipelinePaths p;
  p.workdir = cfg.get("workdir");
  p.corpus = cfg.get("corpus", p.workdir + "/corpus.tsv");
  p.queries_train = cfg.get("queries_train", p.workdir + "/queries_train.tsv");
  p.queries_test = cfg.get("queries_test", p.workdir + "/queries_test.tsv");
  p.queries_supervised =
      cfg.get("queries_supervised", p.workdir + "/queries_supervised.tsv");
  p.qrels_test = cfg.get("qrels_test", p.workdir + "/qrels_test.txt");
  p.qrels_supervised =
      cfg.get("qrels_supervised", p.workdir + "/qrels_supervised.txt");
  return p;
}

inline std::uint64_t pipeline_seed(const Config& cfg) { return cfg.get_u64("seed", 42); }

inline FileStamp make_stamp(const Config& cfg) {
  return {cfg.hash(), pipeline_seed(cfg), kToolVersion};
}

inline std::vector<std::string> stamp_comments(const Config& cfg) {
  return {std::string(kToolVersion),
          "config_hash " + std::to_string(cfg.hash()),
          "seed " + std::to_string(pipeline_seed(cfg))};
}

inline BM25Params bm25_params(const Config& cfg) {
  BM25Params p;
  p.k1 = cfg.get_double("k1", 1.2);
  p.b = cfg.get_double("b", 0.75);
  p.k3 = cfg.get_double("k3", 1000.0);
  p.validate();
  return p;
}

inline ModelConfig model_config(const Config& cfg) {
  ModelConfig m;
  m.arch = arch_from_string(cfg.get("arch", "rankprob"));
  m.repr = repr_from_string(cfg.get("repr", "embed"));
  m.hidden = cfg.get_int_list("hidden", {128, 128});
  m.embedding_dim = static_cast<int>(cfg.get_int("embedding_dim", 100));
  m.dense_k = static_cast<int>(cfg.get_int("dense_k", 5));
  m.weighting = weighting_from_string(cfg.get("weighting", "learned"));
  m.embedding_source =
      embedding_source_from_string(cfg.get("embedding_source", "learned"));
  m.dense_log1p = cfg.get_bool("dense_log1p", false);
  return m;
}

inline TrainConfig train_config(const Config& cfg) {
  TrainConfig t;
  t.batch_size = static_cast<std::size_t>(cfg.get_int("batch_size", 256));
  t.epochs = static_cast<std::size_t>(cfg.get_int("epochs", 5));
  t.margin = cfg.get_double("margin", 1.0);
  t.learning_rate = cfg.get_double("learning_rate", 1e-3);
  t.dropout = cfg.get_double("dropout", 0.0);
  t.seed = pipeline_seed(cfg);
  t.eval_every = static_cast<std::size_t>(cfg.get_int("eval_every", 0));
  return t;
}

namespace detail {

inline StopwordSet load_optional_stopwords(const Config& cfg, bool& present) {
  present = cfg.has("stopwords") && !cfg.get("stopwords").empty();
  return present ? load_stopwords(cfg.get("stopwords")) : StopwordSet{};
}

inline std::vector<Query> load_mapped_queries(const std::string& path,
                                              const Vocabulary& vocab,
                                              const StopwordSet* stopwords) {
  std::vector<Query> out;
  for (const auto& rq : load_queries_tsv(path))
    out.push_back(make_query(vocab, rq.query_id, rq.text, stopwords));
  return out;
}

inline void write_query_file(const std::vector<Query>& queries, const std::string& path,
                             const std::vector<std::string>& comments) {
  write_file_atomic(path, [&](std::ostream& out) {
    for (const auto& c : comments) out << "# " << c << "\n";
    for (const auto& q : queries) out << q.query_id << '\t' << q.text << "\n";
  });
}

// Deterministic evenly-strided subsample, so a cap still covers all queries.
template <typename Set>
Set capped(Set set, std::size_t cap) {
  if (cap == 0 || set.items.size() <= cap) return set;
  decltype(set.items) kept;
  kept.reserve(cap);
  for (std::size_t i = 0; i < cap; ++i)
    kept.push_back(set.items[i * set.items.size() / cap]);
  set.items = std::move(kept);
  return set;
}

}  // namespace detail

inline void cmd_synth(const Config& cfg) {
  const PipelinePaths paths = pipeline_paths(cfg);
  std::filesystem::create_directories(paths.workdir);
  SynthSpec spec;
  spec.num_docs = static_cast<std::size_t>(cfg.get_int("synth_docs", 5000));
  spec.num_concepts = static_cast<std::size_t>(cfg.get_int("synth_concepts", 300));
  spec.num_fillers = static_cast<std::size_t>(cfg.get_int("synth_fillers", 600));
  spec.num_train_queries =
      static_cast<std::size_t>(cfg.get_int("synth_train_queries", 2000));
  spec.num_test_queries =
      static_cast<std::size_t>(cfg.get_int("synth_test_queries", 100));
  spec.num_supervised_queries =
      static_cast<std::size_t>(cfg.get_int("synth_supervised_queries", 30));
  spec.primary_prob = cfg.get_double("synth_primary_prob", 0.55);
  spec.seed = pipeline_seed(cfg);
  const SynthData data = generate_synthetic(spec);
  write_synthetic(data, paths.workdir, stamp_comments(cfg));
}

inline void cmd_index(const Config& cfg) {
  const PipelinePaths paths = pipeline_paths(cfg);
  std::filesystem::create_directories(paths.workdir);
  bool has_stop = false;
  const StopwordSet stopwords = detail::load_optional_stopwords(cfg, has_stop);
  const Corpus corpus = load_corpus_tsv(paths.corpus, has_stop ? &stopwords : nullptr);
  const InvertedIndex index = build_index(corpus);
  save_index(index, paths.index_file(), make_stamp(cfg));
}

inline void cmd_generate(const Config& cfg) {
  const PipelinePaths paths = pipeline_paths(cfg);
  const InvertedIndex index = load_index(paths.index_file());
  const BM25Params params = bm25_params(cfg);
  bool has_stop = false;
  const StopwordSet stopwords = detail::load_optional_stopwords(cfg, has_stop);
  const StopwordSet* stop = has_stop ? &stopwords : nullptr;

  std::vector<RawQuery> eval_queries;
  for (const std::string& path : {paths.queries_test, paths.queries_supervised}) {
    if (std::filesystem::exists(path))
      for (auto& q : load_queries_tsv(path)) eval_queries.push_back(std::move(q));
  }

  const auto raw = load_queries_tsv(paths.queries_train);
  const auto min_hits = static_cast<std::size_t>(cfg.get_int("min_hits", 10));
  const std::vector<Query> filtered = filter_training_queries(
      raw, index.vocab,
      [&](const std::vector<TermId>& tokens) { return index.matching_doc_count(tokens); },
      min_hits, eval_queries, stop);
  if (filtered.size() < 2)
    throw std::runtime_error("generate: fewer than 2 training queries survive the filter");

  const double fraction = cfg.get_double("train_fraction", 0.8);
  const auto [train_q, val_q] =
      split_train_validation(filtered, fraction, pipeline_seed(cfg));

  const auto comments = stamp_comments(cfg);
  detail::write_query_file(train_q, paths.filtered_train(), comments);
  detail::write_query_file(val_q, paths.filtered_val(), comments);

  const auto depth = static_cast<std::size_t>(cfg.get_int("train_depth", 1000));
  // `total_pairs` pins the overall pair budget; otherwise pairs_per_query
  // applies directly
  std::size_t pairs_per_query = static_cast<std::size_t>(cfg.get_int("pairs_per_query", 20));
  if (cfg.has("total_pairs")) {
    const auto total = static_cast<std::size_t>(cfg.get_int("total_pairs"));
    pairs_per_query = std::max<std::size_t>(1, (total + train_q.size() - 1) / train_q.size());
  }
  const std::uint64_t seed = pipeline_seed(cfg);

  const PointwiseSet train_points = generate_pointwise(index, params, train_q, depth);
  write_pointwise_tsv(train_points, index, paths.train_points(), comments);
  const PairwiseSet train_pairs =
      generate_pairwise(index, params, train_q, depth, pairs_per_query, seed);
  write_pairwise_tsv(train_pairs, index, paths.train_pairs(), comments);

  const PointwiseSet val_points = generate_pointwise(index, params, val_q, depth);
  write_pointwise_tsv(val_points, index, paths.val_points(), comments);
  const PairwiseSet val_pairs =
      generate_pairwise(index, params, val_q, depth, pairs_per_query, seed ^ 0xA1);
  write_pairwise_tsv(val_pairs, index, paths.val_pairs(), comments);
}

struct TrainOutcome {
  RankerModel model;
  TrainResult result;
};

inline TrainOutcome cmd_train(const Config& cfg) {
  const PipelinePaths paths = pipeline_paths(cfg);
  const InvertedIndex index = load_index(paths.index_file());
  const ModelConfig mc = model_config(cfg);
  const TrainConfig tc = train_config(cfg);
  bool has_stop = false;
  const StopwordSet stopwords = detail::load_optional_stopwords(cfg, has_stop);
  const StopwordSet* stop = has_stop ? &stopwords : nullptr;

  const std::vector<Query> train_q =
      detail::load_mapped_queries(paths.filtered_train(), index.vocab, stop);
  const std::vector<Query> val_q =
      detail::load_mapped_queries(paths.filtered_val(), index.vocab, stop);

  const auto val_cap = static_cast<std::size_t>(cfg.get_int("val_max_instances", 5000));
  const auto train_cap = static_cast<std::size_t>(cfg.get_int("max_train_instances", 0));

  TrainOutcome outcome;
  outcome.model = make_model(mc, index, tc.seed);
  if (mc.repr == Repr::embed && mc.embedding_source != EmbeddingSource::learned) {
    const std::string path = cfg.get("pretrained_embeddings");
    load_pretrained_embeddings(path, index.vocab, outcome.model.embed);
  }

  if (mc.arch == Arch::score) {
    const PointwiseSet train_set = detail::capped(
        read_pointwise_tsv(paths.train_points(), train_q, index), train_cap);
    const PointwiseSet val_set =
        detail::capped(read_pointwise_tsv(paths.val_points(), val_q, index), val_cap);
    outcome.result = train(outcome.model, index, &train_set, nullptr, &val_set, nullptr, tc);
  } else {
    const PairwiseSet train_set = detail::capped(
        read_pairwise_tsv(paths.train_pairs(), train_q, index), train_cap);
    const PairwiseSet val_set =
        detail::capped(read_pairwise_tsv(paths.val_pairs(), val_q, index), val_cap);
    outcome.result = train(outcome.model, index, nullptr, &train_set, nullptr, &val_set, tc);
  }

  const std::string arch = to_string(mc.arch), repr = to_string(mc.repr);
  std::map<std::string, std::string> hyper;
  hyper["batch_size"] = std::to_string(tc.batch_size);
  hyper["epochs"] = std::to_string(tc.epochs);
  hyper["learning_rate"] = format_g9(tc.learning_rate);
  hyper["dropout"] = format_g9(tc.dropout);
  hyper["margin"] = format_g9(tc.margin);
  save_checkpoint(outcome.model, index.vocab.size(), paths.checkpoint(arch, repr),
                  make_stamp(cfg), hyper);
  write_loss_curve_csv(outcome.result.curve, paths.loss_curve(arch, repr),
                       stamp_comments(cfg));
  return outcome;
}

// Writes the BM25 baseline run and the model run over the same candidates.
inline void cmd_rerank(const Config& cfg, const std::string& checkpoint_path = "") {
  const PipelinePaths paths = pipeline_paths(cfg);
  const InvertedIndex index = load_index(paths.index_file());
  const BM25Params params = bm25_params(cfg);
  bool has_stop = false;
  const StopwordSet stopwords = detail::load_optional_stopwords(cfg, has_stop);
  const StopwordSet* stop = has_stop ? &stopwords : nullptr;

  const ModelConfig mc = model_config(cfg);
  const std::string arch = to_string(mc.arch), repr = to_string(mc.repr);
  const std::string ckpt =
      checkpoint_path.empty() ? paths.checkpoint(arch, repr) : checkpoint_path;
  const RankerModel model = load_checkpoint(ckpt, index);

  const auto depth = static_cast<std::size_t>(cfg.get_int("rerank_depth", 2000));
  const std::vector<Query> queries =
      detail::load_mapped_queries(paths.queries_test, index.vocab, stop);

  RunFile bm25_run, model_run;
  bm25_run.tag = "bm25";
  model_run.tag = to_string(model.cfg.arch) + std::string("-") + to_string(model.cfg.repr);
  for (const Query& q : queries) {
    const auto candidates = retrieve_top_k(index, params, q, depth);
    auto& bm25_entries = bm25_run.rankings[q.query_id];
    for (const auto& hit : candidates)
      bm25_entries.push_back({index.doc_ids[hit.doc], hit.score});
    const auto reranked = rerank_candidates(model, index, q, candidates);
    auto& model_entries = model_run.rankings[q.query_id];
    for (const auto& hit : reranked)
      model_entries.push_back({index.doc_ids[hit.doc], hit.score});
  }
  const auto comments = stamp_comments(cfg);
  save_run(bm25_run, paths.bm25_run(), comments);
  save_run(model_run, paths.model_run(arch, repr), comments);
}

struct EvaluateOutcome {
  std::vector<std::string> run_tags;
  std::vector<MetricReport> reports;
  // t-test vs the first run, per following run, metrics MAP/P@k/nDCG@k
  std::vector<std::array<TTestResult, 3>> significance;
};

inline EvaluateOutcome cmd_evaluate(const Config& cfg,
                                    const std::vector<std::string>& run_paths) {
  if (run_paths.empty()) throw std::invalid_argument("evaluate: no run files given");
  const PipelinePaths paths = pipeline_paths(cfg);
  const Qrels qrels = load_qrels(paths.qrels_test);
  const auto ap_cutoff = static_cast<std::size_t>(cfg.get_int("map_cutoff", 1000));
  const auto k = static_cast<std::size_t>(cfg.get_int("precision_k", 20));

  EvaluateOutcome out;
  std::vector<RunFile> runs;
  for (const auto& path : run_paths) {
    runs.push_back(load_run(path));
    out.run_tags.push_back(runs.back().tag);
    out.reports.push_back(evaluate_run(runs.back(), qrels, ap_cutoff, k));
  }

  const std::size_t num_comparisons =
      cfg.has("num_comparisons")
          ? static_cast<std::size_t>(cfg.get_int("num_comparisons"))
          : std::max<std::size_t>(1, (runs.size() - 1) * 3);

  for (std::size_t r = 1; r < runs.size(); ++r) {
    std::vector<double> base_ap, run_ap, base_p, run_p, base_n, run_n;
    for (const auto& [qid, v] : out.reports[0].ap) {
      if (!out.reports[r].ap.count(qid)) continue;
      base_ap.push_back(v);
      run_ap.push_back(out.reports[r].ap.at(qid));
      base_p.push_back(out.reports[0].p_at_k.at(qid));
      run_p.push_back(out.reports[r].p_at_k.at(qid));
      base_n.push_back(out.reports[0].ndcg.at(qid));
      run_n.push_back(out.reports[r].ndcg.at(qid));
    }
    std::array<TTestResult, 3> sig;
    sig[0] = paired_ttest(run_ap, base_ap, num_comparisons);
    sig[1] = paired_ttest(run_p, base_p, num_comparisons);
    sig[2] = paired_ttest(run_n, base_n, num_comparisons);
    out.significance.push_back(sig);
  }

  write_file_atomic(paths.metrics_report(), [&](std::ostream& os) {
    for (const auto& c : stamp_comments(cfg)) os << "# " << c << "\n";
    os << "run\tquery_id\tmetric\tvalue\n";
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const auto& rep = out.reports[r];
      for (const auto& [qid, v] : rep.ap)
        os << out.run_tags[r] << '\t' << qid << "\tmap\t" << format_g9(v) << "\n";
      for (const auto& [qid, v] : rep.p_at_k)
        os << out.run_tags[r] << '\t' << qid << "\tp@" << k << '\t' << format_g9(v) << "\n";
      for (const auto& [qid, v] : rep.ndcg)
        os << out.run_tags[r] << '\t' << qid << "\tndcg@" << k << '\t' << format_g9(v)
           << "\n";
    }
    os << "# summary: run map p@" << k << " ndcg@" << k << " judged_queries\n";
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const auto& rep = out.reports[r];
      os << "# " << out.run_tags[r] << ' ' << format_g9(rep.mean_ap) << ' '
         << format_g9(rep.mean_p) << ' ' << format_g9(rep.mean_ndcg) << ' '
         << rep.judged_queries << "\n";
    }
    if (!out.significance.empty()) {
      os << "# significance vs " << out.run_tags[0]
         << " (two-tailed paired t-test, threshold 0.05/" << num_comparisons << ")\n";
      const char* metric_names[3] = {"map", "p", "ndcg"};
      for (std::size_t r = 1; r < runs.size(); ++r) {
        for (int mi = 0; mi < 3; ++mi) {
          const auto& s = out.significance[r - 1][mi];
          os << "# " << out.run_tags[r] << ' ' << metric_names[mi] << " t="
             << format_g9(s.t) << " p=" << format_g9(s.p)
             << (s.significant ? " significant" : " not-significant") << "\n";
        }
      }
    }
  });
  return out;
}

struct AnalyzeOutcome {
  double pearson_r = 0.0;
  std::size_t terms = 0;
};

inline AnalyzeOutcome cmd_analyze(const Config& cfg,
                                  const std::string& checkpoint_path = "") {
  const PipelinePaths paths = pipeline_paths(cfg);
  const InvertedIndex index = load_index(paths.index_file());
  const ModelConfig mc = model_config(cfg);
  const std::string ckpt = checkpoint_path.empty()
                               ? paths.checkpoint(to_string(mc.arch), to_string(mc.repr))
                               : checkpoint_path;
  const RankerModel model = load_checkpoint(ckpt, index);
  const WeightIdfReport report = weight_idf_correlation(model, index);
  write_file_atomic(paths.weight_idf_csv(), [&](std::ostream& os) {
    for (const auto& c : stamp_comments(cfg)) os << "# " << c << "\n";
    os << "# pearson_r " << format_g9(report.pearson_r) << "\n";
    os << "term,weight,idf\n";
    for (const auto& row : report.rows)
      os << row.term << ',' << format_g9(row.weight) << ',' << format_g9(row.idf) << "\n";
  });
  return {report.pearson_r, report.rows.size()};
}

}  // namespace weakrank

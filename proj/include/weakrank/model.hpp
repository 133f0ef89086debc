#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "weakrank/index.hpp"
#include "weakrank/io.hpp"
#include "weakrank/nn.hpp"
#include "weakrank/represent.hpp"

namespace weakrank {

enum class Arch { score, rank, rankprob };
enum class EmbeddingSource { learned, pretrained_frozen, pretrained_init };

inline const char* to_string(Arch a) {
  switch (a) {
    case Arch::score: return "score";
    case Arch::rank: return "rank";
    case Arch::rankprob: return "rankprob";
  }
  throw std::logic_error("unreachable");
}

inline const char* to_string(Repr r) {
  switch (r) {
    case Repr::dense: return "dense";
    case Repr::sparse: return "sparse";
    case Repr::embed: return "embed";
  }
  throw std::logic_error("unreachable");
}

inline const char* to_string(WeightingMode w) {
  switch (w) {
    case WeightingMode::learned: return "learned";
    case WeightingMode::uniform: return "uniform";
    case WeightingMode::idf: return "idf";
  }
  throw std::logic_error("unreachable");
}

inline const char* to_string(EmbeddingSource s) {
  switch (s) {
    case EmbeddingSource::learned: return "learned";
    case EmbeddingSource::pretrained_frozen: return "pretrained_frozen";
    case EmbeddingSource::pretrained_init: return "pretrained_init";
  }
  throw std::logic_error("unreachable");
}

inline Arch arch_from_string(const std::string& s) {
  if (s == "score") return Arch::score;
  if (s == "rank") return Arch::rank;
  if (s == "rankprob") return Arch::rankprob;
  throw std::invalid_argument("unknown architecture: " + s);
}

inline Repr repr_from_string(const std::string& s) {
  if (s == "dense") return Repr::dense;
  if (s == "sparse") return Repr::sparse;
  if (s == "embed") return Repr::embed;
  throw std::invalid_argument("unknown representation: " + s);
}

inline WeightingMode weighting_from_string(const std::string& s) {
  if (s == "learned") return WeightingMode::learned;
  if (s == "uniform") return WeightingMode::uniform;
  if (s == "idf") return WeightingMode::idf;
  throw std::invalid_argument("unknown weighting mode: " + s);
}

inline EmbeddingSource embedding_source_from_string(const std::string& s) {
  if (s == "learned") return EmbeddingSource::learned;
  if (s == "pretrained_frozen") return EmbeddingSource::pretrained_frozen;
  if (s == "pretrained_init") return EmbeddingSource::pretrained_init;
  throw std::invalid_argument("unknown embedding source: " + s);
}

struct ModelConfig {
  Arch arch = Arch::score;
  Repr repr = Repr::dense;
  std::vector<int> hidden = {128, 128};
  int embedding_dim = 100;  // m
  int dense_k = 5;          // query-term slots for the dense representation
  WeightingMode weighting = WeightingMode::learned;
  EmbeddingSource embedding_source = EmbeddingSource::learned;
  bool dense_log1p = false;

  bool pairwise_input() const { return arch == Arch::rankprob; }

  Activation output_activation() const {
    switch (arch) {
      case Arch::score: return Activation::linear;
      case Arch::rank: return Activation::tanh_fn;
      case Arch::rankprob: return Activation::sigmoid;
    }
    throw std::logic_error("unreachable");
  }

  std::size_t input_dim(std::size_t vocab_size) const {
    const bool pair = pairwise_input();
    switch (repr) {
      case Repr::dense:
        return pair ? 4 + 3 * static_cast<std::size_t>(dense_k)
                    : 3 + 2 * static_cast<std::size_t>(dense_k);
      case Repr::sparse:
        return (pair ? 4 : 3) * vocab_size;
      case Repr::embed:
        return (pair ? 3 : 2) * static_cast<std::size_t>(embedding_dim);
    }
    throw std::logic_error("unreachable");
  }
};

class RankerModel {
 public:
  ModelConfig cfg;
  FeedForward net;
  EmbeddingTable embed;             // used iff repr == embed
  std::vector<double> idf_weights;  // per-term idf snapshot for the idf mode

  bool uses_embedding() const { return cfg.repr == Repr::embed; }
  bool trains_embedding() const {
    return uses_embedding() && cfg.embedding_source != EmbeddingSource::pretrained_frozen;
  }
  bool trains_term_weights() const {
    return uses_embedding() && cfg.weighting == WeightingMode::learned;
  }
};

inline RankerModel make_model(const ModelConfig& cfg, const InvertedIndex& index,
                              std::uint64_t seed) {
  RankerModel model;
  model.cfg = cfg;
  Rng rng(seed);
  model.net = make_feed_forward(cfg.input_dim(index.vocab.size()), cfg.hidden,
                                cfg.output_activation(), rng);
  if (cfg.repr == Repr::embed) {
    model.embed = make_embedding_table(index.vocab.size(),
                                       static_cast<std::size_t>(cfg.embedding_dim), rng);
    if (cfg.weighting == WeightingMode::idf) {
      model.idf_weights.resize(index.vocab.size());
      for (TermId t = 0; t < index.vocab.size(); ++t)
        model.idf_weights[t] = index.idf(t);
    }
  }
  return model;
}

// Everything one instance's backward pass needs.
struct InstanceCache {
  ForwardCache net;
  std::vector<FieldCache> fields;  // embed representation only
};

struct ModelGrads {
  LayerGrads layers;
  Mat dE;
  Vec dW;

  void zero() {
    for (auto& m : layers.dW) m.setZero();
    for (auto& v : layers.db) v.setZero();
    if (dE.size() > 0) dE.setZero();
    if (dW.size() > 0) dW.setZero();
  }
};

inline ModelGrads make_grads(const RankerModel& model) {
  ModelGrads g;
  g.layers = model.net.make_grads();
  if (model.uses_embedding()) {
    g.dE = Mat::Zero(model.embed.E.rows(), model.embed.E.cols());
    g.dW = Vec::Zero(model.embed.W.size());
  }
  return g;
}

namespace detail {

inline Vec embed_input(const RankerModel& model, const std::vector<FieldTerms>& fields,
                       std::vector<FieldCache>* caches) {
  const auto m = static_cast<Eigen::Index>(model.cfg.embedding_dim);
  Vec input(m * static_cast<Eigen::Index>(fields.size()));
  if (caches) caches->resize(fields.size());
  for (std::size_t f = 0; f < fields.size(); ++f) {
    input.segment(static_cast<Eigen::Index>(f) * m, m) = compose_field(
        fields[f], model.embed, model.cfg.weighting,
        model.idf_weights.empty() ? nullptr : &model.idf_weights,
        caches ? &(*caches)[f] : nullptr);
  }
  return input;
}

inline double run_forward(const RankerModel& model, const InvertedIndex& index,
                          const Query& q, std::uint32_t doc1, const std::uint32_t* doc2,
                          bool train, double dropout, Rng* rng, InstanceCache* cache) {
  switch (model.cfg.repr) {
    case Repr::dense: {
      const Vec x = doc2 ? dense_features(index, q, doc1, *doc2, model.cfg.dense_k,
                                          model.cfg.dense_log1p)
                         : dense_features(index, q, doc1, model.cfg.dense_k,
                                          model.cfg.dense_log1p);
      NetInput in;
      in.dense = &x;
      return model.net.forward(in, train, dropout, rng, cache ? &cache->net : nullptr);
    }
    case Repr::sparse: {
      const SparseVec x = doc2 ? sparse_features(index, q, doc1, *doc2)
                               : sparse_features(index, q, doc1);
      NetInput in;
      in.sparse = &x;
      return model.net.forward(in, train, dropout, rng, cache ? &cache->net : nullptr);
    }
    case Repr::embed: {
      std::vector<FieldTerms> fields;
      fields.push_back(query_field(q));
      fields.push_back(doc_field(index, doc1));
      if (doc2) fields.push_back(doc_field(index, *doc2));
      const Vec x = embed_input(model, fields, cache ? &cache->fields : nullptr);
      NetInput in;
      in.dense = &x;
      return model.net.forward(in, train, dropout, rng, cache ? &cache->net : nullptr);
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace detail

// Point input: (q, d) for the score and rank architectures and for each tower
// of the rank model. Pair input: (q, d1, d2) for rankprob.
inline double model_forward(const RankerModel& model, const InvertedIndex& index,
                            const Query& q, std::uint32_t doc, bool train = false,
                            double dropout = 0.0, Rng* rng = nullptr,
                            InstanceCache* cache = nullptr) {
  return detail::run_forward(model, index, q, doc, nullptr, train, dropout, rng, cache);
}

inline double model_forward_pair(const RankerModel& model, const InvertedIndex& index,
                                 const Query& q, std::uint32_t doc1, std::uint32_t doc2,
                                 bool train = false, double dropout = 0.0,
                                 Rng* rng = nullptr, InstanceCache* cache = nullptr) {
  return detail::run_forward(model, index, q, doc1, &doc2, train, dropout, rng, cache);
}

// Backward from dLoss/d(pre-activation of the output unit), accumulating into
// `grads` so batches can sum instance gradients in a fixed order.
inline void model_backward(const RankerModel& model, const InstanceCache& cache,
                           double d_pre_out, ModelGrads& grads) {
  if (model.cfg.repr != Repr::embed) {
    model.net.backward(cache.net, d_pre_out, grads.layers, nullptr);
    return;
  }
  Vec dinput;
  model.net.backward(cache.net, d_pre_out, grads.layers, &dinput);
  const auto m = static_cast<Eigen::Index>(model.cfg.embedding_dim);
  for (std::size_t f = 0; f < cache.fields.size(); ++f) {
    const Vec g = dinput.segment(static_cast<Eigen::Index>(f) * m, m);
    compose_backward(cache.fields[f], g, model.embed, model.cfg.weighting, grads.dE,
                     grads.dW);
  }
}

// ---------------------------------------------------------------------------
// Optimizer state for a whole model.

struct AdamState {
  AdamConfig cfg;
  std::uint64_t step = 0;
  std::vector<Mat> mW, vW;
  std::vector<Vec> mb, vb;
  Mat mE, vE;
  Vec mWt, vWt;
};

inline AdamState make_adam(const RankerModel& model, const AdamConfig& cfg) {
  AdamState s;
  s.cfg = cfg;
  for (const auto& layer : model.net.layers) {
    s.mW.push_back(Mat::Zero(layer.W.rows(), layer.W.cols()));
    s.vW.push_back(Mat::Zero(layer.W.rows(), layer.W.cols()));
    s.mb.push_back(Vec::Zero(layer.b.size()));
    s.vb.push_back(Vec::Zero(layer.b.size()));
  }
  if (model.uses_embedding()) {
    s.mE = Mat::Zero(model.embed.E.rows(), model.embed.E.cols());
    s.vE = Mat::Zero(model.embed.E.rows(), model.embed.E.cols());
    s.mWt = Vec::Zero(model.embed.W.size());
    s.vWt = Vec::Zero(model.embed.W.size());
  }
  return s;
}

inline void adam_step(AdamState& state, RankerModel& model, const ModelGrads& grads) {
  ++state.step;
  for (std::size_t i = 0; i < model.net.layers.size(); ++i) {
    adam_update(model.net.layers[i].W, grads.layers.dW[i], state.mW[i], state.vW[i],
                state.cfg, state.step);
    adam_update(model.net.layers[i].b, grads.layers.db[i], state.mb[i], state.vb[i],
                state.cfg, state.step);
  }
  if (model.trains_embedding())
    adam_update(model.embed.E, grads.dE, state.mE, state.vE, state.cfg, state.step);
  if (model.trains_term_weights())
    adam_update(model.embed.W, grads.dW, state.mWt, state.vWt, state.cfg, state.step);
  ++model.net.version;
}

// ---------------------------------------------------------------------------
// Checkpoint ("WRCK1"): binary header + parameter blobs, with a JSON sidecar
// of hyperparameters at <path>.json.

inline constexpr char kCheckpointMagic[] = "WRCK1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_mat(std::ostream& out, const Mat& m) {
  write_u32(out, static_cast<std::uint32_t>(m.rows()));
  write_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64(out, m(r, c));
}

inline Mat read_mat(std::istream& in) {
  const std::uint32_t rows = read_u32(in);
  const std::uint32_t cols = read_u32(in);
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_f64(in);
  return m;
}

inline void write_vec(std::ostream& out, const Vec& v) {
  write_u32(out, static_cast<std::uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) write_f64(out, v(i));
}

inline Vec read_vec(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  Vec v(n);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = read_f64(in);
  return v;
}

}  // namespace detail

inline void save_checkpoint(const RankerModel& model, std::size_t vocab_size,
                            const std::string& path, const FileStamp& stamp,
                            const std::map<std::string, std::string>& hyper = {}) {
  write_file_atomic(path, [&](std::ostream& out) {
    out.write(kCheckpointMagic, 5);
    write_u32(out, kCheckpointVersion);
    write_string(out, stamp.tool_version);
    write_u64(out, stamp.config_hash);
    write_u64(out, stamp.seed);
    write_string(out, to_string(model.cfg.arch));
    write_string(out, to_string(model.cfg.repr));
    write_string(out, to_string(model.cfg.weighting));
    write_string(out, to_string(model.cfg.embedding_source));
    write_u32(out, static_cast<std::uint32_t>(model.cfg.dense_k));
    write_u32(out, static_cast<std::uint32_t>(model.cfg.embedding_dim));
    write_u32(out, model.cfg.dense_log1p ? 1 : 0);
    write_u32(out, static_cast<std::uint32_t>(vocab_size));
    write_u32(out, static_cast<std::uint32_t>(model.cfg.hidden.size()));
    for (int h : model.cfg.hidden) write_u32(out, static_cast<std::uint32_t>(h));
    write_u32(out, static_cast<std::uint32_t>(model.net.layers.size()));
    for (const auto& layer : model.net.layers) {
      detail::write_mat(out, layer.W);
      detail::write_vec(out, layer.b);
    }
    write_u32(out, model.uses_embedding() ? 1 : 0);
    if (model.uses_embedding()) {
      detail::write_mat(out, model.embed.E);
      detail::write_vec(out, model.embed.W);
    }
  }, /*binary=*/true);

  nlohmann::json meta;
  meta["tool_version"] = stamp.tool_version;
  meta["config_hash"] = stamp.config_hash;
  meta["seed"] = stamp.seed;
  meta["arch"] = to_string(model.cfg.arch);
  meta["repr"] = to_string(model.cfg.repr);
  meta["weighting"] = to_string(model.cfg.weighting);
  meta["embedding_source"] = to_string(model.cfg.embedding_source);
  meta["hidden"] = model.cfg.hidden;
  meta["embedding_dim"] = model.cfg.embedding_dim;
  meta["dense_k"] = model.cfg.dense_k;
  meta["dense_log1p"] = model.cfg.dense_log1p;
  meta["vocab_size"] = vocab_size;
  for (const auto& [k, v] : hyper) meta[k] = v;
  write_file_atomic(path + ".json",
                    [&](std::ostream& out) { out << meta.dump(2) << "\n"; });
}

inline RankerModel load_checkpoint(const std::string& path, const InvertedIndex& index,
                                   FileStamp* stamp = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  expect_magic(in, kCheckpointMagic);
  const std::uint32_t version = read_u32(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  FileStamp local;
  local.tool_version = read_string(in);
  local.config_hash = read_u64(in);
  local.seed = read_u64(in);
  if (stamp) *stamp = local;

  RankerModel model;
  model.cfg.arch = arch_from_string(read_string(in));
  model.cfg.repr = repr_from_string(read_string(in));
  model.cfg.weighting = weighting_from_string(read_string(in));
  model.cfg.embedding_source = embedding_source_from_string(read_string(in));
  model.cfg.dense_k = static_cast<int>(read_u32(in));
  model.cfg.embedding_dim = static_cast<int>(read_u32(in));
  model.cfg.dense_log1p = read_u32(in) != 0;
  const std::uint32_t vocab_size = read_u32(in);
  if (vocab_size != index.vocab.size())
    throw std::runtime_error("checkpoint vocabulary size " + std::to_string(vocab_size) +
                             " does not match index " + std::to_string(index.vocab.size()));
  const std::uint32_t n_hidden = read_u32(in);
  model.cfg.hidden.resize(n_hidden);
  for (auto& h : model.cfg.hidden) h = static_cast<int>(read_u32(in));
  const std::uint32_t n_layers = read_u32(in);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    DenseLayer layer;
    layer.W = detail::read_mat(in);
    layer.b = detail::read_vec(in);
    layer.act = (i + 1 == n_layers) ? model.cfg.output_activation() : Activation::relu;
    model.net.layers.push_back(std::move(layer));
  }
  if (read_u32(in) != 0) {
    model.embed.E = detail::read_mat(in);
    model.embed.W = detail::read_vec(in);
    if (model.cfg.weighting == WeightingMode::idf) {
      model.idf_weights.resize(index.vocab.size());
      for (TermId t = 0; t < index.vocab.size(); ++t)
        model.idf_weights[t] = index.idf(t);
    }
  }
  return model;
}

}  // namespace weakrank

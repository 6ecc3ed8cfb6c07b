// Copyright 2026 The G2GT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "g2gt/rngt.hpp"

#include <cmath>
#include <random>

namespace g2gt {

namespace {

constexpr const char* kEncoderPrefix = "encoder.";
constexpr const char* kScorerPrefix = "scorer.";

// Additive -inf mask over an (n, n, |L|) score tensor.
Tensor label_mask_tensor(const std::vector<bool>& permitted, Index n) {
  const Index labels = static_cast<Index>(permitted.size());
  Matrix m = Matrix::Zero(n * n, labels);
  for (std::size_t l = 0; l < permitted.size(); ++l) {
    if (!permitted[l]) m.col(static_cast<Index>(l)).setConstant(kNegInf);
  }
  return Tensor::constant(std::move(m), {n, n, labels});
}

bool all_permitted(const std::vector<bool>& permitted) {
  for (bool p : permitted) {
    if (!p) return false;
  }
  return true;
}

}  // namespace

void ModelConfig::validate() const {
  encoder.validate();
  if (vocab_size <= 0) throw ValueError("model vocabulary is empty");
  if (max_positions <= 0) throw ValueError("max_positions must be positive");
  if (edge_dim <= 0 || edge_dim > encoder.d) {
    throw ValueError("edge_dim must lie in [1, d]");
  }
  if (!(init_std > 0)) throw ValueError("init_std must be positive");
}

void RefinementConfig::validate() const {
  if (t_max < 1) throw ValueError("t_max must be at least 1");
  if (t_train < 1) throw ValueError("t_train must be at least 1");
}

// ---- model ----------------------------------------------------------------

G2GTModel::G2GTModel(ModelConfig config, RelationVocab relations, std::uint64_t seed)
    : config_(std::move(config)), relations_(std::move(relations)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const Index d = config_.encoder.d;
  const Scalar s = config_.init_std;
  params_.add("embed.words", gaussian(config_.vocab_size, d, s, rng));
  params_.add("embed.positions", gaussian(config_.max_positions, d, s, rng));
  make_encoder_params(params_, kEncoderPrefix, config_.encoder,
                      relations_.input_size(config_.input_mode), s, rng);
  make_edge_scorer_params(params_, kScorerPrefix, d, config_.edge_dim, relations_.size(), s, rng);
  bind();
}

G2GTModel::G2GTModel(ModelConfig config, RelationVocab relations, ParameterSet params)
    : config_(std::move(config)), relations_(std::move(relations)), params_(std::move(params)) {
  config_.validate();
  // Same names and shapes as a freshly built model, in any order.
  const G2GTModel reference(config_, relations_, std::uint64_t{0});
  if (reference.params().size() != params_.size()) {
    throw DataError("expected " + std::to_string(reference.params().size()) + " parameters, got " +
                    std::to_string(params_.size()));
  }
  for (const Parameter& want : reference.params()) {
    if (!params_.contains(want.name)) throw DataError("missing parameter '" + want.name + "'");
    const Tensor got = params_.get(want.name);
    if (got.shape() != want.tensor.shape()) {
      throw DataError("parameter '" + want.name + "' has shape " + shape_string(got.shape()) +
                      ", expected " + shape_string(want.tensor.shape()));
    }
  }
  bind();
}

void G2GTModel::bind() {
  word_embeddings_ = params_.get("embed.words");
  position_embeddings_ = params_.get("embed.positions");
  encoder_ = bind_encoder_params(params_, kEncoderPrefix, config_.encoder);
  scorer_ = bind_edge_scorer_params(params_, kScorerPrefix);
  const Index d = config_.encoder.d;
  if (word_embeddings_.rows() != config_.vocab_size || word_embeddings_.cols() != d ||
      position_embeddings_.rows() != config_.max_positions ||
      encoder_.relations.query.rows() != relations_.input_size(config_.input_mode) ||
      scorer_.num_labels() != relations_.size() || scorer_.edge_dim() != config_.edge_dim) {
    throw DataError("model parameters do not match the model configuration");
  }
}

Tensor G2GTModel::embed(std::span<const Index> tokens) const {
  const Index n = static_cast<Index>(tokens.size());
  if (n == 0) throw ValueError("cannot embed an empty sequence");
  if (n > config_.max_positions) {
    throw ValueError("sequence of " + std::to_string(n) + " tokens exceeds max_positions " +
                     std::to_string(config_.max_positions));
  }
  std::vector<Index> positions(n);
  for (Index k = 0; k < n; ++k) positions[k] = k;
  return gather_rows(word_embeddings_, tokens) + gather_rows(position_embeddings_, positions);
}

EncoderState G2GTModel::encode_graph(std::span<const Index> tokens,
                                     const LabeledGraph& graph) const {
  return encode(embed(tokens), graph.mapped(relations_, config_.input_mode), config_.encoder,
                encoder_);
}

EdgeScores G2GTModel::forward(std::span<const Index> tokens, const LabeledGraph& graph) const {
  return score_edges(encode_graph(tokens, graph), scorer_);
}

// ---- distributions --------------------------------------------------------

bool in_scope(CellScope scope, Index i, Index j) {
  return scope == CellScope::kOffDiagonal ? i != j : j < i;
}

std::vector<bool> stage_mask(int iteration, StageSchedule schedule, const RelationVocab& vocab) {
  std::vector<bool> permitted(vocab.size(), true);
  if (schedule == StageSchedule::kFullGraph) return permitted;
  if (vocab.scheme() != RelationScheme::kCoreference) {
    throw ValueError("mention-first schedule requires the NONE/MENTION/COREF label space");
  }
  if (iteration <= 1) permitted[vocab.coref()] = false;
  return permitted;
}

LabeledGraph initial_graph(Index n, InitMode mode, const LabeledGraph* external,
                           Index num_labels) {
  if (mode == InitMode::kEmpty) return LabeledGraph(n);
  if (external == nullptr) throw ValueError("external initializer requires a graph");
  if (external->size() != n) {
    throw ValueError("initial graph has " + std::to_string(external->size()) +
                     " nodes, input has " + std::to_string(n));
  }
  external->validate(num_labels);
  return *external;
}

FactoredGraphDistribution graph_distribution(const EdgeScores& scores,
                                             const std::vector<bool>& permitted,
                                             CellScope scope) {
  FactoredGraphDistribution dist;
  dist.n = scores.size();
  dist.scope = scope;
  Matrix logits = scores.scores.value();
  mask_labels(logits, permitted);
  dist.probs.resize(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const Scalar m = logits.row(r).maxCoeff();
    dist.probs.row(r) = (logits.row(r).array() - m).unaryExpr([](Scalar v) { return std::exp(v); });
    dist.probs.row(r) /= dist.probs.row(r).sum();
  }
  return dist;
}

Scalar graph_log_likelihood(const FactoredGraphDistribution& dist, const LabeledGraph& gold) {
  const Index n = dist.n;
  if (gold.size() != n) {
    throw ShapeError("graph_log_likelihood: gold graph over " + std::to_string(gold.size()) +
                     " nodes, distribution over " + std::to_string(n));
  }
  if (dist.probs.rows() != n * n) {
    throw ValueError("graph_log_likelihood: distribution is missing cells");
  }
  Scalar total = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (!in_scope(dist.scope, i, j)) continue;
      const Label l = gold(i, j);
      if (l < 0 || l >= dist.probs.cols()) {
        throw ValueError("graph_log_likelihood: gold label outside the distribution");
      }
      total += std::log(dist.probs(i * n + j, l));
    }
  }
  return total;
}

// ---- decoding and refinement ---------------------------------------------

LabeledGraph decode_graph(const G2GTModel& model, const EdgeScores& scores, int iteration,
                          StageSchedule schedule) {
  const Index n = scores.size();
  const auto permitted = stage_mask(iteration, schedule, model.relations());
  const FactoredGraphDistribution dist = graph_distribution(scores, permitted, model.scope());
  Matrix log_probs = dist.probs.array().log();

  if (model.config().task == TaskKind::kDependency) {
    const Matrix heads_scores = pooled_head_scores(log_probs, n, model.relations());
    const std::vector<int> heads = mst_decode(heads_scores, 0, true);
    return dep_tree_to_graph(label_edges(heads, log_probs, n, model.relations()),
                             model.relations());
  }
  LabeledGraph g = greedy_decode(log_probs, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (!in_scope(dist.scope, i, j)) g.set(i, j, kNoneLabel);
    }
  }
  return g;
}

RefinementResult refine_with(const std::function<LabeledGraph(int, const LabeledGraph&)>& step,
                             LabeledGraph initial, int t_max) {
  if (t_max < 1) throw ValueError("t_max must be at least 1");
  RefinementResult result;
  result.trace.steps.push_back({0, initial, false});
  LabeledGraph previous = std::move(initial);
  for (int t = 1; t <= t_max; ++t) {
    LabeledGraph next = step(t, previous);
    const bool converged = graph_equals(next, previous);
    result.trace.steps.push_back({t, next, converged});
    previous = std::move(next);
    if (converged) break;
  }
  result.graph = previous;
  return result;
}

RefinementResult refine(const G2GTModel& model, std::span<const Index> tokens,
                        const RefinementConfig& cfg, const LabeledGraph* external) {
  cfg.validate();
  if (tokens.empty()) throw ValueError("refine: empty input");
  LabeledGraph g0 = initial_graph(static_cast<Index>(tokens.size()), cfg.init, external,
                                  model.relations().size());
  auto step = [&](int t, const LabeledGraph& previous) {
    return decode_graph(model, model.forward(tokens, previous), t, cfg.schedule);
  };
  return refine_with(step, std::move(g0), cfg.t_max);
}

// ---- training -------------------------------------------------------------

LabeledGraph stage_target(const LabeledGraph& gold, const std::vector<bool>& permitted) {
  LabeledGraph out = gold;
  for (Index i = 0; i < gold.size(); ++i) {
    for (Index j = 0; j < gold.size(); ++j) {
      const Label l = gold(i, j);
      if (l >= 0 && l < static_cast<Label>(permitted.size()) && !permitted[l]) {
        out.set(i, j, kNoneLabel);
      }
    }
  }
  return out;
}

Tensor refinement_loss(const G2GTModel& model, const TrainingExample& example,
                       const RefinementConfig& cfg) {
  cfg.validate();
  const Index n = static_cast<Index>(example.tokens.size());
  if (example.gold.size() != n) {
    throw ValueError("training example: gold graph size differs from token count");
  }
  const Index num_labels = model.relations().size();
  example.gold.validate(num_labels);
  const CellScope scope = model.scope();

  std::vector<Index> cells;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (in_scope(scope, i, j)) cells.push_back(i * n + j);
    }
  }
  const Index count = static_cast<Index>(cells.size());

  LabeledGraph previous =
      initial_graph(n, example.initial ? InitMode::kExternal : cfg.init,
                    example.initial ? &*example.initial : nullptr, num_labels);
  Tensor total;
  for (int t = 1; t <= cfg.t_train; ++t) {
    const auto permitted = stage_mask(t, cfg.schedule, model.relations());
    const LabeledGraph target = stage_target(example.gold, permitted);
    EdgeScores scores = model.forward(example.tokens, previous);
    Tensor logits = scores.scores;
    if (!all_permitted(permitted)) logits = logits + label_mask_tensor(permitted, n);
    Tensor log_probs = log_softmax_rows(logits);

    std::vector<Index> cols(count);
    for (Index k = 0; k < count; ++k) cols[k] = target(cells[k] / n, cells[k] % n);
    Tensor nll = scale(sum(gather_elements(log_probs, cells, cols, {count})), -1.0);
    total = total.defined() ? total + nll : nll;

    if (t < cfg.t_train) {
      EdgeScores detached{scores.scores.detach()};
      previous = decode_graph(model, detached, t, cfg.schedule);
    }
  }
  return total;
}

Scalar accumulate_refinement_gradients(const G2GTModel& model,
                                       std::span<const TrainingExample> batch,
                                       const RefinementConfig& cfg) {
  Record record;
  Tensor loss;
  {
    RecordScope scope(record);
    for (const auto& example : batch) {
      Tensor l = refinement_loss(model, example, cfg);
      loss = loss.defined() ? loss + l : l;
    }
  }
  if (!loss.defined()) return 0.0;
  const Scalar value = loss.item();
  if (!std::isfinite(value)) throw Error("training loss is not finite");
  record.backward(loss);
  return value;
}

Scalar train_refinement_step(G2GTModel& model, std::span<const TrainingExample> batch,
                             const RefinementConfig& cfg, const AdamOptions& adam) {
  model.params().zero_grad();
  const Scalar loss = accumulate_refinement_gradients(model, batch, cfg);
  adam_step(model.params(), adam);
  return loss;
}

}  // namespace g2gt

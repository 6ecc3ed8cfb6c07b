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

#ifndef G2GT_RNGT_HPP_
#define G2GT_RNGT_HPP_

// Recursive non-autoregressive graph refinement. Starting from an initial
// graph G^0, every iteration re-encodes the input conditioned on the previous
// graph and predicts all edges of a new graph in parallel:
//
//   Z^t = encode(tokens, G^{t-1}),   G^t = decode(score_edges(Z^t))
//
// until G^t == G^{t-1} or the iteration cap is reached.

#include "g2gt/attention.hpp"
#include "g2gt/edge_decoder.hpp"
#include "g2gt/graph.hpp"
#include "g2gt/numerics.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace g2gt {

enum class TaskKind {
  // Trees over a virtual root; decoded with maximum spanning arborescence.
  kDependency,
  // NONE/MENTION/COREF cells with j < i; decoded per cell.
  kCoreference,
};

enum class StageSchedule { kFullGraph, kMentionFirst };
enum class InitMode { kEmpty, kExternal };

// Which cells carry a prediction target.
enum class CellScope { kOffDiagonal, kLowerTriangular };

struct ModelConfig {
  G2GLayerConfig encoder;
  Index edge_dim = 32;
  Index vocab_size = 0;
  Index max_positions = 128;
  TaskKind task = TaskKind::kDependency;
  GraphInputMode input_mode = GraphInputMode::kLabeled;
  Scalar init_std = 0.02;

  void validate() const;
};

// Token/position embeddings, the G2G encoder and the edge scorer.
class G2GTModel {
 public:
  G2GTModel(ModelConfig config, RelationVocab relations, std::uint64_t seed);
  // Adopts parameters registered under the names this class uses.
  G2GTModel(ModelConfig config, RelationVocab relations, ParameterSet params);

  G2GTModel(G2GTModel&&) = default;
  G2GTModel& operator=(G2GTModel&&) = default;
  G2GTModel(const G2GTModel&) = delete;
  G2GTModel& operator=(const G2GTModel&) = delete;

  const ModelConfig& config() const { return config_; }
  // Only the ablation switches should change after construction.
  G2GLayerConfig& encoder_config() { return config_.encoder; }
  const RelationVocab& relations() const { return relations_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const EncoderParams& encoder_params() const { return encoder_; }
  const EdgeScorerParams& scorer_params() const { return scorer_; }

  Tensor embed(std::span<const Index> tokens) const;
  // `graph` carries output-space labels; it is mapped to the input label
  // space before attention reads it.
  EncoderState encode_graph(std::span<const Index> tokens, const LabeledGraph& graph) const;
  EdgeScores forward(std::span<const Index> tokens, const LabeledGraph& graph) const;

  CellScope scope() const {
    return config_.task == TaskKind::kDependency ? CellScope::kOffDiagonal
                                                 : CellScope::kLowerTriangular;
  }

 private:
  void bind();

  ModelConfig config_;
  RelationVocab relations_;
  ParameterSet params_;
  Tensor word_embeddings_;
  Tensor position_embeddings_;
  EncoderParams encoder_;
  EdgeScorerParams scorer_;
};

struct RefinementConfig {
  int t_max = 3;
  int t_train = 2;
  StageSchedule schedule = StageSchedule::kFullGraph;
  InitMode init = InitMode::kEmpty;

  void validate() const;
};

struct TraceStep {
  int iteration = 0;
  LabeledGraph graph;
  bool converged = false;
};

struct RefinementTrace {
  std::vector<TraceStep> steps;

  bool converged() const { return !steps.empty() && steps.back().converged; }
};

struct RefinementResult {
  LabeledGraph graph;
  RefinementTrace trace;
};

// Per-cell categorical distributions p(g_ij | input, G^{t-1}).
struct FactoredGraphDistribution {
  Index n = 0;
  Matrix probs;  // (n*n) x |L|
  CellScope scope = CellScope::kOffDiagonal;
};

bool in_scope(CellScope scope, Index i, Index j);

// Permitted labels at iteration t (1-based). Under the mention-first schedule
// COREF is excluded at t == 1.
std::vector<bool> stage_mask(int iteration, StageSchedule schedule, const RelationVocab& vocab);

LabeledGraph initial_graph(Index n, InitMode mode, const LabeledGraph* external,
                           Index num_labels);

FactoredGraphDistribution graph_distribution(const EdgeScores& scores,
                                             const std::vector<bool>& permitted,
                                             CellScope scope);

// Sum over in-scope cells of log p(gold label).
Scalar graph_log_likelihood(const FactoredGraphDistribution& dist, const LabeledGraph& gold);

// Decodes G^t from the scores of iteration t.
LabeledGraph decode_graph(const G2GTModel& model, const EdgeScores& scores, int iteration,
                          StageSchedule schedule);

RefinementResult refine(const G2GTModel& model, std::span<const Index> tokens,
                        const RefinementConfig& cfg, const LabeledGraph* external = nullptr);

// The refinement loop over an arbitrary step G^t = step(t, G^{t-1}).
RefinementResult refine_with(const std::function<LabeledGraph(int, const LabeledGraph&)>& step,
                             LabeledGraph initial, int t_max);

struct TrainingExample {
  std::vector<Index> tokens;
  LabeledGraph gold;
  std::optional<LabeledGraph> initial;
};

// Gold target used at iteration t: COREF cells become NONE when COREF is not
// permitted yet.
LabeledGraph stage_target(const LabeledGraph& gold, const std::vector<bool>& permitted);

// Negative log-likelihood summed over t_train iterations. Iteration t is
// conditioned on the detached prediction of iteration t-1, so no gradient
// crosses iterations.
Tensor refinement_loss(const G2GTModel& model, const TrainingExample& example,
                       const RefinementConfig& cfg);

// Records the summed batch loss, backpropagates, and returns the loss. The
// caller zeroes gradients and applies the optimizer.
Scalar accumulate_refinement_gradients(const G2GTModel& model,
                                       std::span<const TrainingExample> batch,
                                       const RefinementConfig& cfg);

// zero_grad, accumulate_refinement_gradients, adam_step.
Scalar train_refinement_step(G2GTModel& model, std::span<const TrainingExample> batch,
                             const RefinementConfig& cfg, const AdamOptions& adam);

}  // namespace g2gt

#endif  // G2GT_RNGT_HPP_

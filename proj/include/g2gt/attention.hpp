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

#ifndef G2GT_ATTENTION_HPP_
#define G2GT_ATTENTION_HPP_

// Relation-conditioned multi-head self-attention and the stacked encoder.
//
// For one head with queries q_i = x_i W^Q, keys k_j = x_j W^K and values
// v_j = x_j W^V, the attention logits are
//
//   e_ij = ( q_i.k_j + q_i.R1[l_ij] + R2[l_ij].k_j ) / sqrt(d_head)
//
// and the outputs are z_i = sum_j alpha_ij (v_j + R3[l_ij]), where l_ij is the
// label of graph cell (i, j) and R1..R3 are the head's slices of the shared
// relation embedding tables.

#include "g2gt/graph.hpp"
#include "g2gt/numerics.hpp"

#include <random>
#include <string>
#include <vector>

namespace g2gt {

struct G2GLayerConfig {
  Index d = 64;
  Index heads = 4;
  Index d_ff = 128;
  Index layers = 2;
  bool use_key_term = true;
  bool use_value_term = true;
  // Pins the NONE rows of the relation tables to zero.
  bool freeze_none_relation = false;
  Scalar layer_norm_eps = 1e-5;

  Index d_head() const { return d / heads; }
  void validate() const;
};

// Three |L| x d tables shared by every layer and head.
struct RelationEmbeddings {
  Tensor query;  // W^R_1, paired with queries
  Tensor key;    // W^R_2, paired with keys
  Tensor value;  // W^R_3, added to values

  Index num_labels() const { return query.rows(); }
};

struct EncoderLayerParams {
  Tensor wq, wk, wv, wo;
  Tensor ln1_gain, ln1_bias;
  Tensor ff1_w, ff1_b, ff2_w, ff2_b;
  Tensor ln2_gain, ln2_bias;
};

struct EncoderParams {
  RelationEmbeddings relations;
  std::vector<EncoderLayerParams> layers;
};

struct EncoderState {
  Tensor z;
};

// Registers encoder parameters under `prefix` and returns handles to them.
// Weights are N(0, init_std); layer-norm gains are 1 and biases 0.
EncoderParams make_encoder_params(ParameterSet& params, const std::string& prefix,
                                  const G2GLayerConfig& cfg, Index num_relations,
                                  Scalar init_std, std::mt19937_64& rng);

// Looks up already registered parameters (for example after a checkpoint load).
EncoderParams bind_encoder_params(const ParameterSet& params, const std::string& prefix,
                                  const G2GLayerConfig& cfg);

// The tables attention actually reads: the NONE rows are multiplied by zero
// when `freeze_none_relation` is set. Call inside the forward pass.
RelationEmbeddings effective_relations(const RelationEmbeddings& rel, const G2GLayerConfig& cfg);

// Per-head logits. `queries`/`keys` are n x d_head; `rel_query`/`rel_key` are
// |L| x d_head slices. The key-side relation term is skipped when
// `use_key_term` is false.
Tensor attention_scores(const Tensor& queries, const Tensor& keys, const LabeledGraph& graph,
                        const Tensor& rel_query, const Tensor& rel_key, bool use_key_term);

// Per-head outputs from row-stochastic weights `alpha` (n x n).
Tensor attention_values(const Tensor& alpha, const Tensor& values, const LabeledGraph& graph,
                        const Tensor& rel_value, bool use_value_term);

Tensor multi_head_attention(const Tensor& x, const LabeledGraph& graph,
                            const RelationEmbeddings& rel, const EncoderLayerParams& layer,
                            const G2GLayerConfig& cfg);

// Post-norm layer: LN(x + MHA(x)), then LN(h + FFN(h)).
Tensor encoder_layer(const Tensor& x, const LabeledGraph& graph, const RelationEmbeddings& rel,
                     const EncoderLayerParams& layer, const G2GLayerConfig& cfg);

// `x` holds already embedded inputs (n x d). Graph labels index the relation
// tables.
EncoderState encode(const Tensor& x, const LabeledGraph& graph, const G2GLayerConfig& cfg,
                    const EncoderParams& params);

}  // namespace g2gt

#endif  // G2GT_ATTENTION_HPP_

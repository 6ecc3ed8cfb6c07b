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

#ifndef G2GT_EDGE_DECODER_HPP_
#define G2GT_EDGE_DECODER_HPP_

// Pairwise edge scoring from node vectors and graph decoding: per-cell
// argmax, maximum spanning arborescence (Chu-Liu/Edmonds) and arc labeling.

#include "g2gt/attention.hpp"
#include "g2gt/graph.hpp"
#include "g2gt/numerics.hpp"

#include <limits>
#include <random>
#include <string>
#include <vector>

namespace g2gt {

inline constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

// Biaffine classifier over head/tail projections:
//   score(i, j, l) = h_i B_l t_j^T + u_l . h_i + v_l . t_j + b_l
// with h = Z * head_proj and t = Z * tail_proj.
struct EdgeScorerParams {
  Tensor head_proj;    // d x d_e
  Tensor tail_proj;    // d x d_e
  Tensor bilinear;     // d_e x (|L| * d_e); block l is B_l
  Tensor head_linear;  // d_e x |L|; column l is u_l
  Tensor tail_linear;  // d_e x |L|; column l is v_l
  Tensor bias;         // |L|

  Index edge_dim() const { return head_proj.cols(); }
  Index num_labels() const { return bias.numel(); }
};

EdgeScorerParams make_edge_scorer_params(ParameterSet& params, const std::string& prefix,
                                         Index d, Index edge_dim, Index num_labels,
                                         Scalar init_std, std::mt19937_64& rng);
EdgeScorerParams bind_edge_scorer_params(const ParameterSet& params, const std::string& prefix);

// scores has shape (n, n, |L|), viewed as an (n*n) x |L| matrix whose row
// i*n + j scores "node i relates to node j".
struct EdgeScores {
  Tensor scores;

  Index size() const { return scores.shape().at(0); }
  Index num_labels() const { return scores.cols(); }
  Scalar operator()(Index i, Index j, Label l) const {
    return scores.value()(i * size() + j, l);
  }
};

EdgeScores score_edges(const EncoderState& state, const EdgeScorerParams& params);

// Sets every score of the labels not in `permitted` to -inf.
void mask_labels(Matrix& cell_scores, const std::vector<bool>& permitted);

// Per-cell argmax (lowest label wins ties); diagonal forced to NONE.
LabeledGraph greedy_decode(const Matrix& cell_scores, Index n);
inline LabeledGraph greedy_decode(const EdgeScores& s) {
  return greedy_decode(s.scores.value(), s.size());
}

// head_scores(i, j) scores "j is the head of i". Returns heads[i] for every
// node, with heads[root] = kNoHead. -inf entries are forbidden arcs. With
// `single_root`, exactly one node attaches to root.
std::vector<int> mst_decode(const Matrix& head_scores, int root = 0, bool single_root = true);

// Sum of head_scores(i, heads[i]) over non-root nodes.
Scalar tree_score(const Matrix& head_scores, const std::vector<int>& heads, int root = 0);

// Pooled arc scores: head_scores(i, j) = max over up-labels of cell (i, j).
Matrix pooled_head_scores(const Matrix& cell_scores, Index n, const RelationVocab& vocab);

// Labels every arc of an arborescence over graph nodes 0..n (root 0) with the
// best up-label of its cell. `heads` is indexed by graph node.
DepTree label_edges(const std::vector<int>& heads, const Matrix& cell_scores, Index n,
                    const RelationVocab& vocab);

}  // namespace g2gt

#endif  // G2GT_EDGE_DECODER_HPP_

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

#include "g2gt/edge_decoder.hpp"

#include <cmath>

namespace g2gt {

EdgeScorerParams make_edge_scorer_params(ParameterSet& params, const std::string& prefix,
                                         Index d, Index edge_dim, Index num_labels,
                                         Scalar init_std, std::mt19937_64& rng) {
  if (edge_dim <= 0 || edge_dim > d) {
    throw ValueError("edge projection width " + std::to_string(edge_dim) +
                     " must lie in [1, " + std::to_string(d) + "]");
  }
  if (num_labels <= 0) throw ValueError("edge scorer needs at least one label");
  params.add(prefix + "head_proj", gaussian(d, edge_dim, init_std, rng));
  params.add(prefix + "tail_proj", gaussian(d, edge_dim, init_std, rng));
  params.add(prefix + "bilinear", gaussian(edge_dim, num_labels * edge_dim, init_std, rng));
  params.add(prefix + "head_linear", gaussian(edge_dim, num_labels, init_std, rng));
  params.add(prefix + "tail_linear", gaussian(edge_dim, num_labels, init_std, rng));
  params.add(prefix + "bias", Matrix::Zero(1, num_labels), {num_labels});
  return bind_edge_scorer_params(params, prefix);
}

EdgeScorerParams bind_edge_scorer_params(const ParameterSet& params, const std::string& prefix) {
  EdgeScorerParams p;
  p.head_proj = params.get(prefix + "head_proj");
  p.tail_proj = params.get(prefix + "tail_proj");
  p.bilinear = params.get(prefix + "bilinear");
  p.head_linear = params.get(prefix + "head_linear");
  p.tail_linear = params.get(prefix + "tail_linear");
  p.bias = params.get(prefix + "bias");
  return p;
}

EdgeScores score_edges(const EncoderState& state, const EdgeScorerParams& params) {
  const Tensor& z = state.z;
  const Index n = z.rows();
  const Index de = params.edge_dim();
  const Index num_labels = params.num_labels();
  if (z.cols() != params.head_proj.rows() || z.cols() != params.tail_proj.rows()) {
    throw ShapeError("score_edges: node vectors " + shape_string(z.shape()) +
                     " do not match projections " + shape_string(params.head_proj.shape()));
  }
  if (params.bilinear.rows() != de || params.bilinear.cols() != num_labels * de ||
      params.head_linear.rows() != de || params.head_linear.cols() != num_labels ||
      params.tail_linear.rows() != de || params.tail_linear.cols() != num_labels) {
    throw ShapeError("score_edges: classifier shapes disagree with edge width " +
                     std::to_string(de) + " and " + std::to_string(num_labels) + " labels");
  }

  Tensor h = matmul(z, params.head_proj);
  Tensor t = matmul(z, params.tail_proj);

  Tensor hb = matmul(h, params.bilinear);
  std::vector<Tensor> per_label;
  per_label.reserve(num_labels);
  for (Index l = 0; l < num_labels; ++l) {
    per_label.push_back(reshape(matmul_nt(slice_cols(hb, l * de, de), t), {n * n, 1}));
  }
  Tensor scores = concat_cols(per_label);

  std::vector<Index> first(n * n), second(n * n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      first[i * n + j] = i;
      second[i * n + j] = j;
    }
  }
  scores = scores + gather_rows(matmul(h, params.head_linear), first);
  scores = scores + gather_rows(matmul(t, params.tail_linear), second);
  scores = add_row(scores, params.bias);
  return {reshape(scores, {n, n, num_labels})};
}

void mask_labels(Matrix& cell_scores, const std::vector<bool>& permitted) {
  if (static_cast<Index>(permitted.size()) != cell_scores.cols()) {
    throw ShapeError("mask_labels: mask covers " + std::to_string(permitted.size()) +
                     " labels, scores have " + std::to_string(cell_scores.cols()));
  }
  for (Index l = 0; l < cell_scores.cols(); ++l) {
    if (!permitted[l]) cell_scores.col(l).setConstant(kNegInf);
  }
}

LabeledGraph greedy_decode(const Matrix& cell_scores, Index n) {
  if (cell_scores.rows() != n * n) {
    throw ShapeError("greedy_decode: " + std::to_string(cell_scores.rows()) +
                     " score rows for " + std::to_string(n) + " nodes");
  }
  LabeledGraph g(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto row = cell_scores.row(i * n + j);
      Label best = 0;
      for (Index l = 1; l < row.size(); ++l) {
        if (row(l) > row(best)) best = static_cast<Label>(l);
      }
      g.set(i, j, best);
    }
  }
  return g;
}

namespace {

bool feasible(const Matrix& s, int root) {
  const int n = static_cast<int>(s.rows());
  for (int i = 0; i < n; ++i) {
    if (i == root) continue;
    bool any = false;
    for (int j = 0; j < n && !any; ++j) any = j != i && std::isfinite(s(i, j));
    if (!any) return false;
  }
  return true;
}

// Dense Chu-Liu/Edmonds on s(dependent, head). Every non-root node must have
// a finite incoming score.
std::vector<int> chu_liu_edmonds(const Matrix& s, int root) {
  const int n = static_cast<int>(s.rows());
  std::vector<int> head(n, kNoHead);
  for (int i = 0; i < n; ++i) {
    if (i == root) continue;
    int best = -1;
    for (int j = 0; j < n; ++j) {
      if (j == i || !std::isfinite(s(i, j))) continue;
      if (best < 0 || s(i, j) > s(i, best)) best = j;
    }
    if (best < 0) throw ValueError("mst_decode: no arborescence reaches every node");
    head[i] = best;
  }

  // Find one cycle among the greedy head pointers.
  std::vector<int> color(n, 0);
  std::vector<int> cycle;
  for (int start = 0; start < n && cycle.empty(); ++start) {
    if (color[start] != 0) continue;
    int v = start;
    std::vector<int> path;
    while (v != kNoHead && color[v] == 0) {
      color[v] = 1;
      path.push_back(v);
      v = head[v];
    }
    if (v != kNoHead && color[v] == 1) {
      int u = v;
      do {
        cycle.push_back(u);
        u = head[u];
      } while (u != v);
    }
    for (int p : path) color[p] = 2;
  }
  if (cycle.empty()) return head;

  std::vector<bool> in_cycle(n, false);
  for (int v : cycle) in_cycle[v] = true;
  std::vector<int> id(n, -1), original;
  for (int v = 0; v < n; ++v) {
    if (!in_cycle[v]) {
      id[v] = static_cast<int>(original.size());
      original.push_back(v);
    }
  }
  const int c = static_cast<int>(original.size());
  const int m = c + 1;
  Matrix s2 = Matrix::Constant(m, m, kNegInf);
  std::vector<int> leave_head(n, -1);  // best cycle head for outside dependent
  std::vector<int> enter_dep(n, -1);   // best cycle dependent for outside head
  for (int v : original) {
    for (int u : original) {
      if (u != v) s2(id[v], id[u]) = s(v, u);
    }
    Scalar best = kNegInf;
    for (int u : cycle) {
      if (leave_head[v] < 0 || s(v, u) > best) {
        best = s(v, u);
        leave_head[v] = u;
      }
    }
    s2(id[v], c) = best;
  }
  for (int u : original) {
    Scalar best = kNegInf;
    for (int v : cycle) {
      const Scalar gain = s(v, u) - s(v, head[v]);
      if (enter_dep[u] < 0 || gain > best) {
        best = gain;
        enter_dep[u] = v;
      }
    }
    s2(c, id[u]) = best;
  }

  const std::vector<int> h2 = chu_liu_edmonds(s2, id[root]);
  for (int v : original) {
    if (v == root) continue;
    head[v] = h2[id[v]] == c ? leave_head[v] : original[h2[id[v]]];
  }
  const int entry_head = original[h2[c]];
  head[enter_dep[entry_head]] = entry_head;
  return head;
}

}  // namespace

Scalar tree_score(const Matrix& head_scores, const std::vector<int>& heads, int root) {
  Scalar total = 0;
  for (int i = 0; i < static_cast<int>(heads.size()); ++i) {
    if (i != root) total += head_scores(i, heads[i]);
  }
  return total;
}

std::vector<int> mst_decode(const Matrix& head_scores, int root, bool single_root) {
  const int n = static_cast<int>(head_scores.rows());
  if (n == 0) throw ValueError("mst_decode: empty score matrix");
  if (head_scores.cols() != n) {
    throw ShapeError("mst_decode: head scores must be square, got " +
                     std::to_string(head_scores.rows()) + "x" +
                     std::to_string(head_scores.cols()));
  }
  if (root < 0 || root >= n) throw ValueError("mst_decode: root outside the node range");
  if (!feasible(head_scores, root)) {
    throw ValueError("mst_decode: some node has no permitted incoming arc");
  }
  std::vector<int> heads = chu_liu_edmonds(head_scores, root);
  int root_children = 0;
  for (int i = 0; i < n; ++i) root_children += (i != root && heads[i] == root);
  if (!single_root || root_children <= 1) return heads;

  // Best root swap: rerun with exactly one permitted root child per candidate.
  std::vector<int> best_heads;
  Scalar best = kNegInf;
  for (int r = 0; r < n; ++r) {
    if (r == root || !std::isfinite(head_scores(r, root))) continue;
    Matrix constrained = head_scores;
    for (int i = 0; i < n; ++i) {
      if (i != r) constrained(i, root) = kNegInf;
    }
    if (!feasible(constrained, root)) continue;
    std::vector<int> h;
    try {
      h = chu_liu_edmonds(constrained, root);
    } catch (const ValueError&) {
      continue;
    }
    const Scalar score = tree_score(head_scores, h, root);
    if (best_heads.empty() || score > best) {
      best = score;
      best_heads = std::move(h);
    }
  }
  if (best_heads.empty()) throw ValueError("mst_decode: no single-root arborescence exists");
  return best_heads;
}

Matrix pooled_head_scores(const Matrix& cell_scores, Index n, const RelationVocab& vocab) {
  if (cell_scores.rows() != n * n || cell_scores.cols() != vocab.size()) {
    throw ShapeError("pooled_head_scores: scores do not match " + std::to_string(n) +
                     " nodes and " + std::to_string(vocab.size()) + " labels");
  }
  const std::vector<Label> ups = vocab.up_labels();
  if (ups.empty()) throw ValueError("pooled_head_scores: vocabulary has no arc labels");
  Matrix out = Matrix::Constant(n, n, kNegInf);
  for (Index i = 1; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      Scalar best = kNegInf;
      for (Label l : ups) best = std::max(best, cell_scores(i * n + j, l));
      out(i, j) = best;
    }
  }
  return out;
}

DepTree label_edges(const std::vector<int>& heads, const Matrix& cell_scores, Index n,
                    const RelationVocab& vocab) {
  if (static_cast<Index>(heads.size()) != n || n == 0) {
    throw ValueError("label_edges: expected heads for " + std::to_string(n) + " nodes");
  }
  if (cell_scores.rows() != n * n || cell_scores.cols() != vocab.size()) {
    throw ShapeError("label_edges: scores do not match " + std::to_string(n) + " nodes");
  }
  DepTree tree;
  tree.head.assign(heads.begin() + 1, heads.end());
  tree.deprel.assign(n - 1, "");
  if (heads[0] != kNoHead || !is_well_formed(tree, false)) {
    throw ValueError("label_edges: heads do not form an arborescence rooted at node 0");
  }
  const std::vector<Label> ups = vocab.up_labels();
  if (ups.empty()) throw ValueError("label_edges: vocabulary has no arc labels");
  for (Index i = 1; i < n; ++i) {
    const auto row = cell_scores.row(i * n + heads[i]);
    Label best = ups.front();
    for (Label l : ups) {
      if (row(l) > row(best)) best = l;
    }
    tree.deprel[i - 1] = vocab.deprel_of(best);
  }
  return tree;
}

}  // namespace g2gt

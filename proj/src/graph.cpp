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

#include "g2gt/graph.hpp"

#include <algorithm>

namespace g2gt {

namespace {

constexpr const char* kUp = "↑";
constexpr const char* kDown = "↓";

void require_scheme(const RelationVocab& v, RelationScheme s, const char* what) {
  if (v.scheme() != s) throw ValueError(std::string(what) + ": wrong relation scheme");
}

}  // namespace

// ---- RelationVocab --------------------------------------------------------

RelationVocab RelationVocab::dependency(const std::vector<std::string>& deprels) {
  RelationVocab v;
  v.scheme_ = RelationScheme::kDependencyBidirectional;
  v.labels_ = {"NONE", "UNK"};
  for (const auto& d : deprels) {
    if (std::find(v.deprels_.begin(), v.deprels_.end(), d) != v.deprels_.end()) {
      throw ValueError("duplicate dependency relation '" + d + "'");
    }
    v.deprels_.push_back(d);
    v.labels_.push_back(d + kUp);
    v.labels_.push_back(d + kDown);
  }
  for (Label l = 0; l < static_cast<Label>(v.labels_.size()); ++l) v.index_[v.labels_[l]] = l;
  return v;
}

RelationVocab RelationVocab::coreference() {
  RelationVocab v;
  v.scheme_ = RelationScheme::kCoreference;
  v.labels_ = {"NONE", "MENTION", "COREF"};
  for (Label l = 0; l < 3; ++l) v.index_[v.labels_[l]] = l;
  return v;
}

const std::string& RelationVocab::name(Label l) const {
  if (l < 0 || l >= size()) throw ValueError("relation label " + std::to_string(l) + " out of range");
  return labels_[l];
}

std::optional<Label> RelationVocab::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Label RelationVocab::up_label(const std::string& deprel) const {
  require_scheme(*this, RelationScheme::kDependencyBidirectional, "up_label");
  auto l = find(deprel + kUp);
  return l ? *l : kUnkRelation;
}

Label RelationVocab::down_label(const std::string& deprel) const {
  require_scheme(*this, RelationScheme::kDependencyBidirectional, "down_label");
  auto l = find(deprel + kDown);
  return l ? *l : kUnkRelation;
}

bool RelationVocab::is_up(Label l) const {
  return scheme_ == RelationScheme::kDependencyBidirectional && l >= 2 && l < size() &&
         l % 2 == 0;
}

bool RelationVocab::is_down(Label l) const {
  return scheme_ == RelationScheme::kDependencyBidirectional && l >= 3 && l < size() &&
         l % 2 == 1;
}

const std::string& RelationVocab::deprel_of(Label l) const {
  if (!is_up(l) && !is_down(l)) {
    throw ValueError("label " + std::to_string(l) + " carries no dependency relation");
  }
  return deprels_[(l - 2) / 2];
}

std::vector<Label> RelationVocab::up_labels() const {
  std::vector<Label> out;
  for (Label l = 2; l < size(); l += 2) out.push_back(l);
  return out;
}

Label RelationVocab::mention() const {
  require_scheme(*this, RelationScheme::kCoreference, "mention");
  return 1;
}

Label RelationVocab::coref() const {
  require_scheme(*this, RelationScheme::kCoreference, "coref");
  return 2;
}

Index RelationVocab::input_size(GraphInputMode mode) const {
  if (mode == GraphInputMode::kUnlabeled && scheme_ == RelationScheme::kDependencyBidirectional) {
    return 4;
  }
  return size();
}

Label RelationVocab::to_input_label(Label l, GraphInputMode mode) const {
  if (mode == GraphInputMode::kLabeled || scheme_ != RelationScheme::kDependencyBidirectional) {
    return l;
  }
  if (l <= kUnkRelation) return l;
  return is_up(l) ? 2 : 3;
}

// ---- LabeledGraph ---------------------------------------------------------

LabeledGraph::LabeledGraph(Index n) : labels_(MatrixT<Label>::Zero(n, n)) {
  if (n < 0) throw ValueError("negative graph size");
}

LabeledGraph::LabeledGraph(Index n, Index num_labels, MatrixT<Label> labels)
    : labels_(std::move(labels)) {
  if (labels_.rows() != n || labels_.cols() != n) {
    throw ShapeError("label matrix is " + std::to_string(labels_.rows()) + "x" +
                     std::to_string(labels_.cols()) + ", expected " + std::to_string(n) + "x" +
                     std::to_string(n));
  }
  validate(num_labels);
}

void LabeledGraph::set(Index i, Index j, Label l) {
  if (i < 0 || j < 0 || i >= size() || j >= size()) {
    throw ValueError("graph cell (" + std::to_string(i) + "," + std::to_string(j) +
                     ") out of range");
  }
  if (i == j && l != kNoneLabel) throw ValueError("diagonal graph cells must stay NONE");
  labels_(i, j) = l;
}

void LabeledGraph::validate(Index num_labels) const {
  for (Index i = 0; i < size(); ++i) {
    if (labels_(i, i) != kNoneLabel) {
      throw DataError("graph diagonal entry " + std::to_string(i) + " is not NONE");
    }
    for (Index j = 0; j < size(); ++j) {
      const Label l = labels_(i, j);
      if (l < 0 || l >= num_labels) {
        throw DataError("graph label " + std::to_string(l) + " at (" + std::to_string(i) + "," +
                        std::to_string(j) + ") outside [0, " + std::to_string(num_labels) + ")");
      }
    }
  }
}

LabeledGraph LabeledGraph::permuted(const std::vector<Index>& perm) const {
  const Index n = size();
  if (static_cast<Index>(perm.size()) != n) throw ShapeError("permutation size mismatch");
  std::vector<bool> seen(n, false);
  for (Index p : perm) {
    if (p < 0 || p >= n || seen[p]) throw ValueError("not a permutation of the graph nodes");
    seen[p] = true;
  }
  LabeledGraph out(n);
  for (Index a = 0; a < n; ++a) {
    for (Index b = 0; b < n; ++b) out.labels_(a, b) = labels_(perm[a], perm[b]);
  }
  return out;
}

LabeledGraph LabeledGraph::mapped(const RelationVocab& vocab, GraphInputMode mode) const {
  LabeledGraph out(size());
  out.labels_ = labels_.unaryExpr([&](Label l) { return vocab.to_input_label(l, mode); });
  return out;
}

// ---- trees ----------------------------------------------------------------

bool is_well_formed(const DepTree& tree, bool single_root) {
  const int n = static_cast<int>(tree.size());
  if (tree.deprel.size() != tree.head.size()) return false;
  int root_children = 0;
  for (int h : tree.head) {
    if (h < 0 || h > n) return false;
    if (h == 0) ++root_children;
  }
  for (int k = 0; k < n; ++k) {
    if (tree.head[k] == k + 1) return false;
  }
  if (n > 0 && root_children == 0) return false;
  if (single_root && n > 0 && root_children != 1) return false;
  // 0 = unvisited, 1 = on current path, 2 = reaches root
  std::vector<int> state(n + 1, 0);
  state[0] = 2;
  for (int start = 1; start <= n; ++start) {
    std::vector<int> path;
    int v = start;
    while (state[v] == 0) {
      state[v] = 1;
      path.push_back(v);
      v = tree.head[v - 1];
    }
    if (state[v] == 1) return false;
    for (int p : path) state[p] = 2;
  }
  return true;
}

LabeledGraph dep_tree_to_graph(const DepTree& tree, const RelationVocab& vocab) {
  require_scheme(vocab, RelationScheme::kDependencyBidirectional, "dep_tree_to_graph");
  if (tree.deprel.size() != tree.head.size()) {
    throw DataError("dependency tree has " + std::to_string(tree.head.size()) + " heads but " +
                    std::to_string(tree.deprel.size()) + " relations");
  }
  const Index n = static_cast<Index>(tree.size());
  LabeledGraph g(n + 1);
  for (Index k = 0; k < n; ++k) {
    const int h = tree.head[k];
    if (h == kNoHead) continue;
    if (h < 0 || h > n || h == k + 1) {
      throw DataError("token " + std::to_string(k + 1) + " has invalid head " + std::to_string(h));
    }
    g.set(k + 1, h, vocab.up_label(tree.deprel[k]));
    g.set(h, k + 1, vocab.down_label(tree.deprel[k]));
  }
  return g;
}

DepTree graph_to_dep_tree(const LabeledGraph& graph, const RelationVocab& vocab) {
  require_scheme(vocab, RelationScheme::kDependencyBidirectional, "graph_to_dep_tree");
  const Index n = graph.size() - 1;
  if (n < 0) throw DataError("graph has no root node");
  DepTree tree;
  tree.head.assign(n, kNoHead);
  tree.deprel.assign(n, "");
  for (Index i = 1; i <= n; ++i) {
    int found = 0;
    for (Index j = 0; j <= n; ++j) {
      const Label l = graph(i, j);
      if (vocab.is_up(l)) {
        ++found;
        tree.head[i - 1] = static_cast<int>(j);
        tree.deprel[i - 1] = vocab.deprel_of(l);
      }
    }
    if (found != 1) {
      throw DataError("token " + std::to_string(i) + " has " + std::to_string(found) +
                      " head entries; graph is not a tree");
    }
  }
  if (!is_well_formed(tree, false)) throw DataError("graph contains a cycle; not a tree");
  return tree;
}

bool graph_equals(const LabeledGraph& a, const LabeledGraph& b) {
  if (a.size() != b.size()) {
    throw ShapeError("graph_equals: sizes " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " differ");
  }
  return a.labels() == b.labels();
}

Vector onehot_relation(const LabeledGraph& graph, Index i, Index j, Index num_labels) {
  if (i < 0 || j < 0 || i >= graph.size() || j >= graph.size()) {
    throw ValueError("onehot_relation: cell (" + std::to_string(i) + "," + std::to_string(j) +
                     ") out of range");
  }
  const Label l = graph(i, j);
  if (l < 0 || l >= num_labels) throw ValueError("onehot_relation: label out of range");
  Vector v = Vector::Zero(num_labels);
  v(l) = 1.0;
  return v;
}

}  // namespace g2gt

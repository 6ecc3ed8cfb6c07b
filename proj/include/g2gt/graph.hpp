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

#ifndef G2GT_GRAPH_HPP_
#define G2GT_GRAPH_HPP_

// Labeled graphs over the nodes of an input sequence, the relation label
// vocabulary, and conversions to and from dependency trees.

#include "g2gt/numerics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace g2gt {

using Label = std::int32_t;

inline constexpr Label kNoneLabel = 0;
inline constexpr Label kUnkRelation = 1;
inline constexpr int kNoHead = -1;

enum class RelationScheme {
  // NONE, UNK, then "rel↑" / "rel↓" for every dependency relation.
  kDependencyBidirectional,
  // NONE, MENTION, COREF.
  kCoreference,
};

// How a predicted graph is fed back into attention.
enum class GraphInputMode {
  kLabeled,
  // Every "↑" label collapses to one arc-up label and every "↓" to arc-down.
  kUnlabeled,
};

class RelationVocab {
 public:
  static RelationVocab dependency(const std::vector<std::string>& deprels);
  static RelationVocab coreference();

  RelationScheme scheme() const { return scheme_; }
  Index size() const { return static_cast<Index>(labels_.size()); }
  const std::string& name(Label l) const;
  const std::vector<std::string>& names() const { return labels_; }
  std::optional<Label> find(const std::string& name) const;

  // Dependency scheme only.
  const std::vector<std::string>& deprels() const { return deprels_; }
  Label up_label(const std::string& deprel) const;
  Label down_label(const std::string& deprel) const;
  bool is_up(Label l) const;
  bool is_down(Label l) const;
  // Deprel carried by an up or down label.
  const std::string& deprel_of(Label l) const;
  std::vector<Label> up_labels() const;

  // Coreference scheme only.
  Label mention() const;
  Label coref() const;

  // Size of the label space attention reads in the given mode.
  Index input_size(GraphInputMode mode) const;
  Label to_input_label(Label l, GraphInputMode mode) const;

 private:
  RelationScheme scheme_ = RelationScheme::kDependencyBidirectional;
  std::vector<std::string> labels_;
  std::vector<std::string> deprels_;
  std::unordered_map<std::string, Label> index_;
};

// n x n matrix of relation labels. Entry (i, j) labels the relation of node i
// towards node j. Diagonal entries are NONE.
class LabeledGraph {
 public:
  LabeledGraph() = default;
  explicit LabeledGraph(Index n);
  LabeledGraph(Index n, Index num_labels, MatrixT<Label> labels);

  Index size() const { return labels_.rows(); }
  Label operator()(Index i, Index j) const { return labels_(i, j); }
  void set(Index i, Index j, Label l);
  const MatrixT<Label>& labels() const { return labels_; }

  // Raises if an entry lies outside [0, num_labels) or the diagonal is set.
  void validate(Index num_labels) const;

  // Node k of the result is node perm[k] of this graph.
  LabeledGraph permuted(const std::vector<Index>& perm) const;
  LabeledGraph mapped(const RelationVocab& vocab, GraphInputMode mode) const;

  friend bool operator==(const LabeledGraph& a, const LabeledGraph& b) {
    return a.labels_.rows() == b.labels_.rows() && a.labels_ == b.labels_;
  }

 private:
  MatrixT<Label> labels_;
};

// Dependency tree over tokens 1..n; head[k] and deprel[k] describe token k+1.
// Heads index graph nodes: 0 is the virtual root, kNoHead is unset.
struct DepTree {
  std::vector<int> head;
  std::vector<std::string> deprel;

  std::size_t size() const { return head.size(); }
  friend bool operator==(const DepTree&, const DepTree&) = default;
};

// True when every token has a head, heads are in range, and following heads
// from any token reaches the root without a cycle. With `single_root`, exactly
// one token attaches to the root.
bool is_well_formed(const DepTree& tree, bool single_root);

// Graph over n+1 nodes (node 0 = virtual root). Dependent i with head j sets
// (i, j) = "deprel↑" and (j, i) = "deprel↓". Unknown relations map to UNK.
LabeledGraph dep_tree_to_graph(const DepTree& tree, const RelationVocab& vocab);

// Inverse of dep_tree_to_graph. Raises DataError unless every token has
// exactly one up-label entry and the result is acyclic.
DepTree graph_to_dep_tree(const LabeledGraph& graph, const RelationVocab& vocab);

// Identical label matrices. Raises on size mismatch.
bool graph_equals(const LabeledGraph& a, const LabeledGraph& b);

Vector onehot_relation(const LabeledGraph& graph, Index i, Index j, Index num_labels);

}  // namespace g2gt

#endif  // G2GT_GRAPH_HPP_

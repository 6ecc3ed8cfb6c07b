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

#include "doctest.h"
#include "oracles.hpp"

#include "g2gt/edge_decoder.hpp"

#include <cmath>
#include <random>

using namespace g2gt;

namespace {

struct Scorer {
  ParameterSet params;
  EdgeScorerParams p;

  Scorer(Index d, Index de, Index labels, std::uint64_t seed, Scalar scale = 0.5) {
    std::mt19937_64 rng(seed);
    p = make_edge_scorer_params(params, "s.", d, de, labels, 0.02, rng);
    oracle::randomize(params, rng, scale);
  }
};

// Independent evaluation of the biaffine score of one cell.
Scalar biaffine_cell(const Matrix& z, const EdgeScorerParams& p, Index i, Index j, Index l) {
  const Matrix h = oracle::naive_matmul(z, p.head_proj.value());
  const Matrix t = oracle::naive_matmul(z, p.tail_proj.value());
  const Index de = p.edge_dim();
  Scalar s = p.bias.value().data()[l];
  for (Index a = 0; a < de; ++a) {
    s += p.head_linear.value()(a, l) * h(i, a) + p.tail_linear.value()(a, l) * t(j, a);
    for (Index b = 0; b < de; ++b) s += h(i, a) * p.bilinear.value()(a, l * de + b) * t(j, b);
  }
  return s;
}

bool valid_arborescence(const std::vector<int>& heads, int root, bool single_root) {
  const int n = static_cast<int>(heads.size());
  if (heads[root] != kNoHead) return false;
  int root_children = 0;
  for (int i = 0; i < n; ++i) {
    if (i == root) continue;
    if (heads[i] < 0 || heads[i] >= n || heads[i] == i) return false;
    root_children += heads[i] == root;
    int v = i, steps = 0;
    while (v != root && steps <= n) {
      v = heads[v];
      ++steps;
    }
    if (v != root) return false;
  }
  return !single_root || n == 1 || root_children == 1;
}

Matrix random_head_scores(int n, std::mt19937_64& rng) {
  Matrix s = oracle::random_matrix(n, n, rng);
  for (int i = 0; i < n; ++i) s(i, i) = kNegInf;
  return s;
}

}  // namespace

TEST_SUITE("score_edges") {
  TEST_CASE("zero classifier gives zero scores") {
    Scorer s(6, 3, 4, 1);
    for (auto& p : s.params) p.tensor.mutable_value().setZero();
    std::mt19937_64 rng(2);
    const EdgeScores e = score_edges({Tensor::constant(oracle::random_matrix(5, 6, rng))}, s.p);
    CHECK(e.size() == 5);
    CHECK(e.num_labels() == 4);
    CHECK(e.scores.value().cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("scalar hand evaluation") {
    Scorer s(1, 1, 1, 3);
    for (auto& p : s.params) p.tensor.mutable_value().setZero();
    s.p.head_proj.mutable_value()(0, 0) = 2.0;
    s.p.tail_proj.mutable_value()(0, 0) = 3.0;
    s.p.bilinear.mutable_value()(0, 0) = 1.0;
    const EdgeScores e = score_edges({Tensor::constant(Matrix::Ones(1, 1))}, s.p);
    CHECK(e(0, 0, 0) == 6.0);
  }

  TEST_CASE("every cell matches the biaffine formula") {
    Scorer s(5, 3, 4, 4);
    std::mt19937_64 rng(5);
    const Matrix z = oracle::random_matrix(4, 5, rng);
    const EdgeScores e = score_edges({Tensor::constant(z)}, s.p);
    for (Index i = 0; i < 4; ++i) {
      for (Index j = 0; j < 4; ++j) {
        for (Index l = 0; l < 4; ++l) {
          REQUIRE(std::abs(e(i, j, static_cast<Label>(l)) - biaffine_cell(z, s.p, i, j, l)) <=
                  1e-12);
        }
      }
    }
  }

  TEST_CASE("a pair's scores ignore every other node") {
    Scorer s(6, 4, 3, 6);
    std::mt19937_64 rng(7);
    const Matrix z = oracle::random_matrix(5, 6, rng);
    const Matrix before = score_edges({Tensor::constant(z)}, s.p).scores.value();
    Matrix z2 = z;
    z2.row(4) = oracle::random_matrix(1, 6, rng, 10.0);
    const Matrix after = score_edges({Tensor::constant(z2)}, s.p).scores.value();
    for (Index i = 0; i < 4; ++i) {
      for (Index j = 0; j < 4; ++j) CHECK(after.row(i * 5 + j) == before.row(i * 5 + j));
    }
  }

  TEST_CASE("gradients pass grad_check") {
    Scorer s(8, 4, 3, 8);
    std::mt19937_64 rng(9);
    ParameterSet& params = s.params;
    const Tensor z = params.add("z", oracle::random_matrix(4, 8, rng));
    const Tensor readout = Tensor::constant(oracle::random_matrix(16, 3, rng), {4, 4, 3});
    const auto report = grad_check(
        [&] { return sum(mul(log_softmax_rows(score_edges({z}, s.p).scores), readout)); }, params);
    for (const auto& e : report.entries) {
      INFO(e.name << " rel error " << e.max_rel_error);
      CHECK(e.passed);
    }
  }

  TEST_CASE("shape mismatch is rejected") {
    Scorer s(6, 3, 4, 10);
    CHECK_THROWS_AS(score_edges({Tensor::constant(Matrix::Zero(3, 5))}, s.p), ShapeError);
  }
}

TEST_SUITE("greedy_decode") {
  TEST_CASE("all-zero scores decode to NONE") {
    CHECK(greedy_decode(Matrix::Zero(16, 3), 4) == LabeledGraph(4));
  }

  TEST_CASE("single maximum") {
    Matrix s = Matrix::Zero(9, 4);
    s(1 * 3 + 2, 2) = 0.5;
    const LabeledGraph g = greedy_decode(s, 3);
    CHECK(g(1, 2) == 2);
    CHECK(g(2, 1) == kNoneLabel);
  }

  TEST_CASE("diagonal is forced to NONE") {
    Matrix s = Matrix::Zero(4, 3);
    s(0, 2) = 5.0;
    s(3, 1) = 5.0;
    const LabeledGraph g = greedy_decode(s, 2);
    CHECK(g(0, 0) == kNoneLabel);
    CHECK(g(1, 1) == kNoneLabel);
  }

  TEST_CASE("ties go to the lowest label") {
    Matrix s = Matrix::Zero(4, 4);
    s.row(1) << 0.0, 1.0, 1.0, 1.0;
    CHECK(greedy_decode(s, 2)(0, 1) == 1);
  }

  TEST_CASE("random scores against exhaustive argmax") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
      const Matrix s = oracle::random_matrix(16, 3, rng);
      const LabeledGraph g = greedy_decode(s, 4);
      for (Index i = 0; i < 4; ++i) {
        for (Index j = 0; j < 4; ++j) {
          if (i == j) continue;
          Label best = 0;
          for (Label l = 1; l < 3; ++l) {
            if (s(i * 4 + j, l) > s(i * 4 + j, best)) best = l;
          }
          REQUIRE(g(i, j) == best);
        }
      }
    }
  }

  TEST_CASE("invariant under strictly increasing transforms") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
      const Matrix s = oracle::random_matrix(25, 6, rng);
      const LabeledGraph g = greedy_decode(s, 5);
      const Matrix cubic = (2.0 * s.array().cube() + s.array() - 7.0).matrix();
      const Matrix expo = s.array().exp().matrix();
      REQUIRE(greedy_decode(cubic, 5) == g);
      REQUIRE(greedy_decode(expo, 5) == g);
    }
  }

  TEST_CASE("masked labels are never chosen") {
    std::mt19937_64 rng(13);
    Matrix s = oracle::random_matrix(16, 3, rng, 5.0);
    mask_labels(s, {true, true, false});
    const LabeledGraph g = greedy_decode(s, 4);
    CHECK((g.labels().array() != 2).all());
    CHECK_THROWS_AS(mask_labels(s, {true, false}), ShapeError);
  }
}

TEST_SUITE("mst_decode") {
  TEST_CASE("root plus one token") {
    Matrix s(2, 2);
    s << kNegInf, -3.0, 0.5, kNegInf;
    CHECK(mst_decode(s) == std::vector<int>{kNoHead, 0});
  }

  TEST_CASE("empty input is rejected") {
    CHECK_THROWS_AS(mst_decode(Matrix(0, 0)), ValueError);
  }

  TEST_CASE("per-token argmax that is already a tree is kept") {
    // 3 <- 2 <- 1 <- 0
    Matrix s = Matrix::Constant(4, 4, -1.0);
    s(1, 0) = 5;
    s(2, 1) = 5;
    s(3, 2) = 5;
    CHECK(mst_decode(s) == std::vector<int>{kNoHead, 0, 1, 2});
  }

  TEST_CASE("cycle in the argmax is broken optimally") {
    // 1 and 2 prefer each other.
    Matrix s = Matrix::Constant(3, 3, 0.0);
    s(1, 2) = 10;
    s(2, 1) = 9;
    s(1, 0) = 1;
    s(2, 0) = 3;
    const auto heads = mst_decode(s);
    CHECK(heads == std::vector<int>{kNoHead, 2, 0});
  }

  TEST_CASE("single root constraint") {
    // Unconstrained optimum attaches both tokens to the root.
    Matrix s = Matrix::Constant(3, 3, 0.0);
    s(1, 0) = 5;
    s(2, 0) = 5;
    s(1, 2) = 1;
    s(2, 1) = 2;
    CHECK(mst_decode(s, 0, false) == std::vector<int>{kNoHead, 0, 0});
    CHECK(mst_decode(s, 0, true) == std::vector<int>{kNoHead, 0, 1});
  }

  TEST_CASE("optimal against brute force for n up to 5") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = 2 + trial % 4;
      const Matrix s = random_head_scores(n, rng);
      for (bool single : {true, false}) {
        const auto heads = mst_decode(s, 0, single);
        REQUIRE(valid_arborescence(heads, 0, single));
        REQUIRE(std::abs(tree_score(s, heads) - oracle::brute_force_best(s, 0, single)) <= 1e-12);
      }
    }
  }

  TEST_CASE("non-zero root") {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 100; ++trial) {
      const Matrix s = random_head_scores(4, rng);
      const auto heads = mst_decode(s, 2, false);
      REQUIRE(valid_arborescence(heads, 2, false));
      REQUIRE(std::abs(tree_score(s, heads, 2) - oracle::brute_force_best(s, 2, false)) <= 1e-12);
    }
  }

  TEST_CASE("forbidden arcs") {
    std::mt19937_64 rng(16);
    for (int trial = 0; trial < 200; ++trial) {
      Matrix s = random_head_scores(5, rng);
      std::bernoulli_distribution drop(0.3);
      for (Index i = 1; i < 5; ++i) {
        for (Index j = 0; j < 5; ++j) {
          if (drop(rng)) s(i, j) = kNegInf;
        }
      }
      const Scalar best = oracle::brute_force_best(s, 0, true);
      if (std::isinf(best)) {
        CHECK_THROWS_AS(mst_decode(s), ValueError);
      } else {
        const auto heads = mst_decode(s);
        REQUIRE(valid_arborescence(heads, 0, true));
        REQUIRE(std::abs(tree_score(s, heads) - best) <= 1e-12);
      }
    }
  }

  TEST_CASE("beats random arborescences and stays valid up to n=12") {
    std::mt19937_64 rng(17);
    const std::vector<std::string> rel = {"x"};
    for (int trial = 0; trial < 300; ++trial) {
      const int n = 2 + trial % 11;
      const Matrix s = random_head_scores(n, rng);
      const auto heads = mst_decode(s);
      REQUIRE(valid_arborescence(heads, 0, true));
      const Scalar best = tree_score(s, heads);
      for (int k = 0; k < 20; ++k) {
        const DepTree t = oracle::random_tree(n - 1, rel, rng, true);
        std::vector<int> h = {kNoHead};
        h.insert(h.end(), t.head.begin(), t.head.end());
        REQUIRE(tree_score(s, h) <= best + 1e-12);
      }
    }
  }
}

TEST_SUITE("label_edges") {
  const RelationVocab two = RelationVocab::dependency({"nsubj", "obj"});

  TEST_CASE("one candidate label") {
    const auto one = RelationVocab::dependency({"root"});
    const DepTree t = label_edges({kNoHead, 0}, Matrix::Zero(4, one.size()), 2, one);
    CHECK(t.head == std::vector<int>{0});
    CHECK(t.deprel == std::vector<std::string>{"root"});
  }

  TEST_CASE("clear maximum") {
    Matrix s = Matrix::Zero(9, two.size());
    s(1 * 3 + 0, two.up_label("obj")) = 2.0;
    s(2 * 3 + 1, two.up_label("nsubj")) = 2.0;
    // Down labels and other cells never matter.
    s(2 * 3 + 1, two.down_label("obj")) = 50.0;
    s(2 * 3 + 0, two.up_label("obj")) = 50.0;
    const DepTree t = label_edges({kNoHead, 0, 1}, s, 3, two);
    CHECK(t.head == std::vector<int>{0, 1});
    CHECK(t.deprel == std::vector<std::string>{"obj", "nsubj"});
  }

  TEST_CASE("random instances against exhaustive restricted argmax") {
    const auto vocab = RelationVocab::dependency({"a", "b", "c", "d"});
    std::mt19937_64 rng(18);
    for (int trial = 0; trial < 200; ++trial) {
      const Index n = 2 + trial % 6;
      const Matrix s = oracle::random_matrix(n * n, vocab.size(), rng);
      const DepTree skeleton = oracle::random_tree(static_cast<int>(n - 1), {"a"}, rng, false);
      std::vector<int> heads = {kNoHead};
      heads.insert(heads.end(), skeleton.head.begin(), skeleton.head.end());
      const DepTree t = label_edges(heads, s, n, vocab);
      for (Index i = 1; i < n; ++i) {
        Label best = -1;
        for (Label l = 0; l < vocab.size(); ++l) {
          if (!vocab.is_up(l)) continue;
          if (best < 0 || s(i * n + heads[i], l) > s(i * n + heads[i], best)) best = l;
        }
        REQUIRE(t.deprel[i - 1] == vocab.deprel_of(best));
      }
    }
  }

  TEST_CASE("invalid skeleton is rejected") {
    const Matrix s = Matrix::Zero(9, two.size());
    CHECK_THROWS_AS(label_edges({kNoHead, 2, 1}, s, 3, two), ValueError);
    CHECK_THROWS_AS(label_edges({1, 0, 0}, s, 3, two), ValueError);
    CHECK_THROWS_AS(label_edges({kNoHead, 0}, s, 3, two), ValueError);
  }
}

TEST_CASE("pooled head scores take the best up label") {
  const auto vocab = RelationVocab::dependency({"a", "b"});
  std::mt19937_64 rng(19);
  const Matrix s = oracle::random_matrix(9, vocab.size(), rng);
  const Matrix h = pooled_head_scores(s, 3, vocab);
  CHECK((h.row(0).array() == kNegInf).all());
  for (Index i = 1; i < 3; ++i) {
    CHECK(h(i, i) == kNegInf);
    for (Index j = 0; j < 3; ++j) {
      if (i == j) continue;
      CHECK(h(i, j) == std::max(s(i * 3 + j, 2), s(i * 3 + j, 4)));
    }
  }
}

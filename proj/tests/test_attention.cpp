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

#include "g2gt/attention.hpp"

#include <numeric>
#include <random>

using namespace g2gt;

namespace {

struct Fixture {
  G2GLayerConfig cfg;
  ParameterSet params;
  EncoderParams enc;

  Fixture(Index d, Index heads, Index layers, Index num_labels, std::uint64_t seed,
          Scalar scale = 0.4) {
    cfg.d = d;
    cfg.heads = heads;
    cfg.d_ff = 2 * d;
    cfg.layers = layers;
    std::mt19937_64 rng(seed);
    enc = make_encoder_params(params, "enc.", cfg, num_labels, 0.02, rng);
    oracle::randomize(params, rng, scale);
  }

  Matrix run(const Matrix& x, const LabeledGraph& g) const {
    return encode(Tensor::constant(x), g, cfg, enc).z.value();
  }
};

Tensor c(const Matrix& m) { return Tensor::constant(m); }

Matrix permute_rows(const Matrix& m, const std::vector<Index>& perm) {
  Matrix out(m.rows(), m.cols());
  for (Index k = 0; k < m.rows(); ++k) out.row(k) = m.row(perm[k]);
  return out;
}

}  // namespace

TEST_SUITE("attention_scores") {
  TEST_CASE("zero relation tables give scaled dot products exactly") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
      const Index n = 1 + trial % 6;
      const Matrix q = oracle::random_matrix(n, 4, rng);
      const Matrix k = oracle::random_matrix(n, 4, rng);
      const LabeledGraph g = oracle::random_graph(n, 5, rng);
      const Matrix zero = Matrix::Zero(5, 4);
      const Matrix e = attention_scores(c(q), c(k), g, c(zero), c(zero), true).value();
      const Matrix vanilla = (q * k.transpose()) / 2.0;
      CHECK(e == vanilla);
    }
  }

  TEST_CASE("scalar hand evaluation") {
    // Node 0 has q = 2, node 1 has k = 3; the label of cell (0, 1) has
    // relation rows 0.5 (query side) and 0.25 (key side).
    Matrix x(2, 1);
    x << 2, 3;
    LabeledGraph g(2);
    g.set(0, 1, 1);
    Matrix r1(2, 1), r2(2, 1);
    r1 << 0, 0.5;
    r2 << 0, 0.25;
    const Matrix e = attention_scores(c(x), c(x), g, c(r1), c(r2), true).value();
    CHECK(e(0, 1) == 7.75);
    const Matrix e_nokey = attention_scores(c(x), c(x), g, c(r1), c(r2), false).value();
    CHECK(e_nokey(0, 1) == 7.0);
  }

  TEST_CASE("all-NONE graph with a zero NONE row is vanilla attention") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
      const Index n = 1 + trial % 8;
      const Matrix q = oracle::random_matrix(n, 4, rng);
      const Matrix k = oracle::random_matrix(n, 4, rng);
      Matrix r1 = oracle::random_matrix(5, 4, rng);
      Matrix r2 = oracle::random_matrix(5, 4, rng);
      r1.row(0).setZero();
      r2.row(0).setZero();
      const Matrix e = attention_scores(c(q), c(k), LabeledGraph(n), c(r1), c(r2), true).value();
      REQUIRE(e == (q * k.transpose()) / 2.0);
    }
  }

  TEST_CASE("random n=4 instance against the double loop") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix q = oracle::random_matrix(4, 3, rng);
      const Matrix k = oracle::random_matrix(4, 3, rng);
      const Matrix r1 = oracle::random_matrix(4, 3, rng);
      const Matrix r2 = oracle::random_matrix(4, 3, rng);
      const LabeledGraph g = oracle::random_graph(4, 4, rng);
      for (bool key_term : {true, false}) {
        const Matrix e = attention_scores(c(q), c(k), g, c(r1), c(r2), key_term).value();
        const Matrix ref = oracle::g2g_scores(q, k, g, r1, r2, key_term);
        REQUIRE((e - ref).cwiseAbs().maxCoeff() <= 1e-12);
      }
    }
  }

  TEST_CASE("mismatched relation width is rejected") {
    const Matrix q = Matrix::Ones(3, 4);
    CHECK_THROWS_AS(attention_scores(c(q), c(q), LabeledGraph(3), c(Matrix::Zero(2, 3)),
                                     c(Matrix::Zero(2, 3)), true),
                    ShapeError);
    CHECK_THROWS_AS(attention_scores(c(q), c(q), LabeledGraph(2), c(Matrix::Zero(2, 4)),
                                     c(Matrix::Zero(2, 4)), true),
                    ShapeError);
  }

  TEST_CASE("softmax of the scores is row-stochastic") {
    std::mt19937_64 rng(4);
    const Matrix q = oracle::random_matrix(6, 4, rng, 3.0);
    const LabeledGraph g = oracle::random_graph(6, 5, rng);
    const Matrix r = oracle::random_matrix(5, 4, rng, 3.0);
    const Matrix a = softmax_rows(attention_scores(c(q), c(q), g, c(r), c(r), true)).value();
    for (Index i = 0; i < 6; ++i) CHECK(std::abs(a.row(i).sum() - 1.0) <= 1e-9);
  }
}

TEST_SUITE("attention_values") {
  TEST_CASE("zero value table gives weighted values") {
    std::mt19937_64 rng(5);
    const Matrix alpha = softmax_rows(c(oracle::random_matrix(5, 5, rng))).value();
    const Matrix v = oracle::random_matrix(5, 3, rng);
    const Matrix z =
        attention_values(c(alpha), c(v), oracle::random_graph(5, 4, rng), c(Matrix::Zero(4, 3)), true)
            .value();
    CHECK((z - alpha * v).cwiseAbs().maxCoeff() <= 1e-15);
  }

  TEST_CASE("single node returns v plus u") {
    Matrix v(1, 2), r3(2, 2);
    v << 1.5, -2.0;
    r3 << 0.25, 0.5, 9.0, 9.0;
    const Matrix z = attention_values(c(Matrix::Ones(1, 1)), c(v), LabeledGraph(1), c(r3), true).value();
    CHECK(z(0, 0) == 1.75);
    CHECK(z(0, 1) == -1.5);
  }

  TEST_CASE("random n=4 instance against the double loop") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix alpha = softmax_rows(c(oracle::random_matrix(4, 4, rng))).value();
      const Matrix v = oracle::random_matrix(4, 3, rng);
      const Matrix r3 = oracle::random_matrix(4, 3, rng);
      const LabeledGraph g = oracle::random_graph(4, 4, rng);
      for (bool value_term : {true, false}) {
        const Matrix z = attention_values(c(alpha), c(v), g, c(r3), value_term).value();
        REQUIRE((z - oracle::g2g_values(alpha, v, g, r3, value_term)).cwiseAbs().maxCoeff() <=
                1e-12);
      }
    }
  }

  TEST_CASE("mismatched weights are rejected") {
    CHECK_THROWS_AS(attention_values(c(Matrix::Ones(3, 3)), c(Matrix::Ones(4, 2)), LabeledGraph(3),
                                     c(Matrix::Zero(2, 2)), true),
                    ShapeError);
  }
}

TEST_SUITE("encode") {
  TEST_CASE("zero relation tables reduce to a vanilla encoder") {
    Fixture f(16, 4, 2, 6, 7);
    f.enc.relations.query.mutable_value().setZero();
    f.enc.relations.key.mutable_value().setZero();
    f.enc.relations.value.mutable_value().setZero();
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 25; ++trial) {
      const Index n = 1 + trial % 8;
      const Matrix x = oracle::random_matrix(n, 16, rng);
      const Matrix z = f.run(x, oracle::random_graph(n, 6, rng));
      REQUIRE((z - oracle::vanilla_encoder(x, f.cfg, f.enc)).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }

  TEST_CASE("permutation equivariance") {
    Fixture f(8, 2, 2, 5, 9);
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 30; ++trial) {
      const Index n = 2 + trial % 7;
      const Matrix x = oracle::random_matrix(n, 8, rng);
      const LabeledGraph g = oracle::random_graph(n, 5, rng);
      std::vector<Index> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      const Matrix a = permute_rows(f.run(x, g), perm);
      const Matrix b = f.run(permute_rows(x, perm), g.permuted(perm));
      REQUIRE((a - b).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }

  TEST_CASE("single node ignores every relation row except NONE") {
    Fixture f(8, 2, 2, 5, 11);
    std::mt19937_64 rng(12);
    const Matrix x = oracle::random_matrix(1, 8, rng);
    const Matrix before = f.run(x, LabeledGraph(1));
    for (Tensor* t : {&f.enc.relations.query, &f.enc.relations.key, &f.enc.relations.value}) {
      t->mutable_value().bottomRows(4) = oracle::random_matrix(4, 8, rng, 5.0);
    }
    CHECK(f.run(x, LabeledGraph(1)) == before);
  }

  TEST_CASE("ablated terms ignore their relation table bit for bit") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 10; ++trial) {
      Fixture f(8, 2, 2, 5, 100 + trial);
      const Index n = 1 + trial % 6;
      const Matrix x = oracle::random_matrix(n, 8, rng);
      const LabeledGraph g = oracle::random_graph(n, 5, rng);

      f.cfg.use_key_term = false;
      const Matrix before_key = f.run(x, g);
      f.enc.relations.key.mutable_value() = oracle::random_matrix(5, 8, rng, 3.0);
      CHECK(f.run(x, g) == before_key);

      f.cfg.use_key_term = true;
      f.cfg.use_value_term = false;
      const Matrix before_value = f.run(x, g);
      f.enc.relations.value.mutable_value() = oracle::random_matrix(5, 8, rng, 3.0);
      CHECK(f.run(x, g) == before_value);
    }
  }

  TEST_CASE("frozen NONE rows read as zero whatever their stored value") {
    Fixture f(8, 2, 1, 5, 14);
    f.cfg.freeze_none_relation = true;
    std::mt19937_64 rng(15);
    const Matrix x = oracle::random_matrix(4, 8, rng);
    const LabeledGraph g = oracle::random_graph(4, 5, rng);
    const Matrix before = f.run(x, g);
    f.enc.relations.query.mutable_value().row(0) = oracle::random_matrix(1, 8, rng);
    CHECK(f.run(x, g) == before);
  }

  TEST_CASE("layer gradients pass grad_check") {
    for (bool freeze : {false, true}) {
      Fixture f(8, 2, 1, 4, 16, 0.5);
      f.cfg.freeze_none_relation = freeze;
      std::mt19937_64 rng(17);
      const Matrix x = oracle::random_matrix(5, 8, rng);
      const LabeledGraph g = oracle::random_graph(5, 4, rng);
      const Tensor readout = c(oracle::random_matrix(5, 8, rng));
      const auto report =
          grad_check([&] { return sum(mul(encode(c(x), g, f.cfg, f.enc).z, readout)); }, f.params);
      for (const auto& e : report.entries) {
        INFO(e.name << " rel error " << e.max_rel_error);
        CHECK(e.passed);
      }
    }
  }

  TEST_CASE("shape errors") {
    Fixture f(8, 2, 1, 4, 18);
    CHECK_THROWS_AS(f.run(Matrix::Zero(3, 6), LabeledGraph(3)), ShapeError);
    CHECK_THROWS_AS(f.run(Matrix::Zero(3, 8), LabeledGraph(4)), ShapeError);
    LabeledGraph bad(3);
    bad.set(0, 1, 7);
    CHECK_THROWS_AS(f.run(Matrix::Zero(3, 8), bad), ShapeError);
  }
}

TEST_CASE("configuration validation") {
  G2GLayerConfig cfg;
  cfg.d = 10;
  cfg.heads = 4;
  CHECK_THROWS_AS(cfg.validate(), ValueError);
  cfg.d = 0;
  CHECK_THROWS_AS(cfg.validate(), ValueError);
}

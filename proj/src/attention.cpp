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

#include "g2gt/attention.hpp"

#include <cmath>

namespace g2gt {

namespace {

struct CellIndex {
  std::vector<Index> row;
  std::vector<Index> col;
};

// Index lists for reading, for every cell (i, j) in row-major order,
// element (i, label) and element (j, label) of an n x |L| matrix.
void label_indices(const LabeledGraph& graph, CellIndex& by_row, CellIndex& by_col) {
  const Index n = graph.size();
  by_row.row.resize(n * n);
  by_row.col.resize(n * n);
  by_col.row.resize(n * n);
  by_col.col.resize(n * n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const Index k = i * n + j;
      by_row.row[k] = i;
      by_row.col[k] = graph(i, j);
      by_col.row[k] = j;
      by_col.col[k] = graph(i, j);
    }
  }
}

void check_labels(const LabeledGraph& graph, Index num_labels) {
  for (Index i = 0; i < graph.size(); ++i) {
    for (Index j = 0; j < graph.size(); ++j) {
      if (graph(i, j) < 0 || graph(i, j) >= num_labels) {
        throw ShapeError("graph label " + std::to_string(graph(i, j)) +
                         " has no relation embedding row (table has " +
                         std::to_string(num_labels) + ")");
      }
    }
  }
}

Tensor relation_table(ParameterSet& params, const std::string& name, Index rows, Index d,
                             Scalar init_std, std::mt19937_64& rng) {
  return params.add(name, gaussian(rows, d, init_std, rng), {rows, d});
}

}  // namespace

void G2GLayerConfig::validate() const {
  if (d <= 0 || heads <= 0 || d_ff <= 0 || layers < 0) {
    throw ValueError("encoder dimensions must be positive");
  }
  if (d % heads != 0) {
    throw ValueError("model width " + std::to_string(d) + " is not divisible by " +
                     std::to_string(heads) + " heads");
  }
}

EncoderParams make_encoder_params(ParameterSet& params, const std::string& prefix,
                                  const G2GLayerConfig& cfg, Index num_relations,
                                  Scalar init_std, std::mt19937_64& rng) {
  cfg.validate();
  const Index d = cfg.d;
  relation_table(params, prefix + "rel.query", num_relations, d, init_std, rng);
  relation_table(params, prefix + "rel.key", num_relations, d, init_std, rng);
  relation_table(params, prefix + "rel.value", num_relations, d, init_std, rng);
  for (Index l = 0; l < cfg.layers; ++l) {
    const std::string p = prefix + "layer" + std::to_string(l) + ".";
    params.add(p + "wq", gaussian(d, d, init_std, rng));
    params.add(p + "wk", gaussian(d, d, init_std, rng));
    params.add(p + "wv", gaussian(d, d, init_std, rng));
    params.add(p + "wo", gaussian(d, d, init_std, rng));
    params.add(p + "ln1.gain", Matrix::Ones(1, d), {d});
    params.add(p + "ln1.bias", Matrix::Zero(1, d), {d});
    params.add(p + "ff1.w", gaussian(d, cfg.d_ff, init_std, rng));
    params.add(p + "ff1.b", Matrix::Zero(1, cfg.d_ff), {cfg.d_ff});
    params.add(p + "ff2.w", gaussian(cfg.d_ff, d, init_std, rng));
    params.add(p + "ff2.b", Matrix::Zero(1, d), {d});
    params.add(p + "ln2.gain", Matrix::Ones(1, d), {d});
    params.add(p + "ln2.bias", Matrix::Zero(1, d), {d});
  }
  return bind_encoder_params(params, prefix, cfg);
}

EncoderParams bind_encoder_params(const ParameterSet& params, const std::string& prefix,
                                  const G2GLayerConfig& cfg) {
  EncoderParams out;
  out.relations.query = params.get(prefix + "rel.query");
  out.relations.key = params.get(prefix + "rel.key");
  out.relations.value = params.get(prefix + "rel.value");
  for (Index l = 0; l < cfg.layers; ++l) {
    const std::string p = prefix + "layer" + std::to_string(l) + ".";
    EncoderLayerParams layer;
    layer.wq = params.get(p + "wq");
    layer.wk = params.get(p + "wk");
    layer.wv = params.get(p + "wv");
    layer.wo = params.get(p + "wo");
    layer.ln1_gain = params.get(p + "ln1.gain");
    layer.ln1_bias = params.get(p + "ln1.bias");
    layer.ff1_w = params.get(p + "ff1.w");
    layer.ff1_b = params.get(p + "ff1.b");
    layer.ff2_w = params.get(p + "ff2.w");
    layer.ff2_b = params.get(p + "ff2.b");
    layer.ln2_gain = params.get(p + "ln2.gain");
    layer.ln2_bias = params.get(p + "ln2.bias");
    out.layers.push_back(std::move(layer));
  }
  return out;
}

RelationEmbeddings effective_relations(const RelationEmbeddings& rel, const G2GLayerConfig& cfg) {
  if (!cfg.freeze_none_relation) return rel;
  // Zero mask on the NONE row: value pinned at 0 and no gradient reaches it.
  Matrix mask = Matrix::Ones(rel.query.rows(), rel.query.cols());
  if (mask.rows() > 0) mask.row(0).setZero();
  const Tensor m = Tensor::constant(mask);
  return {mul(rel.query, m), mul(rel.key, m), mul(rel.value, m)};
}

Tensor attention_scores(const Tensor& queries, const Tensor& keys, const LabeledGraph& graph,
                        const Tensor& rel_query, const Tensor& rel_key, bool use_key_term) {
  const Index n = queries.rows();
  const Index dh = queries.cols();
  if (keys.rows() != n || keys.cols() != dh) {
    throw ShapeError("attention_scores: keys " + shape_string(keys.shape()) +
                     " do not match queries " + shape_string(queries.shape()));
  }
  if (graph.size() != n) {
    throw ShapeError("attention_scores: graph over " + std::to_string(graph.size()) +
                     " nodes for " + std::to_string(n) + " inputs");
  }
  if (rel_query.cols() != dh || (use_key_term && rel_key.cols() != dh)) {
    throw ShapeError("attention_scores: relation width " + std::to_string(rel_query.cols()) +
                     " does not match head width " + std::to_string(dh));
  }
  check_labels(graph, rel_query.rows());

  CellIndex by_row, by_col;
  label_indices(graph, by_row, by_col);

  Tensor logits = matmul_nt(queries, keys);
  // q_i . R1[l_ij]: all (query, label) products, then one pick per cell.
  Tensor q_rel = matmul_nt(queries, rel_query);
  logits = logits + gather_elements(q_rel, by_row.row, by_row.col, {n, n});
  if (use_key_term) {
    Tensor k_rel = matmul_nt(keys, rel_key);
    logits = logits + gather_elements(k_rel, by_col.row, by_col.col, {n, n});
  }
  return scale(logits, 1.0 / std::sqrt(static_cast<Scalar>(dh)));
}

Tensor attention_values(const Tensor& alpha, const Tensor& values, const LabeledGraph& graph,
                        const Tensor& rel_value, bool use_value_term) {
  const Index n = values.rows();
  if (alpha.rows() != n || alpha.cols() != n) {
    throw ShapeError("attention_values: weights " + shape_string(alpha.shape()) +
                     " do not match " + std::to_string(n) + " values");
  }
  if (graph.size() != n) {
    throw ShapeError("attention_values: graph over " + std::to_string(graph.size()) +
                     " nodes for " + std::to_string(n) + " inputs");
  }
  Tensor out = matmul(alpha, values);
  if (!use_value_term) return out;
  if (rel_value.cols() != values.cols()) {
    throw ShapeError("attention_values: relation width " + std::to_string(rel_value.cols()) +
                     " does not match value width " + std::to_string(values.cols()));
  }
  check_labels(graph, rel_value.rows());
  // sum_j alpha_ij R3[l_ij] = (per-label mass of row i) . R3
  CellIndex by_row, by_col;
  label_indices(graph, by_row, by_col);
  Tensor mass = scatter_elements(alpha, by_row.row, by_row.col, n, rel_value.rows());
  return out + matmul(mass, rel_value);
}

Tensor multi_head_attention(const Tensor& x, const LabeledGraph& graph,
                            const RelationEmbeddings& rel, const EncoderLayerParams& layer,
                            const G2GLayerConfig& cfg) {
  const Index dh = cfg.d_head();
  Tensor q = matmul(x, layer.wq);
  Tensor k = matmul(x, layer.wk);
  Tensor v = matmul(x, layer.wv);
  std::vector<Tensor> heads;
  heads.reserve(cfg.heads);
  for (Index h = 0; h < cfg.heads; ++h) {
    const Index off = h * dh;
    Tensor qh = slice_cols(q, off, dh);
    Tensor kh = slice_cols(k, off, dh);
    Tensor vh = slice_cols(v, off, dh);
    Tensor r1 = slice_cols(rel.query, off, dh);
    Tensor r2 = cfg.use_key_term ? slice_cols(rel.key, off, dh) : Tensor();
    Tensor r3 = cfg.use_value_term ? slice_cols(rel.value, off, dh) : Tensor();
    Tensor alpha = softmax_rows(attention_scores(qh, kh, graph, r1, r2, cfg.use_key_term));
    heads.push_back(attention_values(alpha, vh, graph, r3, cfg.use_value_term));
  }
  return matmul(concat_cols(heads), layer.wo);
}

Tensor encoder_layer(const Tensor& x, const LabeledGraph& graph, const RelationEmbeddings& rel,
                     const EncoderLayerParams& layer, const G2GLayerConfig& cfg) {
  Tensor h = layer_norm(x + multi_head_attention(x, graph, rel, layer, cfg), layer.ln1_gain,
                        layer.ln1_bias, cfg.layer_norm_eps);
  Tensor ff = add_row(matmul(relu(add_row(matmul(h, layer.ff1_w), layer.ff1_b)), layer.ff2_w),
                      layer.ff2_b);
  return layer_norm(h + ff, layer.ln2_gain, layer.ln2_bias, cfg.layer_norm_eps);
}

EncoderState encode(const Tensor& x, const LabeledGraph& graph, const G2GLayerConfig& cfg,
                    const EncoderParams& params) {
  cfg.validate();
  if (x.cols() != cfg.d) {
    throw ShapeError("encode: input width " + std::to_string(x.cols()) + " differs from d = " +
                     std::to_string(cfg.d));
  }
  if (graph.size() != x.rows()) {
    throw ShapeError("encode: graph over " + std::to_string(graph.size()) + " nodes for " +
                     std::to_string(x.rows()) + " inputs");
  }
  const RelationEmbeddings rel = effective_relations(params.relations, cfg);
  Tensor h = x;
  for (const auto& layer : params.layers) {
    h = encoder_layer(h, graph, rel, layer, cfg);
  }
  return {h};
}

}  // namespace g2gt

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

#include "g2gt/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace g2gt {

namespace {

thread_local Record* g_active_record = nullptr;

std::pair<Index, Index> matrix_extent(const Shape& shape) {
  if (shape.empty()) return {1, 1};
  Index cols = shape.back();
  Index rows = 1;
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) rows *= shape[i];
  if (shape.size() == 1) rows = 1;
  return {rows, cols};
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

// Eigen's vectorized exp clamps its argument, so exp(-inf) would come out as a
// denormal instead of 0. Masked logits rely on the exact zero.
Scalar exact_exp(Scalar v) { return std::exp(v); }

Matrix softmax_matrix(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).unaryExpr(&exact_exp);
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

namespace detail {

void Node::ensure_grad() {
  if (!has_grad) {
    grad = Matrix::Zero(value.rows(), value.cols());
    has_grad = true;
  }
}

void Node::accumulate(const Matrix& g) {
  if (!has_grad) {
    grad = g;
    has_grad = true;
  } else {
    grad += g;
  }
}

}  // namespace detail

// ---- Tensor ---------------------------------------------------------------

namespace {

std::shared_ptr<detail::Node> make_node(Matrix value, Shape shape, bool requires_grad) {
  if (shape.empty() && !(value.rows() == 1 && value.cols() == 1)) {
    shape = {value.rows(), value.cols()};
  }
  for (Index e : shape) {
    if (e < 0) throw ShapeError("negative extent in shape " + shape_string(shape));
  }
  auto [rows, cols] = matrix_extent(shape);
  if (shape_numel(shape) != value.size()) {
    throw ShapeError("shape " + shape_string(shape) + " does not match " +
                     std::to_string(value.size()) + " elements");
  }
  if (value.rows() != rows || value.cols() != cols) {
    value.resize(rows, cols);  // row-major storage keeps element order
  }
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

Tensor Tensor::constant(Matrix value) { return Tensor(make_node(std::move(value), {}, false)); }
Tensor Tensor::constant(Matrix value, Shape shape) {
  return Tensor(make_node(std::move(value), std::move(shape), false));
}
Tensor Tensor::variable(Matrix value) { return Tensor(make_node(std::move(value), {}, true)); }
Tensor Tensor::variable(Matrix value, Shape shape) {
  return Tensor(make_node(std::move(value), std::move(shape), true));
}
Tensor Tensor::scalar(Scalar v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m), Shape{});
}

Scalar Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  return node_->value(0, 0);
}

const Matrix& Tensor::grad() const {
  if (!node_->has_grad) throw ValueError("tensor has no gradient");
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad = Matrix::Zero(rows(), cols());
  node_->has_grad = true;
}

void Tensor::clear_grad() {
  node_->grad.resize(0, 0);
  node_->has_grad = false;
}

Tensor Tensor::detach() const { return constant(node_->value, node_->shape); }

// ---- Record ---------------------------------------------------------------

void Record::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " +
                     (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) {
    throw ValueError("backward: loss is not reachable from any recorded operation");
  }
  loss.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    detail::Node& node = **it;
    if (node.has_grad && node.backward) node.backward(node.grad);
  }
  ops_.clear();
}

RecordScope::RecordScope(Record& record) : previous_(g_active_record) { g_active_record = &record; }
RecordScope::~RecordScope() { g_active_record = previous_; }

Record* active_record() { return g_active_record; }

Tensor make_result(Matrix value, Shape shape, std::initializer_list<const Tensor*> inputs,
                   std::function<void(const Matrix&)> backward) {
  bool needs = false;
  if (g_active_record != nullptr) {
    for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  }
  Tensor out(make_node(std::move(value), std::move(shape), needs));
  if (needs) {
    out.node_->backward = std::move(backward);
    g_active_record->push(out.node_);
  }
  return out;
}

// ---- operations -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner extents differ for " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), {a.rows(), b.cols()}, {&a, &b}, [an, bn](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g * bn->value.transpose());
    if (bn->requires_grad) bn->accumulate(an->value.transpose() * g);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner extents differ for " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  Matrix out = a.value() * b.value().transpose();
  return make_result(std::move(out), {a.rows(), b.rows()}, {&a, &b}, [an, bn](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g * bn->value);
    if (bn->requires_grad) bn->accumulate(g.transpose() * an->value);
  });
}

Tensor transpose(const Tensor& a) {
  auto an = a.node_ptr();
  Matrix out = a.value().transpose();
  return make_result(std::move(out), {a.cols(), a.rows()}, {&a},
                     [an](const Matrix& g) { an->accumulate(g.transpose()); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  return make_result(a.value() + b.value(), a.shape(), {&a, &b}, [an, bn](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g);
    if (bn->requires_grad) bn->accumulate(g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  return make_result(a.value() - b.value(), a.shape(), {&a, &b}, [an, bn](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g);
    if (bn->requires_grad) bn->accumulate(-g);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto an = a.node_ptr();
  auto bn = b.node_ptr();
  Matrix out = a.value().cwiseProduct(b.value());
  return make_result(std::move(out), a.shape(), {&a, &b}, [an, bn](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g.cwiseProduct(bn->value));
    if (bn->requires_grad) bn->accumulate(g.cwiseProduct(an->value));
  });
}

Tensor scale(const Tensor& a, Scalar s) {
  auto an = a.node_ptr();
  return make_result(a.value() * s, a.shape(), {&a},
                     [an, s](const Matrix& g) { an->accumulate(g * s); });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.numel() != a.cols()) {
    throw ShapeError("add_row: row " + shape_string(row.shape()) + " does not fit " +
                     shape_string(a.shape()));
  }
  auto an = a.node_ptr();
  auto rn = row.node_ptr();
  Matrix r = row.value().reshaped<Eigen::RowMajor>(1, a.cols());
  Matrix out = a.value().rowwise() + r.row(0);
  return make_result(std::move(out), a.shape(), {&a, &row}, [an, rn](const Matrix& g) {
    if (an->requires_grad) an->accumulate(g);
    if (rn->requires_grad) {
      Matrix col_sums = g.colwise().sum();
      rn->accumulate(col_sums.reshaped<Eigen::RowMajor>(rn->value.rows(), rn->value.cols()));
    }
  });
}

Tensor relu(const Tensor& a) {
  auto an = a.node_ptr();
  Matrix out = a.value().cwiseMax(0.0);
  return make_result(std::move(out), a.shape(), {&a}, [an](const Matrix& g) {
    an->accumulate((an->value.array() > 0.0).select(g, 0.0));
  });
}

Tensor softmax_rows(const Tensor& x) {
  if (x.cols() == 0) throw ValueError("softmax_rows: empty row dimension");
  auto xn = x.node_ptr();
  Matrix y = softmax_matrix(x.value());
  auto y_copy = std::make_shared<Matrix>(y);
  return make_result(std::move(y), x.shape(), {&x}, [xn, y_copy](const Matrix& g) {
    const Matrix& s = *y_copy;
    Vector dots = g.cwiseProduct(s).rowwise().sum();
    Matrix dx = s.cwiseProduct(g - dots.replicate(1, g.cols()));
    xn->accumulate(dx);
  });
}

Tensor log_softmax_rows(const Tensor& x) {
  if (x.cols() == 0) throw ValueError("log_softmax_rows: empty row dimension");
  auto xn = x.node_ptr();
  const Matrix& v = x.value();
  Matrix out(v.rows(), v.cols());
  for (Index r = 0; r < v.rows(); ++r) {
    const Scalar m = v.row(r).maxCoeff();
    const Scalar lse = m + std::log((v.row(r).array() - m).unaryExpr(&exact_exp).sum());
    out.row(r) = v.row(r).array() - lse;
  }
  auto out_copy = std::make_shared<Matrix>(out);
  return make_result(std::move(out), x.shape(), {&x}, [xn, out_copy](const Matrix& g) {
    Matrix s = out_copy->unaryExpr(&exact_exp);
    Vector gsum = g.rowwise().sum();
    Matrix dx = g - s.cwiseProduct(gsum.replicate(1, g.cols()));
    xn->accumulate(dx);
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Scalar eps) {
  const Index d = x.cols();
  if (d == 0) throw ValueError("layer_norm: zero feature dimension");
  if (!(eps > 0)) throw ValueError("layer_norm: eps must be positive");
  if (gain.numel() != d || bias.numel() != d) {
    throw ShapeError("layer_norm: gain/bias " + shape_string(gain.shape()) + "/" +
                     shape_string(bias.shape()) + " do not match feature width " +
                     std::to_string(d));
  }
  const Matrix& v = x.value();
  auto xhat = std::make_shared<Matrix>(v.rows(), d);
  auto inv_std = std::make_shared<Vector>(v.rows());
  for (Index r = 0; r < v.rows(); ++r) {
    const Scalar mean = v.row(r).mean();
    const Scalar var = (v.row(r).array() - mean).square().mean();
    (*inv_std)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (v.row(r).array() - mean) * (*inv_std)(r);
  }
  Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> gv(gain.value().data(), d);
  Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> bv(bias.value().data(), d);
  Matrix out = (xhat->array().rowwise() * gv.array()).rowwise() + bv.array();

  auto xn = x.node_ptr();
  auto gn = gain.node_ptr();
  auto bn = bias.node_ptr();
  return make_result(std::move(out), x.shape(), {&x, &gain, &bias},
                     [xn, gn, bn, xhat, inv_std, d](const Matrix& g) {
    if (bn->requires_grad) {
      Matrix db = g.colwise().sum();
      bn->accumulate(db.reshaped<Eigen::RowMajor>(bn->value.rows(), bn->value.cols()));
    }
    if (gn->requires_grad) {
      Matrix dg = g.cwiseProduct(*xhat).colwise().sum();
      gn->accumulate(dg.reshaped<Eigen::RowMajor>(gn->value.rows(), gn->value.cols()));
    }
    if (xn->requires_grad) {
      Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> gv(gn->value.data(), d);
      Matrix dxhat = g.array().rowwise() * gv.array();
      Matrix dx(g.rows(), d);
      for (Index r = 0; r < g.rows(); ++r) {
        const Scalar mean_d = dxhat.row(r).mean();
        const Scalar mean_dx = dxhat.row(r).dot(xhat->row(r)) / static_cast<Scalar>(d);
        dx.row(r) = (*inv_std)(r) *
                    (dxhat.row(r).array() - mean_d - xhat->row(r).array() * mean_dx);
      }
      xn->accumulate(dx);
    }
  });
}

Tensor gather_elements(const Tensor& m, std::span<const Index> rows, std::span<const Index> cols,
                       Shape shape) {
  const Index count = shape_numel(shape);
  if (static_cast<Index>(rows.size()) != count || static_cast<Index>(cols.size()) != count) {
    throw ShapeError("gather_elements: index count does not match output " + shape_string(shape));
  }
  const Matrix& v = m.value();
  auto ri = std::make_shared<std::vector<Index>>(rows.begin(), rows.end());
  auto ci = std::make_shared<std::vector<Index>>(cols.begin(), cols.end());
  Matrix out(1, count);
  for (Index k = 0; k < count; ++k) {
    const Index r = rows[k], c = cols[k];
    if (r < 0 || r >= v.rows() || c < 0 || c >= v.cols()) {
      throw ShapeError("gather_elements: index (" + std::to_string(r) + "," + std::to_string(c) +
                       ") outside " + shape_string(m.shape()));
    }
    out(0, k) = v(r, c);
  }
  auto mn = m.node_ptr();
  return make_result(std::move(out), std::move(shape), {&m}, [mn, ri, ci](const Matrix& g) {
    mn->ensure_grad();
    const Scalar* gd = g.data();
    for (std::size_t k = 0; k < ri->size(); ++k) mn->grad((*ri)[k], (*ci)[k]) += gd[k];
  });
}

Tensor scatter_elements(const Tensor& x, std::span<const Index> rows, std::span<const Index> cols,
                        Index out_rows, Index out_cols) {
  const Index count = x.numel();
  if (static_cast<Index>(rows.size()) != count || static_cast<Index>(cols.size()) != count) {
    throw ShapeError("scatter_elements: index count does not match input " +
                     shape_string(x.shape()));
  }
  Matrix out = Matrix::Zero(out_rows, out_cols);
  const Scalar* xd = x.value().data();
  for (Index k = 0; k < count; ++k) {
    const Index r = rows[k], c = cols[k];
    if (r < 0 || r >= out_rows || c < 0 || c >= out_cols) {
      throw ShapeError("scatter_elements: index (" + std::to_string(r) + "," +
                       std::to_string(c) + ") outside output");
    }
    out(r, c) += xd[k];
  }
  auto ri = std::make_shared<std::vector<Index>>(rows.begin(), rows.end());
  auto ci = std::make_shared<std::vector<Index>>(cols.begin(), cols.end());
  auto xn = x.node_ptr();
  return make_result(std::move(out), {out_rows, out_cols}, {&x}, [xn, ri, ci](const Matrix& g) {
    xn->ensure_grad();
    Scalar* gd = xn->grad.data();
    for (std::size_t k = 0; k < ri->size(); ++k) gd[k] += g((*ri)[k], (*ci)[k]);
  });
}

Tensor gather_rows(const Tensor& table, std::span<const Index> indices) {
  const Index n = static_cast<Index>(indices.size());
  const Matrix& v = table.value();
  Matrix out(n, v.cols());
  for (Index k = 0; k < n; ++k) {
    if (indices[k] < 0 || indices[k] >= v.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[k]) + " outside table " +
                       shape_string(table.shape()));
    }
    out.row(k) = v.row(indices[k]);
  }
  auto idx = std::make_shared<std::vector<Index>>(indices.begin(), indices.end());
  auto tn = table.node_ptr();
  return make_result(std::move(out), {n, v.cols()}, {&table}, [tn, idx](const Matrix& g) {
    tn->ensure_grad();
    for (std::size_t k = 0; k < idx->size(); ++k) {
      tn->grad.row((*idx)[k]) += g.row(static_cast<Index>(k));
    }
  });
}

Tensor slice_cols(const Tensor& a, Index start, Index width) {
  if (start < 0 || width < 0 || start + width > a.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + width) + ") outside " + shape_string(a.shape()));
  }
  Matrix out = a.value().middleCols(start, width);
  auto an = a.node_ptr();
  return make_result(std::move(out), {a.rows(), width}, {&a}, [an, start](const Matrix& g) {
    an->accumulate_block(0, start, g);
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ValueError("concat_cols: no inputs");
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index offset = 0;
  bool needs = false;
  std::vector<std::shared_ptr<detail::Node>> nodes;
  for (const Tensor& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
    nodes.push_back(p.node_ptr());
    needs = needs || p.requires_grad();
  }
  // make_result takes a fixed list; route through the first part and attach
  // the rest through the closure.
  Tensor any = parts[0];
  for (const Tensor& p : parts) {
    if (p.requires_grad()) any = p;
  }
  return make_result(std::move(out), {rows, cols}, {&any}, [nodes](const Matrix& g) {
    Index off = 0;
    for (const auto& n : nodes) {
      const Index w = n->value.cols();
      if (n->requires_grad) n->accumulate_block(0, 0, g.middleCols(off, w));
      off += w;
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                     shape_string(shape));
  }
  auto an = a.node_ptr();
  return make_result(a.value(), std::move(shape), {&a}, [an](const Matrix& g) {
    an->accumulate(g.reshaped<Eigen::RowMajor>(an->value.rows(), an->value.cols()));
  });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  auto an = a.node_ptr();
  return make_result(std::move(out), Shape{}, {&a}, [an](const Matrix& g) {
    an->accumulate(Matrix::Constant(an->value.rows(), an->value.cols(), g(0, 0)));
  });
}

// ---- parameters -----------------------------------------------------------

Tensor ParameterSet::add(const std::string& name, Matrix init, Shape shape, bool trainable) {
  if (contains(name)) throw ValueError("duplicate parameter name '" + name + "'");
  Parameter p;
  p.name = name;
  p.tensor = trainable ? Tensor::variable(std::move(init), std::move(shape))
                       : Tensor::constant(std::move(init), std::move(shape));
  p.state.first_moment = Matrix::Zero(p.tensor.rows(), p.tensor.cols());
  p.state.second_moment = Matrix::Zero(p.tensor.rows(), p.tensor.cols());
  p.trainable = trainable;
  params_.push_back(std::move(p));
  return params_.back().tensor;
}

Tensor ParameterSet::get(const std::string& name) const { return at(name).tensor; }

Parameter& ParameterSet::at(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ValueError("unknown parameter '" + name + "'");
}

const Parameter& ParameterSet::at(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ValueError("unknown parameter '" + name + "'");
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const Parameter& p) { return p.name == name; });
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) {
    if (p.trainable) p.tensor.zero_grad();
  }
}

Index ParameterSet::total_elements() const {
  Index n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

void adam_step(ParameterSet& params, const AdamOptions& options) {
  for (const auto& p : params) {
    if (p.trainable && !p.tensor.has_grad()) {
      throw ValueError("adam_step: parameter '" + p.name + "' has no gradient");
    }
  }
  for (auto& p : params) {
    if (!p.trainable) continue;
    AdamState& s = p.state;
    const Matrix& g = p.tensor.grad();
    s.steps += 1;
    s.first_moment = options.beta1 * s.first_moment + (1.0 - options.beta1) * g;
    s.second_moment =
        options.beta2 * s.second_moment + (1.0 - options.beta2) * g.cwiseProduct(g);
    const Scalar c1 = 1.0 - std::pow(options.beta1, static_cast<Scalar>(s.steps));
    const Scalar c2 = 1.0 - std::pow(options.beta2, static_cast<Scalar>(s.steps));
    p.tensor.mutable_value().array() -=
        options.lr * (s.first_moment.array() / c1) /
        ((s.second_moment.array() / c2).sqrt() + options.eps);
  }
}

Matrix gaussian(Index rows, Index cols, Scalar stddev, std::mt19937_64& rng) {
  std::normal_distribution<Scalar> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

// ---- gradient check -------------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, ParameterSet& params,
                           Scalar eps, Scalar threshold) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw ValueError("grad_check: eps must lie in [1e-7, 1e-3]");
  }
  auto evaluate = [&]() { return loss_fn().item(); };
  const Scalar first = evaluate();
  const Scalar second = evaluate();
  if (first != second) {
    throw ValueError("grad_check: loss function is not deterministic");
  }

  params.zero_grad();
  {
    Record record;
    Tensor loss;
    {
      RecordScope scope(record);
      loss = loss_fn();
    }
    if (loss.requires_grad()) record.backward(loss);
  }

  GradCheckReport report;
  report.threshold = threshold;
  report.passed = true;
  for (auto& p : params) {
    GradCheckEntry entry;
    entry.name = p.name;
    entry.trainable = p.trainable;
    entry.elements = p.tensor.numel();
    Matrix& value = p.tensor.mutable_value();
    const bool has = p.tensor.has_grad();
    for (Index k = 0; k < value.size(); ++k) {
      const Scalar analytic = has ? p.tensor.grad().data()[k] : 0.0;
      const Scalar saved = value.data()[k];
      value.data()[k] = saved + eps;
      const Scalar up = evaluate();
      value.data()[k] = saved - eps;
      const Scalar down = evaluate();
      value.data()[k] = saved;
      const Scalar numeric = (up - down) / (2.0 * eps);
      Scalar rel;
      if (!p.trainable) {
        // No gradient flows into frozen parameters; report the numeric side
        // only as information.
        rel = 0.0;
      } else {
        const Scalar denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        rel = std::abs(analytic - numeric) / denom;
      }
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
      entry.max_abs_autodiff = std::max(entry.max_abs_autodiff, std::abs(analytic));
      entry.max_abs_numeric = std::max(entry.max_abs_numeric, std::abs(numeric));
    }
    entry.passed = entry.max_rel_error < threshold;
    report.passed = report.passed && entry.passed;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace g2gt

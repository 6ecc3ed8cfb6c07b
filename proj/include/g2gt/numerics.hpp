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

#ifndef G2GT_NUMERICS_HPP_
#define G2GT_NUMERICS_HPP_

// Dense tensors with a reverse-mode differentiation record, a parameter
// registry, Adam, and a central-difference gradient checker.
//
// Every tensor is stored as a row-major Eigen matrix. A tensor of shape
// (a, b, ..., d) is viewed as a (a*b*...) x d matrix; a scalar is 1x1 and a
// vector of length d is 1xd. Operations act on that matrix view.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace g2gt {

using Scalar = double;

template <typename S>
using MatrixT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using VectorT = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Matrix = MatrixT<Scalar>;
using Vector = VectorT<Scalar>;
using Index = Eigen::Index;
using Shape = std::vector<Index>;

// Base of every error this library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible extents between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside an operation's domain.
class ValueError : public Error {
 public:
  using Error::Error;
};

// Malformed external data (files, checkpoints, corpora).
class DataError : public Error {
 public:
  using Error::Error;
};

std::string shape_string(const Shape& shape);
Index shape_numel(const Shape& shape);

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // allocated lazily; empty when has_grad is false
  Shape shape;
  bool requires_grad = false;
  bool has_grad = false;
  std::function<void(const Matrix&)> backward;

  void accumulate(const Matrix& g);
  template <typename Derived>
  void accumulate_block(Index row, Index col, const Eigen::MatrixBase<Derived>& g) {
    ensure_grad();
    grad.block(row, col, g.rows(), g.cols()) += g;
  }
  void ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  // A tensor that never accumulates gradient.
  static Tensor constant(Matrix value);
  static Tensor constant(Matrix value, Shape shape);
  // A leaf that accumulates gradient whenever a record reaches it.
  static Tensor variable(Matrix value);
  static Tensor variable(Matrix value, Shape shape);
  static Tensor scalar(Scalar v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index numel() const { return node_->value.size(); }

  const Matrix& value() const { return node_->value; }
  // In-place access for optimizers and tests; shape is fixed.
  Matrix& mutable_value() { return node_->value; }
  Scalar item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->has_grad; }
  const Matrix& grad() const;
  void zero_grad();
  void clear_grad();

  // Same values, cut from the differentiation record.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(Matrix, Shape, std::initializer_list<const Tensor*>,
                            std::function<void(const Matrix&)>);
};

// Ordered list of recorded operations. Operations are appended as they run,
// so the list is topologically sorted.
class Record {
 public:
  Record() = default;
  Record(const Record&) = delete;
  Record& operator=(const Record&) = delete;

  void push(std::shared_ptr<detail::Node> node) { ops_.push_back(std::move(node)); }
  std::size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and propagates in reverse record order.
  // Gradients accumulate into every reachable leaf. Clears the record.
  void backward(const Tensor& loss);

 private:
  std::vector<std::shared_ptr<detail::Node>> ops_;
};

// Makes `record` the active record of the calling thread for the scope's
// lifetime. Without an active record operations produce constants.
class RecordScope {
 public:
  explicit RecordScope(Record& record);
  ~RecordScope();
  RecordScope(const RecordScope&) = delete;
  RecordScope& operator=(const RecordScope&) = delete;

 private:
  Record* previous_;
};

Record* active_record();

// Builds an operation result. The backward closure receives d(out) and must
// accumulate into inputs that require gradient.
Tensor make_result(Matrix value, Shape shape, std::initializer_list<const Tensor*> inputs,
                   std::function<void(const Matrix&)> backward);

// ---- operations ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar s);
// a[r, :] + row for every r; row has `a.cols()` elements.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor relu(const Tensor& a);

Tensor softmax_rows(const Tensor& x);
Tensor log_softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Scalar eps = 1e-5);

// out[k] = m(rows[k], cols[k]) for every element k of an output of `shape`.
Tensor gather_elements(const Tensor& m, std::span<const Index> rows,
                       std::span<const Index> cols, Shape shape);
// out(rows[k], cols[k]) += x[k] into a zero (out_rows x out_cols) matrix.
Tensor scatter_elements(const Tensor& x, std::span<const Index> rows,
                        std::span<const Index> cols, Index out_rows, Index out_cols);
// Embedding lookup: out[k, :] = table[indices[k], :].
Tensor gather_rows(const Tensor& table, std::span<const Index> indices);

Tensor slice_cols(const Tensor& a, Index start, Index width);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor reshape(const Tensor& a, Shape shape);
Tensor sum(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(Scalar s, const Tensor& a) { return scale(a, s); }

// ---- parameters and optimization ----------------------------------------

struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  std::int64_t steps = 0;
};

struct Parameter {
  std::string name;
  Tensor tensor;
  AdamState state;
  bool trainable = true;
};

// Ordered registry of named parameters. Names are unique.
class ParameterSet {
 public:
  Tensor add(const std::string& name, Matrix init, Shape shape = {}, bool trainable = true);
  Tensor get(const std::string& name) const;
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  // Populates a zero gradient on every trainable parameter.
  void zero_grad();
  Index total_elements() const;

 private:
  std::vector<Parameter> params_;
};

struct AdamOptions {
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

// One bias-corrected Adam update of every trainable parameter.
void adam_step(ParameterSet& params, const AdamOptions& options = {});

// Gaussian initializer used for weights throughout the library.
Matrix gaussian(Index rows, Index cols, Scalar stddev, std::mt19937_64& rng);

struct GradCheckEntry {
  std::string name;
  Index elements = 0;
  Scalar max_rel_error = 0;
  Scalar max_abs_autodiff = 0;
  Scalar max_abs_numeric = 0;
  bool trainable = true;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  Scalar threshold = 1e-4;
  Scalar max_rel_error = 0;
  bool passed = false;
};

// Compares autodiff gradients of `loss_fn` against central differences
// (f(p+eps) - f(p-eps)) / (2 eps) for every element of every parameter.
// Relative error is |a-b| / max(|a|, |b|, 1e-8).
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, ParameterSet& params,
                           Scalar eps = 1e-5, Scalar threshold = 1e-4);

}  // namespace g2gt

#endif  // G2GT_NUMERICS_HPP_

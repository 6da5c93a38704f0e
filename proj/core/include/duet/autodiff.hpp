#pragma once

// Minimal tape-based reverse-mode differentiation over dense matrices.
//
// Every value on the tape is a 2-D Eigen matrix. Row vectors are 1 x n and
// scalars are 1 x 1. Trainable tensors live in a ParameterSet; putting one on
// a tape with Tape::param() makes Tape::backward() accumulate into
// Parameter::grad.

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace duet {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;

namespace ad {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

/// Owns parameters with stable addresses, iterated in registration order.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& add(std::string name, Matrix init);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  std::size_t scalar_count() const;
  double grad_norm() const;

  /// Copies values from `other`; names and shapes must match.
  void assign(const ParameterSet& other);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  /// Receives the node's output gradient and its forward value.
  using Backward = std::function<void(Tape&, const Matrix& grad, const Matrix& value)>;

  /// With `record == false` no backward closures are kept (inference).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var param(Parameter& p);

  /// Appends a computed node. `parents` decide whether it needs a gradient.
  Var push(Matrix value, std::initializer_list<Var> parents, Backward backward);
  Var push(Matrix value, std::span<const Var> parents, Backward backward);

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and propagates to parameters.
  void backward(const Var& out);

  const Matrix& value(const Var& v) const { return nodes_[v.id_].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id_].requires_grad; }
  void accumulate(const Var& v, const Matrix& g);
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  bool record_;
  std::deque<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Operations. All inputs must live on the same tape.

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var hadamard(const Var& a, const Var& b);
/// a (m x n) + row (1 x n) broadcast over rows.
Var add_row(const Var& a, const Var& row);
/// a (m x n) + constant matrix of the same shape.
Var add_const(const Var& a, const Matrix& c);
Var transpose(const Var& a);
Var vstack(std::span<const Var> parts);
Var hstack(std::span<const Var> parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);

/// Softmax down each column (normalizes over rows).
Var softmax_cols(const Var& a);
/// Softmax along each row (normalizes over columns).
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);

Var relu(const Var& a);
Var silu(const Var& a);

/// Per-row layer normalization with gain/bias rows (1 x n).
Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps = 1e-5);
Var l2_normalize_rows(const Var& a, double eps = 1e-12);

/// Mean over rows, 1 x n.
Var mean_rows(const Var& a);
Var sum_all(const Var& a);
Var mean_all(const Var& a);
/// Mean of squared differences, 1 x 1.
Var mse(const Var& a, const Var& b);
/// -sum_k target_k * log(p_k + eps) for a 1 x K probability row.
Var weighted_nll(const Var& probs, const RowVector& target, double eps);

/// Affine map x W + b with b broadcast over rows.
inline Var affine(const Var& x, const Var& w, const Var& b) { return add_row(matmul(x, w), b); }

}  // namespace ad
}  // namespace duet

#include "duet/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "duet/error.hpp"

namespace duet::ad {

// ---------------------------------------------------------------------------
// ParameterSet

Parameter& ParameterSet::add(std::string name, Matrix init) {
  if (index_.count(name) != 0) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Matrix::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  index_.emplace(std::move(name), params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterSet::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw std::invalid_argument("unknown parameter: " + std::string(name));
  }
  return *params_[it->second];
}

const Parameter& ParameterSet::at(std::string_view name) const {
  return const_cast<ParameterSet*>(this)->at(name);
}

bool ParameterSet::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

double ParameterSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

void ParameterSet::assign(const ParameterSet& other) {
  if (other.size() != size()) throw std::invalid_argument("parameter count mismatch");
  for (std::size_t i = 0; i < size(); ++i) {
    auto& dst = *params_[i];
    const auto& src = other[i];
    if (dst.name != src.name || dst.value.rows() != src.value.rows() ||
        dst.value.cols() != src.value.cols()) {
      throw std::invalid_argument("parameter mismatch at " + dst.name);
    }
    dst.value = src.value;
  }
}

// ---------------------------------------------------------------------------
// Var / Tape

const Matrix& Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw std::invalid_argument("Var::scalar on non-scalar");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, {}, &p, record_});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::push(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
              std::move(backward));
}

Var Tape::push(Matrix value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  if (record_) {
    for (const Var& p : parents) {
      if (p.tape_ != this) throw std::invalid_argument("operands live on different tapes");
      needs = needs || nodes_[p.id_].requires_grad;
    }
  }
  Node node{std::move(value), {}, {}, nullptr, needs};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  Node& n = nodes_[v.id_];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& out) {
  if (!record_) throw std::logic_error("backward on a non-recording tape");
  if (out.tape_ != this) throw std::invalid_argument("output not on this tape");
  Node& root = nodes_[out.id_];
  if (root.value.size() != 1) throw std::invalid_argument("backward needs a 1x1 output");
  if (!root.requires_grad) return;
  root.grad = Matrix::Ones(1, 1);
  for (int i = out.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.param != nullptr) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      // The closure may append to other nodes' grads but never to this one.
      const Matrix g = std::move(n.grad);
      n.backward(*this, g, n.value);
    }
    n.grad.resize(0, 0);
  }
}

// ---------------------------------------------------------------------------
// Operations

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw std::invalid_argument("matmul: inner dimensions " + std::to_string(av.cols()) + " vs " +
                                std::to_string(bv.rows()));
  }
  Matrix out = av * bv;
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value() + b.value();
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value() - b.value();
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, -g);
  });
}

Var scale(const Var& a, double s) {
  Matrix out = a.value() * s;
  return a.tape()->push(std::move(out), {a}, [a, s](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g * s);
  });
}

Var hadamard(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "hadamard");
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

Var add_row(const Var& a, const Var& row) {
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw std::invalid_argument("add_row: row must be 1x" + std::to_string(av.cols()));
  }
  Matrix out = av.rowwise() + rv.row(0);
  return a.tape()->push(std::move(out), {a, row}, [a, row](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var add_const(const Var& a, const Matrix& c) {
  check_same_shape(a.value(), c, "add_const");
  Matrix out = a.value() + c;
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(a, g); });
}

Var transpose(const Var& a) {
  Matrix out = a.value().transpose();
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g.transpose());
  });
}

Var vstack(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("vstack: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("vstack: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return parts[0].tape()->push(std::move(out), parts, [saved](Tape& t, const Matrix& g, const Matrix&) {
    Eigen::Index off = 0;
    for (const Var& p : saved) {
      const Eigen::Index n = t.value(p).rows();
      if (t.requires_grad(p)) t.accumulate(p, g.middleRows(off, n));
      off += n;
    }
  });
}

Var hstack(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("hstack: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("hstack: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return parts[0].tape()->push(std::move(out), parts, [saved](Tape& t, const Matrix& g, const Matrix&) {
    Eigen::Index off = 0;
    for (const Var& p : saved) {
      const Eigen::Index n = t.value(p).cols();
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(off, n));
      off += n;
    }
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  const Matrix& av = a.value();
  if (start < 0 || count < 0 || start + count > av.rows()) {
    throw std::invalid_argument("slice_rows: range out of bounds");
  }
  Matrix out = av.middleRows(start, count);
  const Eigen::Index rows = av.rows();
  return a.tape()->push(std::move(out), {a}, [a, start, count, rows](Tape& t, const Matrix& g, const Matrix&) {
    Matrix full = Matrix::Zero(rows, g.cols());
    full.middleRows(start, count) = g;
    t.accumulate(a, full);
  });
}

namespace {

Matrix softmax_cols_value(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double m = x.col(c).maxCoeff();
    y.col(c) = (x.col(c).array() - m).exp().matrix();
    y.col(c) /= y.col(c).sum();
  }
  return y;
}

Matrix softmax_rows_value(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

}  // namespace

Var softmax_cols(const Var& a) {
  return a.tape()->push(softmax_cols_value(a.value()), {a},
                        [a](Tape& t, const Matrix& g, const Matrix& y) {
    const RowVector dots = g.cwiseProduct(y).colwise().sum();
    t.accumulate(a, y.cwiseProduct(g - dots.replicate(g.rows(), 1)));
  });
}

Var softmax_rows(const Var& a) {
  return a.tape()->push(softmax_rows_value(a.value()), {a},
                        [a](Tape& t, const Matrix& g, const Matrix& y) {
    const Vector dots = g.cwiseProduct(y).rowwise().sum();
    t.accumulate(a, y.cwiseProduct(g - dots.replicate(1, g.cols())));
  });
}

Var log_softmax_rows(const Var& a) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    y.row(r) = x.row(r).array() - lse;
  }
  return a.tape()->push(std::move(y), {a}, [a](Tape& t, const Matrix& g, const Matrix& out) {
    const Vector sums = g.rowwise().sum();
    t.accumulate(a, g - out.array().exp().matrix().cwiseProduct(sums.replicate(1, g.cols())));
  });
}

Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, (t.value(a).array() > 0.0).select(g, 0.0));
  });
}

Var silu(const Var& a) {
  const Matrix& x = a.value();
  Matrix sig = (1.0 / (1.0 + (-x.array()).exp())).matrix();
  Matrix out = x.cwiseProduct(sig);
  return a.tape()->push(std::move(out), {a}, [a, sig](Tape& t, const Matrix& g, const Matrix&) {
    const auto& x = t.value(a).array();
    t.accumulate(a, (g.array() * sig.array() * (1.0 + x * (1.0 - sig.array()))).matrix());
  });
}

Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps) {
  const Matrix& x = a.value();
  const Eigen::Index n = x.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw std::invalid_argument("layer_norm_rows: gain/bias must be 1x" + std::to_string(n));
  }
  Matrix xhat(x.rows(), n);
  Vector inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return a.tape()->push(std::move(out), {a, gain, bias},
                        [a, gain, bias, xhat, inv_std](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(gain)) t.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
    if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
    if (t.requires_grad(a)) {
      const Matrix dxhat = (g.array().rowwise() * t.value(gain).row(0).array()).matrix();
      Matrix dx(dxhat.rows(), dxhat.cols());
      for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
        const double m1 = dxhat.row(r).mean();
        const double m2 = dxhat.row(r).dot(xhat.row(r)) / static_cast<double>(dxhat.cols());
        dx.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
      }
      t.accumulate(a, dx);
    }
  });
}

Var l2_normalize_rows(const Var& a, double eps) {
  const Matrix& x = a.value();
  Vector norms = x.rowwise().norm().array() + eps;
  Matrix y = x.array().colwise() / norms.array();
  return a.tape()->push(std::move(y), {a}, [a, norms](Tape& t, const Matrix& g, const Matrix& out) {
    const Vector dots = g.cwiseProduct(out).rowwise().sum();
    Matrix dx = (g - out.cwiseProduct(dots.replicate(1, g.cols()))).array().colwise() /
                norms.array();
    t.accumulate(a, dx);
  });
}

Var mean_rows(const Var& a) {
  const Matrix& x = a.value();
  if (x.rows() == 0) throw std::invalid_argument("mean_rows: empty input");
  Matrix out = x.colwise().mean();
  const Eigen::Index rows = x.rows();
  return a.tape()->push(std::move(out), {a}, [a, rows](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g.replicate(rows, 1) / static_cast<double>(rows));
  });
}

Var sum_all(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const Eigen::Index r = a.rows(), c = a.cols();
  return a.tape()->push(std::move(out), {a}, [a, r, c](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, Matrix::Constant(r, c, g(0, 0)));
  });
}

Var mean_all(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum_all(a), 1.0 / n);
}

Var mse(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "mse");
  Matrix diff = a.value() - b.value();
  const double n = static_cast<double>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  return a.tape()->push(std::move(out), {a, b}, [a, b, diff, n](Tape& t, const Matrix& g, const Matrix&) {
    const Matrix d = diff * (2.0 * g(0, 0) / n);
    t.accumulate(a, d);
    if (t.requires_grad(b)) t.accumulate(b, -d);
  });
}

Var weighted_nll(const Var& probs, const RowVector& target, double eps) {
  const Matrix& p = probs.value();
  if (p.rows() != 1 || p.cols() != target.size()) {
    throw std::invalid_argument("weighted_nll: probability row and target size differ");
  }
  if ((p.array() < 0.0).any()) throw ContractError("weighted_nll: negative probability");
  Matrix out(1, 1);
  out(0, 0) = -(target.array() * (p.row(0).array() + eps).log()).sum();
  return probs.tape()->push(std::move(out), {probs}, [probs, target, eps](Tape& t, const Matrix& g, const Matrix&) {
    const Matrix& pv = t.value(probs);
    Matrix d = (-(target.array() / (pv.row(0).array() + eps)) * g(0, 0)).matrix();
    t.accumulate(probs, d);
  });
}

}  // namespace duet::ad

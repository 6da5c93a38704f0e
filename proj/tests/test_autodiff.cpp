#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "duet/autodiff.hpp"
#include "duet/util.hpp"
#include "support/gradcheck.hpp"

using namespace duet;
using namespace duet::ad;
using duet::testing::check_gradients;
using duet::testing::project;

namespace {

struct Fixture {
  ParameterSet params;
  std::mt19937_64 rng{17};
  Parameter& add(const char* name, int r, int c) {
    return params.add(name, random_normal(r, c, 1.0, rng));
  }
  Matrix proj(int r, int c) { return random_normal(r, c, 1.0, rng); }
};

void expect_grad_ok(ParameterSet& params, const duet::testing::LossFn& fn) {
  const auto res = check_gradients(params, fn, 1.0, 1, 5);
  EXPECT_LT(res.max_rel_error, 1e-6) << res.worst;
  EXPECT_GT(res.checked, 0);
}

}  // namespace

TEST(Autodiff, ElementwiseAndLinear) {
  Fixture f;
  auto& a = f.add("a", 3, 4);
  auto& b = f.add("b", 4, 2);
  auto& c = f.add("c", 3, 2);
  auto& row = f.add("row", 1, 2);
  const Matrix p = f.proj(3, 2);
  const Matrix k = f.proj(3, 2);
  expect_grad_ok(f.params, [&](Tape& t) {
    Var ab = matmul(t.param(a), t.param(b));
    Var x = add(ab, scale(t.param(c), -0.7));
    x = sub(hadamard(x, t.param(c)), x);
    x = add_row(x, t.param(row));
    x = add_const(x, k);
    return project(t, x, p);
  });
}

TEST(Autodiff, Structural) {
  Fixture f;
  auto& a = f.add("a", 3, 2);
  auto& b = f.add("b", 2, 2);
  auto& c = f.add("c", 3, 3);
  const Matrix p = f.proj(2, 5);
  expect_grad_ok(f.params, [&](Tape& t) {
    std::vector<Var> rows{t.param(a), t.param(b)};
    Var v = vstack(rows);                       // 5 x 2
    Var tv = transpose(v);                      // 2 x 5
    Var s = slice_rows(t.param(c), 1, 2);       // 2 x 3
    std::vector<Var> cols{s, slice_rows(tv, 0, 2)};
    Var h = hstack(cols);                       // 2 x 8
    return add(project(t, slice_rows(transpose(h), 3, 5), p.transpose()), mean_all(h));
  });
}

TEST(Autodiff, Softmaxes) {
  Fixture f;
  auto& a = f.add("a", 4, 3);
  const Matrix p1 = f.proj(4, 3), p2 = f.proj(4, 3), p3 = f.proj(4, 3);
  expect_grad_ok(f.params, [&](Tape& t) {
    Var x = t.param(a);
    Var l = project(t, softmax_cols(x), p1);
    l = add(l, project(t, softmax_rows(x), p2));
    return add(l, project(t, log_softmax_rows(x), p3));
  });
}

TEST(Autodiff, SoftmaxValues) {
  Tape t(false);
  Matrix m(2, 2);
  m << 0.0, std::log(3.0), 1000.0, 1000.0;
  const Matrix r = softmax_rows(t.constant(m)).value();
  EXPECT_NEAR(r(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(r(0, 1), 0.75, 1e-15);
  EXPECT_NEAR(r(1, 0), 0.5, 1e-15);
  const Matrix c = softmax_cols(t.constant(m)).value();
  EXPECT_NEAR(c.col(0).sum(), 1.0, 1e-15);
  EXPECT_NEAR(c(1, 0), 1.0, 1e-15);
  const Matrix lr = log_softmax_rows(t.constant(m)).value();
  EXPECT_NEAR(lr(0, 0), std::log(0.25), 1e-14);
}

TEST(Autodiff, Nonlinearities) {
  Fixture f;
  auto& a = f.add("a", 3, 5);
  // Keep entries away from the ReLU kink so central differences are valid.
  for (Eigen::Index i = 0; i < a.value.size(); ++i) {
    double& v = a.value.data()[i];
    if (std::abs(v) < 0.05) v = 0.3;
  }
  const Matrix p1 = f.proj(3, 5), p2 = f.proj(3, 5);
  expect_grad_ok(f.params, [&](Tape& t) {
    Var x = t.param(a);
    return add(project(t, relu(x), p1), project(t, silu(x), p2));
  });
}

TEST(Autodiff, Normalizations) {
  Fixture f;
  auto& a = f.add("a", 3, 6);
  auto& g = f.add("g", 1, 6);
  auto& b = f.add("b", 1, 6);
  const Matrix p1 = f.proj(3, 6), p2 = f.proj(3, 6), p3 = f.proj(1, 6);
  expect_grad_ok(f.params, [&](Tape& t) {
    Var x = t.param(a);
    Var l = project(t, layer_norm_rows(x, t.param(g), t.param(b)), p1);
    l = add(l, project(t, l2_normalize_rows(x), p2));
    return add(l, project(t, mean_rows(x), p3));
  });
}

TEST(Autodiff, LayerNormValues) {
  Tape t(false);
  Matrix x(1, 4);
  x << 1, 2, 3, 4;
  const Matrix y = layer_norm_rows(t.constant(x), t.constant(Matrix::Ones(1, 4)),
                                   t.constant(Matrix::Zero(1, 4)), 0.0)
                       .value();
  EXPECT_NEAR(y.sum(), 0.0, 1e-12);
  EXPECT_NEAR(y.squaredNorm() / 4.0, 1.0, 1e-12);
  EXPECT_NEAR(y(0, 0), -1.5 / std::sqrt(1.25), 1e-12);
}

TEST(Autodiff, Reductions) {
  Fixture f;
  auto& a = f.add("a", 3, 4);
  auto& b = f.add("b", 3, 4);
  auto& logits = f.add("logits", 1, 4);
  RowVector target(4);
  target << 0.1, 0.2, 0.3, 0.4;
  expect_grad_ok(f.params, [&](Tape& t) {
    Var l = add(sum_all(t.param(a)), mse(t.param(a), t.param(b)));
    return add(l, weighted_nll(softmax_rows(t.param(logits)), target, 1e-8));
  });
}

TEST(Autodiff, ReductionValues) {
  Tape t(false);
  Matrix a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 1, 0, 3, 2;
  EXPECT_DOUBLE_EQ(sum_all(t.constant(a)).scalar(), 10.0);
  EXPECT_DOUBLE_EQ(mean_all(t.constant(a)).scalar(), 2.5);
  EXPECT_DOUBLE_EQ(mse(t.constant(a), t.constant(b)).scalar(), 2.0);
  RowVector target(2);
  target << 1.0, 0.0;
  Matrix probs(1, 2);
  probs << 0.5, 0.5;
  EXPECT_NEAR(weighted_nll(t.constant(probs), target, 0.0).scalar(), std::log(2.0), 1e-15);
}

TEST(Autodiff, ReusedNodeAccumulates) {
  ParameterSet ps;
  auto& w = ps.add("w", Matrix::Constant(1, 1, 3.0));
  Tape t;
  Var x = t.param(w);
  t.backward(hadamard(x, x));
  EXPECT_DOUBLE_EQ(w.grad(0, 0), 6.0);
  ps.zero_grad();
  EXPECT_DOUBLE_EQ(w.grad(0, 0), 0.0);
}

TEST(Autodiff, NonRecordingTapeComputesValues) {
  ParameterSet ps;
  auto& w = ps.add("w", Matrix::Constant(2, 2, 1.5));
  Tape t(false);
  Var y = sum_all(t.param(w));
  EXPECT_DOUBLE_EQ(y.scalar(), 6.0);
}

TEST(ParameterSetTest, LookupAndAssign) {
  ParameterSet a, b;
  a.add("x", Matrix::Constant(2, 3, 1.0));
  a.add("y", Matrix::Constant(1, 1, 2.0));
  b.add("x", Matrix::Zero(2, 3));
  b.add("y", Matrix::Zero(1, 1));
  EXPECT_EQ(a.scalar_count(), 7U);
  EXPECT_TRUE(a.contains("y"));
  EXPECT_FALSE(a.contains("z"));
  EXPECT_THROW(a.add("x", Matrix::Zero(1, 1)), std::invalid_argument);
  b.assign(a);
  EXPECT_EQ(b.at("x").value, a.at("x").value);
  ParameterSet c;
  c.add("x", Matrix::Zero(3, 2));
  c.add("y", Matrix::Zero(1, 1));
  EXPECT_THROW(c.assign(a), std::invalid_argument);
}

TEST(ParameterSetTest, GradNorm) {
  ParameterSet a;
  auto& p = a.add("p", Matrix::Zero(1, 2));
  p.grad = Matrix::Zero(1, 2);
  p.grad << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(a.grad_norm(), 5.0);
}

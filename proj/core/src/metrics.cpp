#include "duet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "duet/error.hpp"

namespace duet {

namespace {

void check_same_positions(const JointPositions& a, const JointPositions& b, const char* op) {
  if (a.joints != b.joints || a.xyz.rows() != b.xyz.rows() || a.xyz.cols() != b.xyz.cols()) {
    throw std::invalid_argument(std::string(op) + ": joint position shapes differ");
  }
  if (a.xyz.rows() == 0 || a.joints == 0) throw std::invalid_argument(std::string(op) + ": empty");
}

double mean_joint_distance(const JointPositions& a, const JointPositions& b) {
  double total = 0.0;
  for (int f = 0; f < a.frames(); ++f) {
    for (int j = 0; j < a.joints; ++j) total += (a.at(f, j) - b.at(f, j)).norm();
  }
  return total / (static_cast<double>(a.frames()) * a.joints);
}

struct Gaussian {
  RowVector mean;
  Matrix cov;
};

Gaussian fit(const Matrix& x) {
  if (x.rows() < 1) throw std::invalid_argument("fid: empty embedding set");
  Gaussian g;
  g.mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - g.mean;
  g.cov = centered.transpose() * centered / std::max<double>(1.0, static_cast<double>(x.rows() - 1));
  if (x.rows() <= x.cols()) g.cov += 1e-6 * Matrix::Identity(x.cols(), x.cols());
  return g;
}

Vector clipped_eigenvalues(const Matrix& sym, Matrix* vectors) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sym + sym.transpose()));
  if (es.info() != Eigen::Success) throw NumericError("fid: eigendecomposition failed");
  Vector ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (!std::isfinite(ev(i))) throw NumericError("fid: non-finite covariance");
    if (ev(i) < 0.0) {
      if (ev(i) < -1e-8 * scale) throw NumericError("fid: covariance is not positive semidefinite");
      ev(i) = 0.0;
    }
  }
  if (vectors != nullptr) *vectors = es.eigenvectors();
  return ev;
}

void check_pairs(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": embedding sets are not paired");
  }
}

double mean_pair_distance(const Matrix& x, int pair_count, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(x.rows()) - 1);
  double total = 0.0;
  for (int p = 0; p < pair_count; ++p) {
    const int i = pick(rng);
    int j = pick(rng);
    while (j == i) j = pick(rng);
    total += (x.row(i) - x.row(j)).norm();
  }
  return total / pair_count;
}

}  // namespace

double mpjpe(const JointPositions& predicted, const JointPositions& truth) {
  check_same_positions(predicted, truth, "mpjpe");
  return mean_joint_distance(predicted, truth);
}

double mpjie(const JointPositions& person1, const JointPositions& person2) {
  check_same_positions(person1, person2, "mpjie");
  return mean_joint_distance(person1, person2);
}

double fid(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("fid: embedding widths differ");
  const Gaussian ga = fit(a);
  const Gaussian gb = fit(b);
  Matrix va;
  const Vector ea = clipped_eigenvalues(ga.cov, &va);
  const Matrix sqrt_a = va * ea.cwiseSqrt().asDiagonal() * va.transpose();
  const Vector ecross = clipped_eigenvalues(sqrt_a * gb.cov * sqrt_a, nullptr);
  const double value = (ga.mean - gb.mean).squaredNorm() + ga.cov.trace() + gb.cov.trace() -
                       2.0 * ecross.cwiseSqrt().sum();
  if (!std::isfinite(value)) throw NumericError("fid: non-finite result");
  return value;
}

double mm_dist(const Matrix& motion, const Matrix& text) {
  check_pairs(motion, text, "mm_dist");
  if (motion.rows() == 0) throw std::invalid_argument("mm_dist: empty embedding set");
  return (motion - text).rowwise().norm().mean();
}

double diversity(const Matrix& embeddings, int pair_count, std::uint64_t seed) {
  if (embeddings.rows() < 2) throw std::invalid_argument("diversity needs at least 2 embeddings");
  if (pair_count < 1) throw std::invalid_argument("diversity needs pair_count >= 1");
  std::mt19937_64 rng(seed);
  return mean_pair_distance(embeddings, pair_count, rng);
}

double diversity(const Matrix& embeddings, std::span<const std::pair<int, int>> pairs) {
  if (pairs.empty()) throw std::invalid_argument("diversity: no pairs");
  double total = 0.0;
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= embeddings.rows() || j >= embeddings.rows()) {
      throw std::invalid_argument("diversity: pair index out of range");
    }
    total += (embeddings.row(i) - embeddings.row(j)).norm();
  }
  return total / static_cast<double>(pairs.size());
}

double multimodality(const std::vector<Matrix>& per_prompt, int pair_count, std::uint64_t seed) {
  if (per_prompt.empty()) throw std::invalid_argument("multimodality: no prompts");
  if (pair_count < 1) throw std::invalid_argument("multimodality needs pair_count >= 1");
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (const Matrix& group : per_prompt) {
    if (group.rows() < 2) throw std::invalid_argument("multimodality needs >= 2 generations per prompt");
    total += mean_pair_distance(group, pair_count, rng);
  }
  return total / static_cast<double>(per_prompt.size());
}

double retrieval_precision(const Matrix& motion, const Matrix& text, int top_k, int pool_size,
                           std::uint64_t seed) {
  check_pairs(motion, text, "retrieval_precision");
  if (top_k < 1) throw std::invalid_argument("retrieval_precision: top_k must be >= 1");
  if (pool_size < 1 || pool_size > motion.rows()) {
    throw std::invalid_argument("retrieval_precision: pool of " + std::to_string(pool_size) +
                                " exceeds " + std::to_string(motion.rows()) + " pairs");
  }
  std::vector<int> order(static_cast<std::size_t>(motion.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t pools = order.size() / static_cast<std::size_t>(pool_size);
  std::size_t hits = 0;
  for (std::size_t p = 0; p < pools; ++p) {
    const int* idx = order.data() + p * static_cast<std::size_t>(pool_size);
    for (int a = 0; a < pool_size; ++a) {
      const double own = (motion.row(idx[a]) - text.row(idx[a])).norm();
      int closer = 0;
      for (int b = 0; b < pool_size; ++b) {
        if (b != a && (motion.row(idx[a]) - text.row(idx[b])).norm() < own) ++closer;
      }
      if (closer < top_k) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(pools * static_cast<std::size_t>(pool_size));
}

}  // namespace duet

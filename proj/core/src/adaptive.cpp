#include "duet/adaptive.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "duet/error.hpp"
#include "duet/util.hpp"

namespace duet {

DistancePredictor::DistancePredictor(ad::ParameterSet& params, const std::string& prefix,
                                     int text_width, int hidden, int segments,
                                     std::mt19937_64& rng)
    : segments_(segments) {
  if (text_width < 1 || hidden < 1 || segments < 1) {
    throw std::invalid_argument("invalid distance predictor dimensions");
  }
  w1_ = &params.add(prefix + ".w1", glorot(text_width, hidden, rng));
  b1_ = &params.add(prefix + ".b1", Matrix::Zero(1, hidden));
  w2_ = &params.add(prefix + ".w2", glorot(hidden, segments, rng));
  b2_ = &params.add(prefix + ".b2", Matrix::Zero(1, segments));
}

ad::Var DistancePredictor::forward(ad::Tape& tape, const ad::Var& word_features) const {
  if (word_features.rows() < 1) throw std::invalid_argument("distance predictor needs >= 1 token");
  const ad::Var pooled = ad::mean_rows(word_features);
  const ad::Var hidden = ad::relu(ad::affine(pooled, tape.param(*w1_), tape.param(*b1_)));
  return ad::softmax_rows(ad::affine(hidden, tape.param(*w2_), tape.param(*b2_)));
}

RowVector DistancePredictor::predict(const Matrix& word_features) const {
  ad::Tape tape(false);
  return forward(tape, tape.constant(word_features)).value();
}

RowVector segment_mean_distances(const JointPositions& p1, const JointPositions& p2,
                                 const SegmentLayout& layout) {
  if (p1.xyz.rows() != p2.xyz.rows() || p1.xyz.cols() != p2.xyz.cols() || p1.joints != p2.joints) {
    throw std::invalid_argument("distance profile: persons differ in frames or joints");
  }
  if (layout.frames != p1.frames()) {
    throw std::invalid_argument("distance profile: layout covers " + std::to_string(layout.frames) +
                                " frames, motion has " + std::to_string(p1.frames()));
  }
  RowVector means(layout.segments());
  for (int k = 0; k < layout.segments(); ++k) {
    const auto [begin, end] = layout.bounds[static_cast<std::size_t>(k)];
    if (end <= begin) throw std::invalid_argument("distance profile: empty segment");
    double total = 0.0;
    for (int f = begin; f < end; ++f) {
      for (int j = 0; j < p1.joints; ++j) total += (p1.at(f, j) - p2.at(f, j)).norm();
    }
    means(k) = total / (static_cast<double>(end - begin) * p1.joints);
  }
  return means;
}

RowVector gt_distance_profile(const JointPositions& p1, const JointPositions& p2,
                              const SegmentLayout& layout) {
  const RowVector d = segment_mean_distances(p1, p2, layout);
  const RowVector e = (d.array() - d.maxCoeff()).exp().matrix();
  return (1.0 - (e / e.sum()).array()).matrix();
}

RowVector gt_distance_profile(const DualMotion& motion, const SegmentLayout& layout) {
  return gt_distance_profile(joint_positions(motion.person1), joint_positions(motion.person2),
                             layout);
}

ad::Var distance_loss(const ad::Var& predicted, const RowVector& ground_truth) {
  if (predicted.rows() != 1 || predicted.cols() != ground_truth.cols()) {
    throw std::invalid_argument("distance_loss: profile lengths differ");
  }
  return ad::weighted_nll(predicted, ground_truth, kDistanceLogEps);
}

double distance_loss(const RowVector& predicted, const RowVector& ground_truth) {
  ad::Tape tape(false);
  return distance_loss(tape.constant(predicted), ground_truth).scalar();
}

Matrix build_interaction_weights(const RowVector& profile, const SegmentLayout& layout) {
  ad::Tape tape(false);
  return build_interaction_weights(tape.constant(profile), layout).value();
}

ad::Var build_interaction_weights(const ad::Var& profile, const SegmentLayout& layout) {
  if (profile.rows() != 1 || profile.cols() != layout.segments()) {
    throw std::invalid_argument("interaction weights: profile has " +
                                std::to_string(profile.cols()) + " entries, layout has " +
                                std::to_string(layout.segments()) + " segments");
  }
  ad::Tape& tape = *profile.tape();
  const int s = layout.frames;
  const ad::Var coeff = ad::matmul(tape.constant(layout.assignment()), ad::transpose(profile));
  const ad::Var cross = ad::matmul(coeff, ad::transpose(coeff));
  const ad::Var eye = tape.constant(Matrix::Identity(s, s));
  const std::array<ad::Var, 2> top{eye, cross};
  const std::array<ad::Var, 2> bottom{ad::transpose(cross), eye};
  const std::array<ad::Var, 2> rows{ad::hstack(top), ad::hstack(bottom)};
  return ad::vstack(rows);
}

AdjacencyMode parse_adjacency_mode(std::string_view name) {
  if (name == "hadamard") return AdjacencyMode::hadamard;
  if (name == "product") return AdjacencyMode::product;
  throw std::invalid_argument("unknown adjacency mode: " + std::string(name));
}

std::string_view to_string(AdjacencyMode mode) {
  return mode == AdjacencyMode::hadamard ? "hadamard" : "product";
}

ad::Var masked_adjacency(const ad::Var& w_inter, const ad::Var& adjacency, AdjacencyMode mode) {
  if (w_inter.rows() != adjacency.rows() || w_inter.cols() != adjacency.cols()) {
    throw std::invalid_argument("mask and adjacency shapes differ");
  }
  return mode == AdjacencyMode::hadamard ? ad::hadamard(w_inter, adjacency)
                                         : ad::matmul(w_inter, adjacency);
}

ad::Var graph_reasoning(const ad::Var& x_pair, const ad::Var& adjacency,
                        std::span<const ad::Var> layer_weights) {
  if (adjacency.rows() != adjacency.cols() || adjacency.cols() != x_pair.rows()) {
    throw std::invalid_argument("graph_reasoning: adjacency does not match the node count");
  }
  ad::Var h = x_pair;
  for (const ad::Var& w : layer_weights) {
    ad::Var msg = ad::matmul(adjacency, h);
    if (w.valid()) msg = ad::matmul(msg, w);
    h = ad::relu(msg);
  }
  return h;
}

Matrix graph_reasoning(const Matrix& x_pair, const Matrix& adjacency, int layers) {
  ad::Tape tape(false);
  const std::vector<ad::Var> none(static_cast<std::size_t>(layers));
  return graph_reasoning(tape.constant(x_pair), tape.constant(adjacency), none).value();
}

AdaptiveStage::AdaptiveStage(ad::ParameterSet& params, const std::string& prefix,
                             const AdaptiveConfig& config, std::mt19937_64& rng)
    : config_(config),
      layout_(segment_bounds(config.frames, config.segments)),
      predictor_(params, prefix + ".predictor", config.text_width, config.predictor_hidden,
                 config.segments, rng) {
  if (config.lambda < 0.0) throw std::invalid_argument("lambda_s2 must be >= 0");
  const int n = 2 * config.frames;
  adjacency_ = &params.add(prefix + ".adjacency",
                           Matrix::Identity(n, n) + random_normal(n, n, 0.01, rng));
  for (int i = 0; i < config.layers; ++i) {
    graph_weights_.push_back(&params.add(prefix + ".layer" + std::to_string(i) + ".weight",
                                         glorot(config.width, config.width, rng)));
  }
}

AdaptiveStage::Output AdaptiveStage::forward(ad::Tape& tape, const ad::Var& x1, const ad::Var& x2,
                                             const ad::Var& overall_text, const ad::Var& temb,
                                             const RowVector* profile_override) const {
  if (x1.rows() != config_.frames || x2.rows() != config_.frames) {
    throw std::invalid_argument("adaptive stage configured for " + std::to_string(config_.frames) +
                                " frames");
  }
  Output out;
  out.profile = predictor_.forward(tape, overall_text);
  const ad::Var mask_profile =
      profile_override != nullptr ? tape.constant(*profile_override) : out.profile;
  const ad::Var adj = masked_adjacency(build_interaction_weights(mask_profile, layout_),
                                       tape.param(*adjacency_), config_.mode);
  std::vector<ad::Var> weights;
  weights.reserve(graph_weights_.size());
  for (auto* w : graph_weights_) weights.push_back(tape.param(*w));

  auto person = [&](const ad::Var& own, const ad::Var& partner) {
    const std::array<ad::Var, 2> parts{own, partner};
    const ad::Var g = graph_reasoning(ad::add_row(ad::vstack(parts), temb), adj, weights);
    return ad::add(own, ad::scale(ad::slice_rows(g, 0, config_.frames), config_.lambda));
  };
  out.person1 = person(x1, x2);
  out.person2 = person(x2, x1);
  return out;
}

}  // namespace duet

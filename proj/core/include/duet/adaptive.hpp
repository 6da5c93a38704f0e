#pragma once

#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "duet/autodiff.hpp"
#include "duet/motion.hpp"

namespace duet {

// ---------------------------------------------------------------------------
// Interaction distance profiles

/// Pools word features over tokens, then L -> hidden (ReLU) -> K logits and a
/// softmax. Output is a 1 x K probability row.
class DistancePredictor {
 public:
  DistancePredictor(ad::ParameterSet& params, const std::string& prefix, int text_width,
                    int hidden, int segments, std::mt19937_64& rng);

  ad::Var forward(ad::Tape& tape, const ad::Var& word_features) const;
  RowVector predict(const Matrix& word_features) const;

  int segments() const { return segments_; }
  ad::Parameter& w1() const { return *w1_; }
  ad::Parameter& b1() const { return *b1_; }
  ad::Parameter& w2() const { return *w2_; }
  ad::Parameter& b2() const { return *b2_; }

 private:
  int segments_;
  ad::Parameter *w1_, *b1_, *w2_, *b2_;
};

/// Mean per-joint inter-person distance inside each segment.
RowVector segment_mean_distances(const JointPositions& p1, const JointPositions& p2,
                                 const SegmentLayout& layout);

/// 1 - softmax(segment mean distances). Entries lie in (0, 1) and sum to K - 1.
RowVector gt_distance_profile(const JointPositions& p1, const JointPositions& p2,
                              const SegmentLayout& layout);
RowVector gt_distance_profile(const DualMotion& motion, const SegmentLayout& layout);

inline constexpr double kDistanceLogEps = 1e-8;

/// -sum_k gt_k log(pre_k + 1e-8). Negative `pre` entries raise ContractError.
ad::Var distance_loss(const ad::Var& predicted, const RowVector& ground_truth);
double distance_loss(const RowVector& predicted, const RowVector& ground_truth);

// ---------------------------------------------------------------------------
// Interaction graph

/// 2S x 2S mask: identity diagonal blocks; cross entry (f, g) equals
/// profile[seg(f)] * profile[seg(g)].
Matrix build_interaction_weights(const RowVector& profile, const SegmentLayout& layout);
/// Differentiable with respect to the profile.
ad::Var build_interaction_weights(const ad::Var& profile, const SegmentLayout& layout);

/// How the interaction mask combines with the learnable adjacency.
enum class AdjacencyMode {
  hadamard,  // elementwise mask
  product,   // matrix product W_inter * A
};

AdjacencyMode parse_adjacency_mode(std::string_view name);
std::string_view to_string(AdjacencyMode mode);

ad::Var masked_adjacency(const ad::Var& w_inter, const ad::Var& adjacency, AdjacencyMode mode);

/// Applies H <- ReLU(adj * H * W_l) for each layer weight W_l. An invalid
/// (default-constructed) weight means no feature transform for that layer.
ad::Var graph_reasoning(const ad::Var& x_pair, const ad::Var& adjacency,
                        std::span<const ad::Var> layer_weights);
Matrix graph_reasoning(const Matrix& x_pair, const Matrix& adjacency, int layers);

// ---------------------------------------------------------------------------
// Stage

struct AdaptiveConfig {
  int frames = 60;
  int width = 64;
  int text_width = 64;
  int segments = 3;
  int layers = 2;
  int predictor_hidden = 64;
  double lambda = 0.1;
  AdjacencyMode mode = AdjacencyMode::hadamard;
};

class AdaptiveStage {
 public:
  AdaptiveStage(ad::ParameterSet& params, const std::string& prefix, const AdaptiveConfig& config,
                std::mt19937_64& rng);

  struct Output {
    ad::Var person1;
    ad::Var person2;
    ad::Var profile;  // predicted, 1 x K
  };

  /// Runs the predictor on the overall text, builds the mask from the
  /// predicted profile (or from `profile_override` when given), and mixes the
  /// graph output back with weight lambda. `temb` is a 1 x D row added to
  /// every graph node.
  Output forward(ad::Tape& tape, const ad::Var& x1, const ad::Var& x2, const ad::Var& overall_text,
                 const ad::Var& temb, const RowVector* profile_override = nullptr) const;

  const DistancePredictor& predictor() const { return predictor_; }
  const SegmentLayout& layout() const { return layout_; }
  ad::Parameter& adjacency() const { return *adjacency_; }
  ad::Parameter& graph_weight(int layer) const { return *graph_weights_.at(static_cast<std::size_t>(layer)); }
  const AdaptiveConfig& config() const { return config_; }

 private:
  AdaptiveConfig config_;
  SegmentLayout layout_;
  DistancePredictor predictor_;
  ad::Parameter* adjacency_;
  std::vector<ad::Parameter*> graph_weights_;
};

}  // namespace duet

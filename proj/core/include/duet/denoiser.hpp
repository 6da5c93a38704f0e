#pragma once

#include <cstdint>
#include <memory>
#include <random>

#include "duet/adaptive.hpp"
#include "duet/autodiff.hpp"
#include "duet/diffusion.hpp"
#include "duet/refinement.hpp"
#include "duet/self_learning.hpp"
#include "duet/text.hpp"

namespace duet {

struct ModelConfig {
  int joints = 5;
  int frames = 60;
  int latent = 64;
  int text_width = 64;
  int text_ffn = 128;
  int text_layers = 2;
  int self_layers = 2;
  int graph_layers = 2;
  int refine_layers = 3;
  int segments = 3;
  int predictor_hidden = 64;
  double lambda_s2 = 0.1;
  double lambda_s3 = 0.1;
  bool share_person_weights = false;
  AdjacencyMode adjacency = AdjacencyMode::hadamard;
  /// When false every text input is replaced by the null text (baseline).
  bool use_text = true;

  int motion_width() const;
  /// Throws std::invalid_argument on inconsistent values.
  void validate() const;
};

/// Overall and per-person prompts with their frozen token features.
struct TextBundle {
  PromptRecord prompts;
  EmbeddedText overall;
  EmbeddedText person1;
  EmbeddedText person2;

  /// All three texts empty: the unconditional branch.
  static TextBundle null();
  bool is_null() const { return overall.is_null && person1.is_null && person2.is_null; }
};

TextBundle make_text_bundle(const PromptRecord& prompts, const TokenEmbedder& embedder);

/// Sinusoidal features of a diffusion timestep (1 x width).
RowVector timestep_features(int t, int width);

/// Three-stage denoiser predicting clean features for both persons.
class Denoiser {
 public:
  Denoiser(const ModelConfig& config, std::uint64_t seed);

  struct Output {
    ad::Var person1;  // S x motion_width
    ad::Var person2;
    ad::Var profile;  // predicted distance profile, 1 x K
  };

  /// Intermediate stage outputs, exposed for inspection.
  struct Trace {
    ad::Var input1, input2;
    ad::Var s1_1, s1_2;
    ad::Var s2_1, s2_2;
    ad::Var s3_1, s3_2;
  };

  Output forward(ad::Tape& tape, const ad::Var& x1, const ad::Var& x2, int t,
                 const TextBundle& text, const RowVector* profile_override = nullptr,
                 Trace* trace = nullptr) const;

  /// Inference without gradient bookkeeping.
  MotionPair predict(const MotionPair& x_t, int t, const TextBundle& text) const;
  RowVector predict_profile(const TextBundle& text) const;

  const ModelConfig& config() const { return config_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }

  const TextEncoder& text_encoder() const { return *text_; }
  const SelfLearningStage& self_learning() const { return *stage1_; }
  const AdaptiveStage& adaptive() const { return *stage2_; }
  const RefinementStage& refinement() const { return *stage3_; }
  ad::Parameter& input_weight() const { return *in_w_; }
  ad::Parameter& input_bias() const { return *in_b_; }
  ad::Parameter& head_weight() const { return *out_w_; }
  ad::Parameter& head_bias() const { return *out_b_; }

 private:
  ModelConfig config_;
  ad::ParameterSet params_;
  Matrix positions_;
  std::unique_ptr<TextEncoder> text_;
  std::unique_ptr<SelfLearningStage> stage1_;
  std::unique_ptr<AdaptiveStage> stage2_;
  std::unique_ptr<RefinementStage> stage3_;
  ad::Parameter *in_w_, *in_b_, *out_w_, *out_b_;
  ad::Parameter *temb_w1_, *temb_b1_, *temb_w2_, *temb_b2_;
};

}  // namespace duet

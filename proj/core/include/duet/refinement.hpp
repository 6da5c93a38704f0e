#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "duet/autodiff.hpp"

namespace duet {

struct RefinementConfig {
  int width = 64;
  int text_width = 64;
  int layers = 3;
  double lambda = 0.1;
  bool share_person_weights = false;
};

struct HighlightWeights {
  ad::Parameter* motion_ln_gain;
  ad::Parameter* motion_ln_bias;
  ad::Parameter* sentence_ln_gain;
  ad::Parameter* sentence_ln_bias;
  ad::Parameter* mlp_weight;  // 1 x D, applied to each frame's similarity
  ad::Parameter* mlp_bias;    // 1 x D
};

struct InteractiveLayer {
  ad::Parameter* ln_gain;
  ad::Parameter* ln_bias;
  ad::Parameter* query;          // D x D
  ad::Parameter* key;            // D x D
  ad::Parameter* value;          // D x D
  ad::Parameter* text_key;       // L x D
  ad::Parameter* text_value;     // L x D
  ad::Parameter* partner_key;    // D x D
  ad::Parameter* partner_value;  // D x D
};

/// sim = LN(x) LN(sentence)^T (S x 1); M = sim w + b (S x D); x + lambda M.
ad::Var highlight_keyframes(ad::Tape& tape, const ad::Var& x, const ad::Var& sentence,
                            const HighlightWeights& weights, double lambda);

/// One residual layer: x + mixed_attention over [self; overall text; partner].
/// `partner_tokens` are used as given (S x D).
ad::Var interactive_attention(ad::Tape& tape, const ad::Var& x_self, const ad::Var& overall_text,
                              const ad::Var& partner_tokens, const InteractiveLayer& layer,
                              const ad::Var& frame_cond);

/// Overall-level refinement. Per person: highlight with the sentence feature,
/// then `layers` interactive attention layers whose partner tokens come from
/// the other person's highlighted features (LN + frame_cond).
class RefinementStage {
 public:
  RefinementStage(ad::ParameterSet& params, const std::string& prefix,
                  const RefinementConfig& config, std::mt19937_64& rng);

  struct Output {
    ad::Var person1;
    ad::Var person2;
    ad::Var sentence;  // F_s, 1 x D
  };

  Output forward(ad::Tape& tape, const ad::Var& x1, const ad::Var& x2, const ad::Var& overall_text,
                 const ad::Var& frame_cond) const;

  const HighlightWeights& highlight(int person) const;
  const InteractiveLayer& layer(int person, int index) const;
  ad::Parameter& sentence_weight() const { return *sentence_weight_; }
  ad::Parameter& sentence_bias() const { return *sentence_bias_; }
  const RefinementConfig& config() const { return config_; }

 private:
  struct PersonWeights {
    HighlightWeights highlight;
    ad::Parameter* partner_ln_gain;
    ad::Parameter* partner_ln_bias;
    std::vector<InteractiveLayer> layers;
  };

  RefinementConfig config_;
  ad::Parameter* sentence_weight_;  // L x D
  ad::Parameter* sentence_bias_;    // 1 x D
  PersonWeights persons_[2];
};

}  // namespace duet

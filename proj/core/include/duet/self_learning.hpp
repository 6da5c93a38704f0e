#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "duet/autodiff.hpp"

namespace duet {

struct SelfLearningConfig {
  int width = 64;       // motion latent width D (also the attention width)
  int text_width = 64;  // word feature width L
  int layers = 2;
  bool share_person_weights = false;
};

/// Weights of one individual-level attention layer for one person.
struct SelfLearningLayer {
  ad::Parameter* ln_gain;
  ad::Parameter* ln_bias;
  ad::Parameter* query;       // D x D
  ad::Parameter* key;         // D x D
  ad::Parameter* value;       // D x D
  ad::Parameter* text_key;    // L x D
  ad::Parameter* text_value;  // L x D
};

/// Each person attends over its own frames and its own decomposed text.
/// Per layer:  h = LN(X) + frame_cond;  X <- X + mixed_attention(h; [h, text]).
class SelfLearningStage {
 public:
  SelfLearningStage(ad::ParameterSet& params, const std::string& prefix,
                    const SelfLearningConfig& config, std::mt19937_64& rng);

  /// `frame_cond` (S x D) carries positional and timestep information.
  /// An invalid `text` Var raises ContractError.
  ad::Var forward_person(ad::Tape& tape, int person, const ad::Var& x, const ad::Var& text,
                         const ad::Var& frame_cond) const;

  std::pair<ad::Var, ad::Var> forward(ad::Tape& tape, const ad::Var& x1, const ad::Var& x2,
                                      const ad::Var& text1, const ad::Var& text2,
                                      const ad::Var& frame_cond) const;

  const SelfLearningLayer& layer(int person, int index) const;
  const SelfLearningConfig& config() const { return config_; }

 private:
  SelfLearningConfig config_;
  std::vector<SelfLearningLayer> person_layers_[2];
};

}  // namespace duet

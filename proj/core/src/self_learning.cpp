#include "duet/self_learning.hpp"

#include <array>
#include <stdexcept>

#include "duet/attention.hpp"
#include "duet/error.hpp"
#include "duet/util.hpp"

namespace duet {

SelfLearningStage::SelfLearningStage(ad::ParameterSet& params, const std::string& prefix,
                                     const SelfLearningConfig& config, std::mt19937_64& rng)
    : config_(config) {
  if (config.width < 1 || config.text_width < 1 || config.layers < 0) {
    throw std::invalid_argument("invalid self-learning dimensions");
  }
  const int d = config.width;
  const int l = config.text_width;
  const int owners = config.share_person_weights ? 1 : 2;
  for (int person = 0; person < owners; ++person) {
    const std::string base =
        config.share_person_weights ? prefix : prefix + ".p" + std::to_string(person + 1);
    for (int i = 0; i < config.layers; ++i) {
      const std::string p = base + ".layer" + std::to_string(i);
      SelfLearningLayer layer{};
      layer.ln_gain = &params.add(p + ".ln.gain", Matrix::Ones(1, d));
      layer.ln_bias = &params.add(p + ".ln.bias", Matrix::Zero(1, d));
      layer.query = &params.add(p + ".query", glorot(d, d, rng));
      layer.key = &params.add(p + ".key", glorot(d, d, rng));
      layer.value = &params.add(p + ".value", glorot(d, d, rng));
      layer.text_key = &params.add(p + ".text_key", glorot(l, d, rng));
      layer.text_value = &params.add(p + ".text_value", glorot(l, d, rng));
      person_layers_[person].push_back(layer);
    }
  }
  if (config.share_person_weights) person_layers_[1] = person_layers_[0];
}

const SelfLearningLayer& SelfLearningStage::layer(int person, int index) const {
  if (person < 0 || person > 1) throw std::invalid_argument("person index must be 0 or 1");
  return person_layers_[person].at(static_cast<std::size_t>(index));
}

ad::Var SelfLearningStage::forward_person(ad::Tape& tape, int person, const ad::Var& x,
                                          const ad::Var& text, const ad::Var& frame_cond) const {
  if (!text.valid()) {
    throw ContractError("stage 1 needs the decomposed text of person " + std::to_string(person + 1));
  }
  if (x.cols() != config_.width || text.cols() != config_.text_width) {
    throw std::invalid_argument("self-learning input widths do not match the configuration");
  }
  ad::Var out = x;
  for (const auto& layer : person_layers_[person]) {
    const ad::Var h = ad::add(
        ad::layer_norm_rows(out, tape.param(*layer.ln_gain), tape.param(*layer.ln_bias)),
        frame_cond);
    const std::array<AttentionSource, 2> sources{{
        {h, tape.param(*layer.key), tape.param(*layer.value)},
        {text, tape.param(*layer.text_key), tape.param(*layer.text_value)},
    }};
    out = ad::add(out, mixed_attention(h, tape.param(*layer.query), sources));
  }
  return out;
}

std::pair<ad::Var, ad::Var> SelfLearningStage::forward(ad::Tape& tape, const ad::Var& x1,
                                                       const ad::Var& x2, const ad::Var& text1,
                                                       const ad::Var& text2,
                                                       const ad::Var& frame_cond) const {
  return {forward_person(tape, 0, x1, text1, frame_cond),
          forward_person(tape, 1, x2, text2, frame_cond)};
}

}  // namespace duet

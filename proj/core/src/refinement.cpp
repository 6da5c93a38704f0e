#include "duet/refinement.hpp"

#include <array>
#include <stdexcept>

#include "duet/attention.hpp"
#include "duet/text.hpp"
#include "duet/util.hpp"

namespace duet {

ad::Var highlight_keyframes(ad::Tape& tape, const ad::Var& x, const ad::Var& sentence,
                            const HighlightWeights& weights, double lambda) {
  if (sentence.rows() != 1 || sentence.cols() != x.cols()) {
    throw std::invalid_argument("highlight: sentence feature must be 1 x D");
  }
  const ad::Var xn = ad::layer_norm_rows(x, tape.param(*weights.motion_ln_gain),
                                         tape.param(*weights.motion_ln_bias));
  const ad::Var sn = ad::layer_norm_rows(sentence, tape.param(*weights.sentence_ln_gain),
                                         tape.param(*weights.sentence_ln_bias));
  const ad::Var sim = ad::matmul(xn, ad::transpose(sn));
  const ad::Var map =
      ad::affine(sim, tape.param(*weights.mlp_weight), tape.param(*weights.mlp_bias));
  return ad::add(x, ad::scale(map, lambda));
}

ad::Var interactive_attention(ad::Tape& tape, const ad::Var& x_self, const ad::Var& overall_text,
                              const ad::Var& partner_tokens, const InteractiveLayer& layer,
                              const ad::Var& frame_cond) {
  if (partner_tokens.cols() != x_self.cols()) {
    throw std::invalid_argument("interactive attention: partner width differs from self width");
  }
  const ad::Var h = ad::add(
      ad::layer_norm_rows(x_self, tape.param(*layer.ln_gain), tape.param(*layer.ln_bias)),
      frame_cond);
  const std::array<AttentionSource, 3> sources{{
      {h, tape.param(*layer.key), tape.param(*layer.value)},
      {overall_text, tape.param(*layer.text_key), tape.param(*layer.text_value)},
      {partner_tokens, tape.param(*layer.partner_key), tape.param(*layer.partner_value)},
  }};
  return ad::add(x_self, mixed_attention(h, tape.param(*layer.query), sources));
}

RefinementStage::RefinementStage(ad::ParameterSet& params, const std::string& prefix,
                                 const RefinementConfig& config, std::mt19937_64& rng)
    : config_(config) {
  if (config.width < 1 || config.text_width < 1 || config.layers < 0 || config.lambda < 0.0) {
    throw std::invalid_argument("invalid refinement configuration");
  }
  const int d = config.width;
  const int l = config.text_width;
  sentence_weight_ = &params.add(prefix + ".sentence.weight", glorot(l, d, rng));
  sentence_bias_ = &params.add(prefix + ".sentence.bias", Matrix::Zero(1, d));

  const int owners = config.share_person_weights ? 1 : 2;
  for (int person = 0; person < owners; ++person) {
    const std::string base =
        config.share_person_weights ? prefix : prefix + ".p" + std::to_string(person + 1);
    PersonWeights& pw = persons_[person];
    auto& hl = pw.highlight;
    hl.motion_ln_gain = &params.add(base + ".highlight.ln_motion.gain", Matrix::Ones(1, d));
    hl.motion_ln_bias = &params.add(base + ".highlight.ln_motion.bias", Matrix::Zero(1, d));
    hl.sentence_ln_gain = &params.add(base + ".highlight.ln_sentence.gain", Matrix::Ones(1, d));
    hl.sentence_ln_bias = &params.add(base + ".highlight.ln_sentence.bias", Matrix::Zero(1, d));
    hl.mlp_weight = &params.add(base + ".highlight.weight", glorot(1, d, rng));
    hl.mlp_bias = &params.add(base + ".highlight.bias", Matrix::Zero(1, d));
    pw.partner_ln_gain = &params.add(base + ".partner_ln.gain", Matrix::Ones(1, d));
    pw.partner_ln_bias = &params.add(base + ".partner_ln.bias", Matrix::Zero(1, d));
    for (int i = 0; i < config.layers; ++i) {
      const std::string p = base + ".layer" + std::to_string(i);
      InteractiveLayer layer{};
      layer.ln_gain = &params.add(p + ".ln.gain", Matrix::Ones(1, d));
      layer.ln_bias = &params.add(p + ".ln.bias", Matrix::Zero(1, d));
      layer.query = &params.add(p + ".query", glorot(d, d, rng));
      layer.key = &params.add(p + ".key", glorot(d, d, rng));
      layer.value = &params.add(p + ".value", glorot(d, d, rng));
      layer.text_key = &params.add(p + ".text_key", glorot(l, d, rng));
      layer.text_value = &params.add(p + ".text_value", glorot(l, d, rng));
      layer.partner_key = &params.add(p + ".partner_key", glorot(d, d, rng));
      layer.partner_value = &params.add(p + ".partner_value", glorot(d, d, rng));
      pw.layers.push_back(layer);
    }
  }
  if (config.share_person_weights) persons_[1] = persons_[0];
}

const HighlightWeights& RefinementStage::highlight(int person) const {
  if (person < 0 || person > 1) throw std::invalid_argument("person index must be 0 or 1");
  return persons_[person].highlight;
}

const InteractiveLayer& RefinementStage::layer(int person, int index) const {
  if (person < 0 || person > 1) throw std::invalid_argument("person index must be 0 or 1");
  return persons_[person].layers.at(static_cast<std::size_t>(index));
}

RefinementStage::Output RefinementStage::forward(ad::Tape& tape, const ad::Var& x1,
                                                 const ad::Var& x2, const ad::Var& overall_text,
                                                 const ad::Var& frame_cond) const {
  if (x1.cols() != config_.width || x2.cols() != config_.width ||
      overall_text.cols() != config_.text_width) {
    throw std::invalid_argument("refinement input widths do not match the configuration");
  }
  Output out;
  out.sentence = sentence_feature(overall_text, tape.param(*sentence_weight_),
                                  tape.param(*sentence_bias_));
  const std::array<ad::Var, 2> hat{
      highlight_keyframes(tape, x1, out.sentence, persons_[0].highlight, config_.lambda),
      highlight_keyframes(tape, x2, out.sentence, persons_[1].highlight, config_.lambda)};

  std::array<ad::Var, 2> result;
  for (int person = 0; person < 2; ++person) {
    const PersonWeights& pw = persons_[person];
    const ad::Var partner =
        ad::add(ad::layer_norm_rows(hat[1 - person], tape.param(*pw.partner_ln_gain),
                                    tape.param(*pw.partner_ln_bias)),
                frame_cond);
    ad::Var x = hat[person];
    for (const auto& layer : pw.layers) {
      x = interactive_attention(tape, x, overall_text, partner, layer, frame_cond);
    }
    result[person] = x;
  }
  out.person1 = result[0];
  out.person2 = result[1];
  return out;
}

}  // namespace duet

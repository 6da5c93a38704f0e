#include "duet/denoiser.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "duet/motion.hpp"
#include "duet/util.hpp"

namespace duet {

int ModelConfig::motion_width() const { return feature_dim(joints); }

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string("model.") + name + " must be >= 1");
  };
  positive(joints, "joints");
  positive(frames, "frames");
  positive(latent, "latent");
  positive(text_width, "text_width");
  positive(text_ffn, "text_ffn");
  positive(segments, "segments");
  positive(predictor_hidden, "predictor_hidden");
  if (text_layers < 0 || self_layers < 0 || graph_layers < 0 || refine_layers < 0) {
    throw std::invalid_argument("layer counts must be >= 0");
  }
  if (segments > frames) throw std::invalid_argument("model.segments must not exceed model.frames");
  if (!(lambda_s2 >= 0.0) || !(lambda_s3 >= 0.0)) {
    throw std::invalid_argument("stage mixing weights must be >= 0");
  }
}

TextBundle TextBundle::null() {
  TextBundle b;
  b.overall.is_null = b.person1.is_null = b.person2.is_null = true;
  return b;
}

TextBundle make_text_bundle(const PromptRecord& prompts, const TokenEmbedder& embedder) {
  TextBundle b;
  b.prompts = prompts;
  b.overall = embed_text(embedder, prompts.overall);
  b.person1 = embed_text(embedder, prompts.person1);
  b.person2 = embed_text(embedder, prompts.person2);
  return b;
}

RowVector timestep_features(int t, int width) {
  RowVector f(width);
  const int half = width / 2;
  for (int i = 0; i < width; ++i) {
    const int k = i < half ? i : i - half;
    const double freq = std::exp(-std::log(10000.0) * k / std::max(half, 1));
    f(i) = i < half ? std::sin(t * freq) : std::cos(t * freq);
  }
  return f;
}

Denoiser::Denoiser(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config.validate();
  std::mt19937_64 rng(seed);
  const int dm = config.motion_width();
  const int d = config.latent;
  const int l = config.text_width;

  text_ = std::make_unique<TextEncoder>(
      params_, "text", TextEncoderConfig{l, config.text_layers, config.text_ffn}, rng);
  temb_w1_ = &params_.add("time.w1", glorot(d, d, rng));
  temb_b1_ = &params_.add("time.b1", Matrix::Zero(1, d));
  temb_w2_ = &params_.add("time.w2", glorot(d, d, rng));
  temb_b2_ = &params_.add("time.b2", Matrix::Zero(1, d));
  in_w_ = &params_.add("input.weight", glorot(dm, d, rng));
  in_b_ = &params_.add("input.bias", Matrix::Zero(1, d));

  stage1_ = std::make_unique<SelfLearningStage>(
      params_, "s1", SelfLearningConfig{d, l, config.self_layers, config.share_person_weights},
      rng);
  AdaptiveConfig ac;
  ac.frames = config.frames;
  ac.width = d;
  ac.text_width = l;
  ac.segments = config.segments;
  ac.layers = config.graph_layers;
  ac.predictor_hidden = config.predictor_hidden;
  ac.lambda = config.lambda_s2;
  ac.mode = config.adjacency;
  stage2_ = std::make_unique<AdaptiveStage>(params_, "s2", ac, rng);
  stage3_ = std::make_unique<RefinementStage>(
      params_, "s3",
      RefinementConfig{d, l, config.refine_layers, config.lambda_s3, config.share_person_weights},
      rng);

  out_w_ = &params_.add("head.weight", glorot(d, dm, rng));
  out_b_ = &params_.add("head.bias", Matrix::Zero(1, dm));
  positions_ = sinusoidal_encoding(config.frames, d);
}

Denoiser::Output Denoiser::forward(ad::Tape& tape, const ad::Var& x1, const ad::Var& x2, int t,
                                   const TextBundle& text, const RowVector* profile_override,
                                   Trace* trace) const {
  const int dm = config_.motion_width();
  if (x1.rows() != config_.frames || x1.cols() != dm || x2.rows() != config_.frames ||
      x2.cols() != dm) {
    throw std::invalid_argument("denoiser expects " + std::to_string(config_.frames) + "x" +
                                std::to_string(dm) + " inputs per person");
  }
  if (t < 0) throw std::invalid_argument("negative timestep");
  static const TextBundle kNull = TextBundle::null();
  const TextBundle& bundle = config_.use_text ? text : kNull;

  const ad::Var f_overall = text_->encode(tape, bundle.overall);
  const ad::Var f_p1 = text_->encode(tape, bundle.person1);
  const ad::Var f_p2 = text_->encode(tape, bundle.person2);

  const ad::Var t_in = tape.constant(timestep_features(t, config_.latent));
  const ad::Var temb = ad::affine(
      ad::silu(ad::affine(t_in, tape.param(*temb_w1_), tape.param(*temb_b1_))),
      tape.param(*temb_w2_), tape.param(*temb_b2_));
  const ad::Var frame_cond = ad::add_row(tape.constant(positions_), temb);

  const ad::Var w_in = tape.param(*in_w_);
  const ad::Var b_in = tape.param(*in_b_);
  const ad::Var h1 = ad::affine(x1, w_in, b_in);
  const ad::Var h2 = ad::affine(x2, w_in, b_in);

  const auto [s1_1, s1_2] = stage1_->forward(tape, h1, h2, f_p1, f_p2, frame_cond);
  const auto s2 = stage2_->forward(tape, s1_1, s1_2, f_overall, temb, profile_override);
  const auto s3 = stage3_->forward(tape, s2.person1, s2.person2, f_overall, frame_cond);

  const ad::Var w_out = tape.param(*out_w_);
  const ad::Var b_out = tape.param(*out_b_);
  if (trace != nullptr) {
    *trace = Trace{h1, h2, s1_1, s1_2, s2.person1, s2.person2, s3.person1, s3.person2};
  }
  return {ad::affine(s3.person1, w_out, b_out), ad::affine(s3.person2, w_out, b_out), s2.profile};
}

MotionPair Denoiser::predict(const MotionPair& x_t, int t, const TextBundle& text) const {
  ad::Tape tape(false);
  const Output out = forward(tape, tape.constant(x_t.person1), tape.constant(x_t.person2), t, text);
  return {out.person1.value(), out.person2.value()};
}

RowVector Denoiser::predict_profile(const TextBundle& text) const {
  ad::Tape tape(false);
  static const TextBundle kNull = TextBundle::null();
  const ad::Var f = text_->encode(tape, config_.use_text ? text.overall : kNull.overall);
  return stage2_->predictor().forward(tape, f).value();
}

}  // namespace duet

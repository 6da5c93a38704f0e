#include "duet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "duet/adaptive.hpp"
#include "duet/checkpoint.hpp"
#include "duet/error.hpp"

namespace duet {

std::vector<TrainingExample> prepare_examples(const std::vector<Sample>& samples,
                                              const FeatureNormalizer& normalizer,
                                              const TokenEmbedder& embedder,
                                              const ModelConfig& model) {
  const SegmentLayout layout = segment_bounds(model.frames, model.segments);
  std::vector<TrainingExample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    s.motion.validate();
    if (s.motion.joint_count() != model.joints || s.motion.frame_count() != model.frames) {
      throw std::invalid_argument("sample " + s.motion.id + " is " +
                                  std::to_string(s.motion.frame_count()) + " frames x " +
                                  std::to_string(s.motion.joint_count()) +
                                  " joints; the model expects " + std::to_string(model.frames) +
                                  " x " + std::to_string(model.joints));
    }
    TrainingExample e;
    e.id = s.motion.id;
    e.x0 = {normalizer.normalize(s.motion.person1.frames),
            normalizer.normalize(s.motion.person2.frames)};
    e.text = make_text_bundle(s.prompts, embedder);
    e.gt_profile = gt_distance_profile(s.motion, layout);
    out.push_back(std::move(e));
  }
  return out;
}

Trainer::Trainer(const RunConfig& config, const std::vector<Sample>& samples,
                 TrainerOptions options)
    : config_(config),
      options_(std::move(options)),
      normalizer_(FeatureNormalizer::fit(samples)),
      model_(std::make_unique<Denoiser>(config.model, config.seed)),
      adam_(model_->params()),
      schedule_(make_schedule(config.diffusion.steps, config.diffusion.beta_start,
                              config.diffusion.beta_end)),
      rng_(config.seed ^ 0x7a11ab1eULL) {
  config_.validate();
  if (samples.empty()) throw std::invalid_argument("training needs a non-empty dataset");
  const HashEmbedder embedder(config.model.text_width);
  examples_ = prepare_examples(samples, normalizer_, embedder, config.model);
  order_.resize(examples_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::shuffle(order_.begin(), order_.end(), rng_);
}

std::vector<std::size_t> Trainer::next_batch() {
  std::vector<std::size_t> batch;
  batch.reserve(static_cast<std::size_t>(config_.optim.batch_size));
  while (batch.size() < static_cast<std::size_t>(config_.optim.batch_size)) {
    if (cursor_ == order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    batch.push_back(order_[cursor_++]);
  }
  return batch;
}

StepStats Trainer::step() {
  const auto batch = next_batch();
  const int width = config_.model.motion_width();
  const double lambda = config_.loss.lambda_distance;
  std::uniform_int_distribution<int> pick_t(0, schedule_.steps - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct Draw {
    std::size_t index;
    int t;
    bool dropped;
  };
  std::vector<Draw> draws;
  ad::Tape tape;
  std::vector<ad::Var> losses;
  double recon_sum = 0.0;
  double dist_sum = 0.0;
  int dist_count = 0;
  static const TextBundle kNull = TextBundle::null();

  for (std::size_t idx : batch) {
    const TrainingExample& ex = examples_[idx];
    const int t = pick_t(rng_);
    const MotionPair noise = gaussian_like(config_.model.frames, width, rng_);
    const bool dropped = unit(rng_) < config_.loss.condition_dropout;
    draws.push_back({idx, t, dropped});

    const MotionPair xt = q_sample(ex.x0, t, noise, schedule_);
    const auto out = model_->forward(tape, tape.constant(xt.person1), tape.constant(xt.person2), t,
                                     dropped ? kNull : ex.text);
    const ad::Var recon = ad::scale(ad::add(ad::mse(out.person1, tape.constant(ex.x0.person1)),
                                            ad::mse(out.person2, tape.constant(ex.x0.person2))),
                                    0.5);
    recon_sum += recon.scalar();
    ad::Var loss = recon;
    if (lambda > 0.0 && !dropped) {
      const ad::Var d = distance_loss(out.profile, ex.gt_profile);
      dist_sum += d.scalar();
      ++dist_count;
      loss = ad::add(loss, ad::scale(d, lambda));
    }
    losses.push_back(loss);
  }

  StepStats stats;
  stats.recon = recon_sum / static_cast<double>(batch.size());
  stats.distance = dist_count > 0 ? dist_sum / dist_count : 0.0;
  const ad::Var total = ad::scale(ad::sum_all(ad::vstack(losses)), 1.0 / static_cast<double>(batch.size()));
  stats.loss = total.scalar();
  if (!std::isfinite(stats.loss) || !std::isfinite(stats.recon) || !std::isfinite(stats.distance)) {
    std::string where = "(no dump path configured)";
    if (!options_.dump_path.empty()) {
      nlohmann::json dump{{"step", steps_done_ + 1}, {"loss", std::to_string(stats.loss)}};
      for (const auto& d : draws) {
        dump["batch"].push_back({{"id", examples_[d.index].id},
                                 {"timestep", d.t},
                                 {"text_dropped", d.dropped},
                                 {"prompt", examples_[d.index].text.prompts.overall}});
      }
      std::ofstream(options_.dump_path) << dump.dump(2) << "\n";
      where = options_.dump_path;
    }
    throw NumericError("non-finite training loss at step " + std::to_string(steps_done_ + 1) +
                       "; batch written to " + where);
  }

  auto& params = model_->params();
  params.zero_grad();
  tape.backward(total);
  stats.grad_norm = clip_grad_norm(params, config_.optim.grad_clip);
  if (!std::isfinite(stats.grad_norm)) {
    throw NumericError("non-finite gradient norm at step " + std::to_string(steps_done_ + 1));
  }
  stats.rate = cosine_rate(steps_done_, std::max(config_.optim.steps, 1),
                           config_.optim.learning_rate, config_.optim.final_learning_rate);
  adam_.step(params, stats.rate);
  stats.step = ++steps_done_;

  if (options_.on_step) options_.on_step(stats);
  if (config_.optim.checkpoint_every > 0 && !options_.checkpoint_path.empty() &&
      steps_done_ % config_.optim.checkpoint_every == 0 && steps_done_ < config_.optim.steps) {
    save(options_.checkpoint_path + ".step" + std::to_string(steps_done_));
  }
  return stats;
}

void Trainer::run() {
  while (steps_done_ < config_.optim.steps) step();
  if (!options_.checkpoint_path.empty()) save(options_.checkpoint_path);
}

void Trainer::save(const std::string& path) const {
  save_checkpoint(path, config_, static_cast<std::uint64_t>(steps_done_), normalizer_, *model_,
                  &adam_);
  // Read the file back so a checkpoint that would not load is caught here.
  load_checkpoint(path, &config_);
}

double reconstruction_error(const Denoiser& model, const std::vector<TrainingExample>& examples,
                            const DiffusionSchedule& schedule, const std::vector<int>& timesteps,
                            std::uint64_t seed) {
  if (examples.empty() || timesteps.empty()) {
    throw std::invalid_argument("reconstruction_error needs examples and timesteps");
  }
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (const auto& ex : examples) {
    for (int t : timesteps) {
      const MotionPair noise =
          gaussian_like(static_cast<int>(ex.x0.person1.rows()), static_cast<int>(ex.x0.person1.cols()), rng);
      const MotionPair pred = model.predict(q_sample(ex.x0, t, noise, schedule), t, ex.text);
      total += reconstruction_loss(pred, ex.x0);
    }
  }
  return total / static_cast<double>(examples.size() * timesteps.size());
}

}  // namespace duet

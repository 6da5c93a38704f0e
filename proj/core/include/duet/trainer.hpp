#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "duet/config.hpp"
#include "duet/dataset.hpp"
#include "duet/denoiser.hpp"
#include "duet/diffusion.hpp"
#include "duet/optim.hpp"

namespace duet {

/// A dataset sample in model space: normalized features, encoded-ready text
/// and the ground-truth distance profile.
struct TrainingExample {
  std::string id;
  MotionPair x0;
  TextBundle text;
  RowVector gt_profile;
};

std::vector<TrainingExample> prepare_examples(const std::vector<Sample>& samples,
                                              const FeatureNormalizer& normalizer,
                                              const TokenEmbedder& embedder,
                                              const ModelConfig& model);

struct StepStats {
  int step = 0;         // 1-based index of the finished step
  double loss = 0.0;    // batch mean of recon + lambda * distance
  double recon = 0.0;   // batch mean reconstruction term
  double distance = 0.0;  // mean distance term over samples that kept their text
  double grad_norm = 0.0;  // before clipping
  double rate = 0.0;
};

struct TrainerOptions {
  /// Final checkpoint destination; periodic checkpoints append ".step<N>".
  std::string checkpoint_path;
  /// Where a diagnostic JSON of the offending batch goes on a non-finite loss.
  std::string dump_path;
  std::function<void(const StepStats&)> on_step;
};

class Trainer {
 public:
  /// Fits the feature normalizer on `samples` and initializes the model from
  /// `config.seed`.
  Trainer(const RunConfig& config, const std::vector<Sample>& samples, TrainerOptions options = {});

  /// One optimizer step on the next batch. A non-finite loss writes the
  /// batch diagnostics and raises NumericError.
  StepStats step();

  /// Runs the remaining configured steps and writes the final checkpoint
  /// when a path is set.
  void run();

  int steps_done() const { return steps_done_; }
  const RunConfig& config() const { return config_; }
  Denoiser& model() { return *model_; }
  const Denoiser& model() const { return *model_; }
  const FeatureNormalizer& normalizer() const { return normalizer_; }
  const std::vector<TrainingExample>& examples() const { return examples_; }
  const Adam& optimizer() const { return adam_; }
  const DiffusionSchedule& schedule() const { return schedule_; }

  void save(const std::string& path) const;

 private:
  std::vector<std::size_t> next_batch();

  RunConfig config_;
  TrainerOptions options_;
  FeatureNormalizer normalizer_;
  std::vector<TrainingExample> examples_;
  std::unique_ptr<Denoiser> model_;
  Adam adam_;
  DiffusionSchedule schedule_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  int steps_done_ = 0;
};

/// Mean conditioned reconstruction error over `examples` at each of the
/// given timesteps, with noise drawn from `seed`.
double reconstruction_error(const Denoiser& model, const std::vector<TrainingExample>& examples,
                            const DiffusionSchedule& schedule, const std::vector<int>& timesteps,
                            std::uint64_t seed);

}  // namespace duet

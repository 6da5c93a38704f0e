#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "duet/denoiser.hpp"

namespace duet {

struct DiffusionConfig {
  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int sample_steps = 50;
  double guidance_scale = 1.8;
};

struct LossConfig {
  double lambda_distance = 0.5;
  double condition_dropout = 0.1;
};

struct OptimConfig {
  double learning_rate = 2e-4;
  double final_learning_rate = 2e-5;
  int steps = 20000;
  int batch_size = 8;
  double grad_clip = 1.0;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
};

struct PathConfig {
  std::string prompt_cache;
};

struct RunConfig {
  ModelConfig model;
  DiffusionConfig diffusion;
  LossConfig loss;
  OptimConfig optim;
  std::uint64_t seed = 0;
  PathConfig paths;

  /// Checks every section against the preconditions of the modules it feeds.
  void validate() const;
};

/// Unknown keys and ill-typed values raise std::invalid_argument naming the
/// offending key; missing keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::json config_to_json(const RunConfig& config);

/// Hash of everything that determines parameter shapes and the meaning of
/// the learned weights: the model section and the noise schedule.
std::uint64_t config_fingerprint(const RunConfig& config);

}  // namespace duet

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "duet/autodiff.hpp"

namespace duet {

/// Linear beta schedule with cumulative products of (1 - beta).
struct DiffusionSchedule {
  int steps = 0;
  Vector betas;
  Vector alpha_bars;
};

DiffusionSchedule make_schedule(int steps, double beta_start, double beta_end);

/// Both persons' feature matrices (S x D each); the diffused variable.
struct MotionPair {
  Matrix person1;
  Matrix person2;
};

struct GuidanceConfig {
  double scale = 1.8;
};

struct LossWeights {
  double lambda_distance = 0.5;
};

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise, for both persons.
MotionPair q_sample(const MotionPair& x0, int t, const MotionPair& noise,
                    const DiffusionSchedule& schedule);

/// Mean squared error over both persons, all frames and channels.
double reconstruction_loss(const MotionPair& pred, const MotionPair& x0);

/// s * cond + (1 - s) * uncond, elementwise.
Matrix guided_output(const Matrix& cond, const Matrix& uncond, double scale);
MotionPair guided_output(const MotionPair& cond, const MotionPair& uncond, double scale);

/// recon + lambda * distance_ce. NaN/Inf terms raise NumericError.
double total_loss(double recon, double distance_ce, const LossWeights& weights);

/// Descending timesteps visited by the sampler: `count` values evenly spread
/// over [0, steps) that always include steps - 1 and 0. `count <= 0` or
/// `count >= steps` visits every step.
std::vector<int> sampling_timesteps(int steps, int count);

/// Predicts x0 for both persons. `conditional == false` asks for the
/// null-text branch.
using DenoiseFn = std::function<MotionPair(const MotionPair& x_t, int t, bool conditional)>;

struct SamplerOptions {
  int frames = 60;
  int width = 64;
  int sample_steps = 50;
  GuidanceConfig guidance;
};

/// DDPM ancestral sampling from pure noise, using the posterior
/// q(x_{t'} | x_t, x0_hat) between consecutive visited timesteps.
MotionPair sample(const DenoiseFn& denoiser, const DiffusionSchedule& schedule,
                  const SamplerOptions& options, std::uint64_t seed);

MotionPair gaussian_like(int frames, int width, std::mt19937_64& rng);

}  // namespace duet

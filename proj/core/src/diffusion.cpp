#include "duet/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "duet/error.hpp"
#include "duet/util.hpp"

namespace duet {

DiffusionSchedule make_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw std::invalid_argument("diffusion needs at least one step");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw std::invalid_argument("betas must satisfy 0 < beta_start <= beta_end < 1");
  }
  DiffusionSchedule s;
  s.steps = steps;
  s.betas.resize(steps);
  s.alpha_bars.resize(steps);
  double prod = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t) / (steps - 1);
    s.betas(t) = beta_start + (beta_end - beta_start) * frac;
    prod *= 1.0 - s.betas(t);
    s.alpha_bars(t) = prod;
  }
  return s;
}

namespace {

void check_pair_shapes(const MotionPair& a, const MotionPair& b, const char* op) {
  auto same = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols();
  };
  if (!same(a.person1, b.person1) || !same(a.person2, b.person2)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

MotionPair q_sample(const MotionPair& x0, int t, const MotionPair& noise,
                    const DiffusionSchedule& schedule) {
  if (t < 0 || t >= schedule.steps) {
    throw std::invalid_argument("timestep " + std::to_string(t) + " outside [0, " +
                                std::to_string(schedule.steps) + ")");
  }
  check_pair_shapes(x0, noise, "q_sample");
  const double a = std::sqrt(schedule.alpha_bars(t));
  const double b = std::sqrt(1.0 - schedule.alpha_bars(t));
  return {a * x0.person1 + b * noise.person1, a * x0.person2 + b * noise.person2};
}

double reconstruction_loss(const MotionPair& pred, const MotionPair& x0) {
  check_pair_shapes(pred, x0, "reconstruction_loss");
  const double n = static_cast<double>(pred.person1.size() + pred.person2.size());
  if (n == 0) throw std::invalid_argument("reconstruction_loss: empty input");
  return ((pred.person1 - x0.person1).squaredNorm() + (pred.person2 - x0.person2).squaredNorm()) / n;
}

Matrix guided_output(const Matrix& cond, const Matrix& uncond, double scale) {
  if (cond.rows() != uncond.rows() || cond.cols() != uncond.cols()) {
    throw std::invalid_argument("guided_output: shape mismatch");
  }
  return scale * cond + (1.0 - scale) * uncond;
}

MotionPair guided_output(const MotionPair& cond, const MotionPair& uncond, double scale) {
  return {guided_output(cond.person1, uncond.person1, scale),
          guided_output(cond.person2, uncond.person2, scale)};
}

double total_loss(double recon, double distance_ce, const LossWeights& weights) {
  if (!std::isfinite(recon) || !std::isfinite(distance_ce)) {
    throw NumericError("non-finite loss term (recon=" + std::to_string(recon) +
                       ", distance=" + std::to_string(distance_ce) + ")");
  }
  return recon + weights.lambda_distance * distance_ce;
}

std::vector<int> sampling_timesteps(int steps, int count) {
  std::vector<int> ts;
  if (count <= 0 || count >= steps) {
    for (int t = steps - 1; t >= 0; --t) ts.push_back(t);
    return ts;
  }
  if (count == 1) return {steps - 1};
  for (int i = 0; i < count; ++i) {
    const long v = std::lround(static_cast<double>(steps - 1) * (count - 1 - i) / (count - 1));
    if (ts.empty() || ts.back() != v) ts.push_back(static_cast<int>(v));
  }
  return ts;
}

MotionPair gaussian_like(int frames, int width, std::mt19937_64& rng) {
  return {random_normal(frames, width, 1.0, rng), random_normal(frames, width, 1.0, rng)};
}

MotionPair sample(const DenoiseFn& denoiser, const DiffusionSchedule& schedule,
                  const SamplerOptions& options, std::uint64_t seed) {
  if (options.guidance.scale < 0.0) throw std::invalid_argument("guidance scale must be >= 0");
  std::mt19937_64 rng(seed);
  MotionPair x = gaussian_like(options.frames, options.width, rng);
  const auto ts = sampling_timesteps(schedule.steps, options.sample_steps);
  const double s = options.guidance.scale;

  auto predict = [&](const MotionPair& xt, int t, bool conditional) {
    MotionPair out = denoiser(xt, t, conditional);
    if (out.person1.rows() != options.frames || out.person1.cols() != options.width ||
        out.person2.rows() != options.frames || out.person2.cols() != options.width) {
      throw ContractError("denoiser returned " + std::to_string(out.person1.rows()) + "x" +
                          std::to_string(out.person1.cols()) + ", expected " +
                          std::to_string(options.frames) + "x" + std::to_string(options.width));
    }
    return out;
  };

  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    MotionPair x0_hat;
    if (s == 1.0) {
      x0_hat = predict(x, t, true);
    } else if (s == 0.0) {
      x0_hat = predict(x, t, false);
    } else {
      x0_hat = guided_output(predict(x, t, true), predict(x, t, false), s);
    }

    const double abar_t = schedule.alpha_bars(t);
    const double abar_prev = i + 1 < ts.size() ? schedule.alpha_bars(ts[i + 1]) : 1.0;
    const double beta = 1.0 - abar_t / abar_prev;
    const double denom = 1.0 - abar_t;
    const double coef_x0 = std::sqrt(abar_prev) * beta / denom;
    const double coef_xt = std::sqrt(1.0 - beta) * (1.0 - abar_prev) / denom;
    const double variance = beta * (1.0 - abar_prev) / denom;

    MotionPair next{coef_x0 * x0_hat.person1 + coef_xt * x.person1,
                    coef_x0 * x0_hat.person2 + coef_xt * x.person2};
    if (i + 1 < ts.size() && variance > 0.0) {
      const double sd = std::sqrt(variance);
      MotionPair z = gaussian_like(options.frames, options.width, rng);
      next.person1 += sd * z.person1;
      next.person2 += sd * z.person2;
    }
    x = std::move(next);
  }
  return x;
}

}  // namespace duet

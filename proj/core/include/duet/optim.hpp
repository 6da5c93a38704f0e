#pragma once

#include <vector>

#include "duet/autodiff.hpp"

namespace duet {

/// Cosine decay from `max_rate` at step 0 to `min_rate` at `total_steps - 1`.
double cosine_rate(int step, int total_steps, double max_rate, double min_rate);

/// Rescales all gradients so their global norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(ad::ParameterSet& params, double max_norm);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const ad::ParameterSet& params, AdamOptions options = {});

  void step(ad::ParameterSet& params, double rate);

  long long steps() const { return steps_; }
  void set_steps(long long steps) { steps_ = steps; }
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  AdamOptions options_;
  long long steps_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace duet

#include "duet/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace duet {

double cosine_rate(int step, int total_steps, double max_rate, double min_rate) {
  if (total_steps < 1) throw std::invalid_argument("cosine schedule needs >= 1 step");
  if (total_steps == 1) return max_rate;
  const double progress =
      static_cast<double>(std::clamp(step, 0, total_steps - 1)) / (total_steps - 1);
  return min_rate + 0.5 * (max_rate - min_rate) * (1.0 + std::cos(std::numbers::pi * progress));
}

double clip_grad_norm(ad::ParameterSet& params, double max_norm) {
  const double norm = params.grad_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (std::size_t i = 0; i < params.size(); ++i) params[i].grad *= factor;
  }
  return norm;
}

Adam::Adam(const ad::ParameterSet& params, AdamOptions options) : options_(options) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
    v_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
  }
}

void Adam::step(ad::ParameterSet& params, double rate) {
  if (params.size() != m_.size()) throw std::invalid_argument("optimizer/parameter count mismatch");
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * p.grad;
    v_[i] = b2 * v_[i] + (1.0 - b2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -=
        rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + options_.eps);
  }
}

}  // namespace duet

#include "unimc/optim.hpp"

#include <algorithm>
#include <cmath>

namespace unimc {

AdamOptimizer::AdamOptimizer(ModelParameters& params, AdamOptions options)
    : params_(params), options_(options) {
  for (const auto& [name, tensor] : params_.named) {
    m_[name].assign(tensor->size(), 0.0);
    v_[name].assign(tensor->size(), 0.0);
  }
}

void AdamOptimizer::step(double learning_rate) {
  ++steps_;

  double scale = 1.0;
  if (options_.clip_norm > 0.0) {
    double sq = 0.0;
    for (auto& [name, tensor] : params_.named) {
      if (!tensor->has_grad()) continue;
      for (double g : tensor->grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > options_.clip_norm) scale = options_.clip_norm / norm;
  }

  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  for (auto& [name, tensor] : params_.named) {
    double* values = tensor->values().data();
    double* grads = tensor->grad().data();
    std::vector<double>& m = m_[name];
    std::vector<double>& v = v_[name];
    for (std::size_t i = 0; i < tensor->size(); ++i) {
      const double g = grads[i] * scale;
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      values[i] -= learning_rate * mhat / (std::sqrt(vhat) + options_.eps);
    }
    tensor->zero_grad();
  }
}

double scheduled_learning_rate(double peak, long long step, long long total_steps,
                               double warmup_fraction) {
  if (total_steps <= 0) return peak;
  const double warmup_steps =
      std::max(1.0, std::floor(warmup_fraction * static_cast<double>(total_steps)));
  const double s = static_cast<double>(step);
  if (s <= warmup_steps) return peak * s / warmup_steps;
  const double total = static_cast<double>(total_steps);
  if (total <= warmup_steps) return peak;
  return peak * (total - s + 1.0) / (total - warmup_steps);
}

}  // namespace unimc

#pragma once

#include <map>
#include <string>
#include <vector>

#include "unimc/model.hpp"

namespace unimc {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

// Adam with bias correction and global-norm gradient clipping. Parameter
// order follows the (sorted) named map, so updates are deterministic.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(ModelParameters& params, AdamOptions options = {});

  // Applies one update from the accumulated gradients, then zeroes them.
  void step(double learning_rate);

 private:
  ModelParameters& params_;
  AdamOptions options_;
  long long steps_ = 0;
  std::map<std::string, std::vector<double>> m_;
  std::map<std::string, std::vector<double>> v_;
};

// Linear warmup to the peak rate, then linear decay towards zero at
// total_steps. step is 1-based.
double scheduled_learning_rate(double peak, long long step, long long total_steps,
                               double warmup_fraction);

}  // namespace unimc

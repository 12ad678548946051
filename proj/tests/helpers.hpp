#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "unimc/mc_format.hpp"
#include "unimc/model.hpp"
#include "unimc/tokenizer.hpp"

namespace unimc::testing {

// Independent scalar softmax over the unblocked slots, long double
// accumulation. Blocked slots (mask at the most negative finite double or
// below) come out exactly 0.
inline std::vector<double> oracle_masked_softmax(const std::vector<double>& x,
                                                 const std::vector<double>& mask) {
  const double blocked = std::numeric_limits<double>::lowest();
  long double max = -std::numeric_limits<long double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!mask.empty() && mask[i] <= blocked) continue;
    const long double z = x[i] + (mask.empty() ? 0.0 : mask[i]);
    if (z > max) max = z;
  }
  long double denom = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!mask.empty() && mask[i] <= blocked) continue;
    denom += std::exp(static_cast<long double>(x[i]) +
                      (mask.empty() ? 0.0L : static_cast<long double>(mask[i])) - max);
  }
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!mask.empty() && mask[i] <= blocked) continue;
    out[i] = static_cast<double>(
        std::exp(static_cast<long double>(x[i]) +
                 (mask.empty() ? 0.0L : static_cast<long double>(mask[i])) - max) /
        denom);
  }
  return out;
}

inline double oracle_cross_entropy(const std::vector<double>& logits, int target) {
  const std::vector<double> probs = oracle_masked_softmax(logits, {});
  return -std::log(probs[static_cast<std::size_t>(target)]);
}

// Central finite differences against the analytic gradient already stored in
// param->grad(). loss_fn re-runs the forward pass with the perturbed values.
// Relative error uses max(1, |ga|, |gn|) in the denominator.
template <typename F>
double max_grad_rel_error(const TensorPtr& param, F&& loss_fn, double step = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < param->size(); ++i) {
    const double orig = param->values()[i];
    param->values()[i] = orig + step;
    const double up = loss_fn();
    param->values()[i] = orig - step;
    const double down = loss_fn();
    param->values()[i] = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = param->has_grad() ? param->grad()[i] : 0.0;
    const double err = std::abs(analytic - numeric) /
                       std::max({1.0, std::abs(analytic), std::abs(numeric)});
    worst = std::max(worst, err);
  }
  return worst;
}

inline std::string random_word(std::mt19937_64& rng, int min_len = 2, int max_len = 7) {
  std::uniform_int_distribution<int> len_dist(min_len, max_len);
  std::uniform_int_distribution<int> ch_dist(0, 25);
  std::string word;
  const int len = len_dist(rng);
  for (int i = 0; i < len; ++i) word.push_back(static_cast<char>('a' + ch_dist(rng)));
  return word;
}

inline std::string random_phrase(std::mt19937_64& rng, int words) {
  std::string out;
  for (int i = 0; i < words; ++i) {
    if (!out.empty()) out += " ";
    out += random_word(rng);
  }
  return out;
}

// A random valid MCExample; option texts are pairwise distinct.
inline MCExample random_example(std::mt19937_64& rng, int min_options = 2,
                                int max_options = 5) {
  std::uniform_int_distribution<int> opt_dist(min_options, max_options);
  std::uniform_int_distribution<int> len_dist(1, 4);
  std::uniform_int_distribution<int> coin(0, 1);
  MCExample ex;
  const int options = opt_dist(rng);
  for (int i = 0; i < options; ++i) {
    ex.options.push_back(std::to_string(i) + random_word(rng) + " " +
                         random_phrase(rng, len_dist(rng)));
  }
  if (coin(rng)) ex.question = random_phrase(rng, 2 + len_dist(rng));
  ex.passage = random_phrase(rng, 3 + len_dist(rng) * 2);
  std::uniform_int_distribution<int> ans_dist(0, options - 1);
  ex.answer = ans_dist(rng);
  ex.task_group = TaskGroup::kNativeMc;
  ex.source_dataset = "random";
  ex.template_id = "random";
  return ex;
}

// Vocabulary covering a set of examples plus a margin of head-room.
inline Vocab vocab_for(const std::vector<MCExample>& examples, int extra = 64) {
  std::string corpus;
  for (const MCExample& ex : examples) {
    corpus += ex.passage + "\n";
    if (ex.question) corpus += *ex.question + "\n";
    for (const std::string& option : ex.options) corpus += option + "\n";
  }
  std::set<std::string> distinct;
  for (const std::string& tok : tokenize(corpus)) distinct.insert(tok);
  return build_vocab(corpus, static_cast<int>(distinct.size()) + 8 + extra);
}

}  // namespace unimc::testing

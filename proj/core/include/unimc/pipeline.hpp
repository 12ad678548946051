#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "unimc/encoding.hpp"
#include "unimc/model.hpp"

namespace unimc {

struct DatasetEntry {
  std::string path;
  double weight = 1.0;
};

// Plain-text key=value plan file. `train =` / `eval =` lines declare the
// manifest; the evaluator refuses anything declared as training data.
struct TrainPlan {
  std::vector<DatasetEntry> train;
  std::vector<std::string> eval;
  int per_task_cap = 20000;
  int epochs = 1;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double warmup_fraction = 0.1;
  double clip_norm = 1.0;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  double mlm_ratio = 0.15;
  int max_len = 512;
  std::string preset = "toy";
  std::optional<int> layers, hidden, heads, ffn_multiplier;
  bool share_layer_parameters = true;
  AblationFlags ablation;
  bool include_question = true;
  LossWeights loss_weights;

  ModelConfig model_config(int vocab_size) const;
};

TrainPlan parse_train_plan(std::istream& in);
TrainPlan load_train_plan(const std::string& path);

// Capped, shuffled, assembled training pool. Each dataset contributes
// min(size, per_task_cap) examples (scaled by its weight), sampled uniformly
// without replacement; the pool is globally shuffled so one batch mixes
// tasks and option counts. Deterministic per (plan, seed).
class TrainingStream {
 public:
  std::size_t example_count() const { return pool_.size(); }
  std::size_t batch_count() const;
  // Applies the O-MLM targets and a fresh MLM mask, then collates.
  TrainingBatch make_batch(std::size_t index, double mlm_ratio,
                           std::mt19937_64& rng) const;

 private:
  friend TrainingStream build_training_stream(const TrainPlan&,
                                              const std::vector<std::vector<MCExample>>&,
                                              const Vocab&, std::uint64_t);
  std::vector<EncodedInput> pool_;
  int batch_size_ = 16;
};

TrainingStream build_training_stream(const TrainPlan& plan,
                                     const std::vector<std::vector<MCExample>>& datasets,
                                     const Vocab& vocab, std::uint64_t seed);

struct TrainLogEntry {
  long long step = 0;
  double l_mlm = 0.0, l_omlm = 0.0, l_op = 0.0, l_full = 0.0;
  double learning_rate = 0.0;
};

std::string train_log_line(const TrainLogEntry& entry);

struct TrainResult {
  ModelParameters params;
  std::vector<TrainLogEntry> log;
};

// MC training: one optimizer step per mixed-task batch, Adam with linear
// warmup then linear decay, losses logged per step. Aborts on a non-finite
// loss. Deterministic per (plan, seed); the seed drives initialization and
// data order both.
TrainResult train(const TrainPlan& plan,
                  const std::vector<std::vector<MCExample>>& datasets,
                  const Vocab& vocab, std::uint64_t seed,
                  std::ostream* log_stream = nullptr);

struct PredictionResult {
  std::vector<double> probabilities;         // per option, sums to 1
  int chosen = 0;                            // argmax, ties to the lowest index
  std::vector<std::string> per_option_token; // "yes"/"no" recovered per [O-MASK]
};

// Zero-shot prediction; never updates parameters, ignores example.answer.
PredictionResult predict(const MCExample& example, const ModelParameters& params,
                         const Vocab& vocab, int max_len, bool include_question = true);

struct DatasetReport {
  std::string name;
  TaskGroup group = TaskGroup::kNativeMc;
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

struct EvalReport {
  std::vector<DatasetReport> datasets;
  std::vector<std::pair<std::string, double>> group_means;  // group -> mean accuracy
  double overall = 0.0;  // arithmetic mean of the group means
  std::uint64_t seed = 0;
};

// Accuracy per dataset, unweighted mean per task group, overall arithmetic
// mean of the group means. Datasets named in train_flagged are refused.
EvalReport evaluate(const std::vector<std::pair<std::string, std::vector<MCExample>>>& datasets,
                    const ModelParameters& params, const Vocab& vocab, int max_len,
                    bool include_question = true,
                    const std::set<std::string>& train_flagged = {});

std::string eval_report_lines(const EvalReport& report);  // line-delimited records
std::string eval_report_table(const EvalReport& report);  // human-readable table

// One ablation sweep row: a named configuration override set.
struct SweepRow {
  std::string name;
  std::map<std::string, std::string> overrides;  // uie/amm/question/preset/epochs
};

// Option-template sweep entry: evaluates the baseline model on a dataset
// converted with an alternative option wording.
struct TemplateRow {
  std::string label;
  std::string path;
};

struct SweepSpec {
  std::vector<SweepRow> rows;
  std::vector<TemplateRow> template_rows;
};

SweepSpec parse_sweep(std::istream& in);
SweepSpec load_sweep(const std::string& path);

struct AblationRow {
  std::string name;
  std::vector<EvalReport> per_seed;
  double mean_overall = 0.0;
};

struct TemplateStats {
  std::string dataset;
  std::vector<std::pair<std::string, double>> per_template;  // label -> accuracy
  double mean = 0.0;
  double stddev = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::vector<TemplateStats> template_stats;
};

// Trains/evaluates one configuration per sweep row with the plan's seeds
// shared across rows; template rows reuse the baseline configuration's model
// and report mean and standard deviation per dataset.
AblationReport ablate(const TrainPlan& plan, const SweepSpec& sweep, const Vocab& vocab);

std::string ablation_table(const AblationReport& report);

TrainPlan apply_overrides(const TrainPlan& plan,
                          const std::map<std::string, std::string>& overrides);

}  // namespace unimc

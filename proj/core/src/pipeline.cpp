#include "unimc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "unimc/errors.hpp"
#include "unimc/ops.hpp"
#include "unimc/optim.hpp"

namespace unimc {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool parse_bool(const std::string& value, std::size_t line) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw DataError(ErrorCode::kBadConfig, "expected on/off, got '" + value + "'", line);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 round
  std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ULL + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

ModelConfig TrainPlan::model_config(int vocab_size) const {
  ModelConfig config = preset_config(preset, vocab_size, max_len);
  if (layers) config.layers = *layers;
  if (hidden) config.hidden = *hidden;
  if (heads) config.heads = *heads;
  if (ffn_multiplier) config.ffn_multiplier = *ffn_multiplier;
  config.share_layer_parameters = share_layer_parameters;
  config.mlm_ratio = mlm_ratio;
  config.ablation = ablation;
  config.validate();
  return config;
}

TrainPlan parse_train_plan(std::istream& in) {
  TrainPlan plan;
  bool seeds_set = false;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw DataError(ErrorCode::kBadConfig, "plan line has no '=': " + stripped,
                      line_number);
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    try {
      if (key == "train") {
        DatasetEntry entry;
        const std::size_t space = value.find(' ');
        entry.path = space == std::string::npos ? value : trim(value.substr(0, space));
        if (space != std::string::npos) {
          const std::string rest = trim(value.substr(space + 1));
          if (rest.rfind("weight=", 0) == 0) entry.weight = std::stod(rest.substr(7));
        }
        plan.train.push_back(entry);
      } else if (key == "eval") {
        plan.eval.push_back(value);
      } else if (key == "per_task_cap") {
        plan.per_task_cap = std::stoi(value);
      } else if (key == "epochs") {
        plan.epochs = std::stoi(value);
      } else if (key == "batch_size") {
        plan.batch_size = std::stoi(value);
      } else if (key == "learning_rate") {
        plan.learning_rate = std::stod(value);
      } else if (key == "warmup_fraction") {
        plan.warmup_fraction = std::stod(value);
      } else if (key == "clip_norm") {
        plan.clip_norm = std::stod(value);
      } else if (key == "seeds") {
        plan.seeds.clear();
        std::istringstream parts(value);
        std::string part;
        while (std::getline(parts, part, ',')) {
          plan.seeds.push_back(std::stoull(trim(part)));
        }
        seeds_set = true;
      } else if (key == "mlm_ratio") {
        plan.mlm_ratio = std::stod(value);
      } else if (key == "max_len") {
        plan.max_len = std::stoi(value);
      } else if (key == "preset") {
        plan.preset = value;
      } else if (key == "layers") {
        plan.layers = std::stoi(value);
      } else if (key == "hidden") {
        plan.hidden = std::stoi(value);
      } else if (key == "heads") {
        plan.heads = std::stoi(value);
      } else if (key == "ffn_multiplier") {
        plan.ffn_multiplier = std::stoi(value);
      } else if (key == "share_layer_parameters") {
        plan.share_layer_parameters = parse_bool(value, line_number);
      } else if (key == "use_id_embeddings") {
        plan.ablation.use_id_embeddings = parse_bool(value, line_number);
      } else if (key == "use_attention_mask") {
        plan.ablation.use_attention_mask = parse_bool(value, line_number);
      } else if (key == "include_question") {
        plan.include_question = parse_bool(value, line_number);
      } else if (key == "w_mlm") {
        plan.loss_weights.mlm = std::stod(value);
      } else if (key == "w_omlm") {
        plan.loss_weights.omlm = std::stod(value);
      } else if (key == "w_op") {
        plan.loss_weights.op = std::stod(value);
      } else {
        throw DataError(ErrorCode::kBadConfig, "unknown plan key '" + key + "'",
                        line_number);
      }
    } catch (const std::invalid_argument&) {
      throw DataError(ErrorCode::kBadConfig, "bad value for '" + key + "': " + value,
                      line_number);
    } catch (const std::out_of_range&) {
      throw DataError(ErrorCode::kBadConfig, "value out of range for '" + key + "'",
                      line_number);
    }
  }
  if (plan.per_task_cap < 1) throw DataError(ErrorCode::kBadConfig, "per_task_cap must be >= 1");
  if (plan.epochs < 1) throw DataError(ErrorCode::kBadConfig, "epochs must be >= 1");
  if (plan.batch_size < 1) throw DataError(ErrorCode::kBadConfig, "batch_size must be >= 1");
  if (plan.seeds.empty()) throw DataError(ErrorCode::kBadConfig, "seeds must be nonempty");
  (void)seeds_set;
  return plan;
}

TrainPlan load_train_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(ErrorCode::kIoError, "cannot read plan " + path);
  return parse_train_plan(in);
}

std::size_t TrainingStream::batch_count() const {
  return (pool_.size() + static_cast<std::size_t>(batch_size_) - 1) /
         static_cast<std::size_t>(batch_size_);
}

TrainingBatch TrainingStream::make_batch(std::size_t index, double mlm_ratio,
                                         std::mt19937_64& rng) const {
  const std::size_t begin = index * static_cast<std::size_t>(batch_size_);
  const std::size_t end = std::min(pool_.size(), begin + static_cast<std::size_t>(batch_size_));
  if (begin >= end) {
    throw DataError(ErrorCode::kEmptyPool, "batch index " + std::to_string(index) +
                                               " out of range");
  }
  std::vector<EncodedInput> masked;
  masked.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    EncodedInput ex = apply_omlm_mask(pool_[i], pool_[i].answer);
    masked.push_back(apply_mlm_mask(ex, mlm_ratio, rng));
  }
  return collate(masked);
}

TrainingStream build_training_stream(const TrainPlan& plan,
                                     const std::vector<std::vector<MCExample>>& datasets,
                                     const Vocab& vocab, std::uint64_t seed) {
  TrainingStream stream;
  stream.batch_size_ = plan.batch_size;
  std::mt19937_64 rng(mix_seed(seed, 0x5354524dULL));

  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const std::vector<MCExample>& dataset = datasets[d];
    if (dataset.empty()) {
      throw DataError(ErrorCode::kEmptyDataset,
                      "training dataset " + std::to_string(d) + " is empty");
    }
    const double weight = d < plan.train.size() ? plan.train[d].weight : 1.0;
    const std::size_t capped =
        std::min(dataset.size(), static_cast<std::size_t>(plan.per_task_cap));
    const std::size_t take = static_cast<std::size_t>(
        std::llround(static_cast<double>(capped) * weight));

    // Uniform sample without replacement; whole extra passes first when the
    // weight pushes past the dataset size.
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < take; ++i) {
      const MCExample& ex = dataset[order[i % order.size()]];
      if (!ex.answer) {
        throw DataError(ErrorCode::kMissingTargets,
                        "training example without an answer in dataset " +
                            ex.source_dataset);
      }
      stream.pool_.push_back(
          assemble(ex, vocab, plan.max_len, plan.include_question));
    }
  }
  if (stream.pool_.empty()) {
    throw DataError(ErrorCode::kEmptyPool, "training pool is empty");
  }
  std::shuffle(stream.pool_.begin(), stream.pool_.end(), rng);
  return stream;
}

std::string train_log_line(const TrainLogEntry& entry) {
  nlohmann::json j;
  j["step"] = entry.step;
  j["l_mlm"] = entry.l_mlm;
  j["l_omlm"] = entry.l_omlm;
  j["l_op"] = entry.l_op;
  j["l_full"] = entry.l_full;
  j["lr"] = entry.learning_rate;
  return j.dump();
}

TrainResult train(const TrainPlan& plan,
                  const std::vector<std::vector<MCExample>>& datasets,
                  const Vocab& vocab, std::uint64_t seed, std::ostream* log_stream) {
  const ModelConfig config = plan.model_config(vocab.size());
  TrainResult result{init_parameters(config, seed), {}};

  AdamOptions opt_options;
  opt_options.clip_norm = plan.clip_norm;
  AdamOptimizer optimizer(result.params, opt_options);

  // Epoch streams share the seed; masking runs off one sequential generator.
  std::vector<TrainingStream> streams;
  long long total_steps = 0;
  for (int e = 0; e < plan.epochs; ++e) {
    streams.push_back(build_training_stream(
        plan, datasets, vocab, mix_seed(seed, static_cast<std::uint64_t>(e))));
    total_steps += static_cast<long long>(streams.back().batch_count());
  }
  std::mt19937_64 mask_rng(mix_seed(seed, 0x6d6c6dULL));

  long long step = 0;
  for (int e = 0; e < plan.epochs; ++e) {
    const TrainingStream& stream = streams[static_cast<std::size_t>(e)];
    for (std::size_t i = 0; i < stream.batch_count(); ++i) {
      ++step;
      const TrainingBatch batch = stream.make_batch(i, plan.mlm_ratio, mask_rng);
      const LossBreakdown loss = total_loss(batch, result.params, plan.loss_weights);
      if (!std::isfinite(loss.l_full)) {
        throw NumericError(ErrorCode::kNonFiniteLoss,
                           "non-finite loss at step " + std::to_string(step) +
                               " (mlm=" + std::to_string(loss.l_mlm) +
                               ", omlm=" + std::to_string(loss.l_omlm) +
                               ", op=" + std::to_string(loss.l_op) + ")");
      }
      backward(loss.node);
      const double lr =
          scheduled_learning_rate(plan.learning_rate, step, total_steps, plan.warmup_fraction);
      optimizer.step(lr);

      TrainLogEntry entry{step, loss.l_mlm, loss.l_omlm, loss.l_op, loss.l_full, lr};
      result.log.push_back(entry);
      if (log_stream) (*log_stream) << train_log_line(entry) << "\n";
    }
  }
  return result;
}

PredictionResult predict(const MCExample& example, const ModelParameters& params,
                         const Vocab& vocab, int max_len, bool include_question) {
  EncodedInput encoded = assemble(example, vocab, max_len, include_question);
  encoded.answer.reset();  // zero-shot: the label is never read
  const TrainingBatch batch = collate({encoded});

  TensorPtr hidden = encode(batch, params);
  TensorPtr logits = vocab_logits(hidden, params);
  TensorPtr dist = op_distribution(logits, batch);

  PredictionResult result;
  result.probabilities = dist->values();
  result.chosen = 0;
  for (std::size_t i = 1; i < result.probabilities.size(); ++i) {
    if (result.probabilities[i] > result.probabilities[static_cast<std::size_t>(result.chosen)]) {
      result.chosen = static_cast<int>(i);
    }
  }
  for (int pos : batch.omask_positions[0]) {
    const double yes = logits->values()[static_cast<std::size_t>(pos) *
                                            static_cast<std::size_t>(params.config.vocab_size) +
                                        special::kYes];
    const double no = logits->values()[static_cast<std::size_t>(pos) *
                                           static_cast<std::size_t>(params.config.vocab_size) +
                                       special::kNo];
    result.per_option_token.push_back(yes >= no ? "yes" : "no");
  }
  return result;
}

EvalReport evaluate(const std::vector<std::pair<std::string, std::vector<MCExample>>>& datasets,
                    const ModelParameters& params, const Vocab& vocab, int max_len,
                    bool include_question, const std::set<std::string>& train_flagged) {
  EvalReport report;
  std::map<std::string, std::pair<double, int>> group_acc;  // sum, count

  for (const auto& [name, examples] : datasets) {
    if (train_flagged.count(name)) {
      throw DataError(ErrorCode::kTrainEvalOverlap,
                      "dataset '" + name + "' is declared as training data");
    }
    if (examples.empty()) {
      throw DataError(ErrorCode::kEmptyDataset, "dataset '" + name + "' has no examples");
    }
    DatasetReport ds;
    ds.name = name;
    ds.group = examples.front().task_group;
    for (const MCExample& ex : examples) {
      if (train_flagged.count(ex.source_dataset)) {
        throw DataError(ErrorCode::kTrainEvalOverlap,
                        "source '" + ex.source_dataset + "' is declared as training data");
      }
      if (!ex.answer) {
        throw DataError(ErrorCode::kMissingTargets,
                        "evaluation example without a label in '" + name + "'");
      }
      const PredictionResult pred = predict(ex, params, vocab, max_len, include_question);
      ++ds.total;
      if (pred.chosen == *ex.answer) ++ds.correct;
    }
    ds.accuracy = static_cast<double>(ds.correct) / static_cast<double>(ds.total);
    auto& [sum, count] = group_acc[task_group_name(ds.group)];
    sum += ds.accuracy;
    ++count;
    report.datasets.push_back(std::move(ds));
  }

  double overall = 0.0;
  for (const auto& [group, acc] : group_acc) {
    const double mean = acc.first / static_cast<double>(acc.second);
    report.group_means.emplace_back(group, mean);
    overall += mean;
  }
  report.overall = overall / static_cast<double>(group_acc.size());
  return report;
}

std::string eval_report_lines(const EvalReport& report) {
  std::ostringstream out;
  for (const DatasetReport& ds : report.datasets) {
    nlohmann::json j;
    j["type"] = "dataset";
    j["name"] = ds.name;
    j["group"] = task_group_name(ds.group);
    j["total"] = ds.total;
    j["correct"] = ds.correct;
    j["accuracy"] = ds.accuracy;
    out << j.dump() << "\n";
  }
  for (const auto& [group, mean] : report.group_means) {
    nlohmann::json j;
    j["type"] = "group";
    j["group"] = group;
    j["mean_accuracy"] = mean;
    out << j.dump() << "\n";
  }
  nlohmann::json j;
  j["type"] = "overall";
  j["mean_accuracy"] = report.overall;
  j["seed"] = report.seed;
  out << j.dump() << "\n";
  return out.str();
}

std::string eval_report_table(const EvalReport& report) {
  std::ostringstream out;
  char line[160];
  out << "dataset                          group      examples  accuracy\n";
  for (const DatasetReport& ds : report.datasets) {
    std::snprintf(line, sizeof(line), "%-32s %-10s %8zu  %8.4f\n", ds.name.c_str(),
                  task_group_name(ds.group), ds.total, ds.accuracy);
    out << line;
  }
  for (const auto& [group, mean] : report.group_means) {
    std::snprintf(line, sizeof(line), "group mean %-21s %19s  %8.4f\n", group.c_str(), "",
                  mean);
    out << line;
  }
  std::snprintf(line, sizeof(line), "overall %52s  %8.4f\n", "", report.overall);
  out << line;
  return out.str();
}

SweepSpec parse_sweep(std::istream& in) {
  SweepSpec spec;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw DataError(ErrorCode::kBadConfig, "sweep line has no '=': " + stripped,
                      line_number);
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key == "row") {
      // row = NAME [: k=v k=v ...]
      SweepRow row;
      const std::size_t colon = value.find(':');
      row.name = trim(colon == std::string::npos ? value : value.substr(0, colon));
      if (row.name.empty()) {
        throw DataError(ErrorCode::kBadConfig, "sweep row without a name", line_number);
      }
      if (colon != std::string::npos) {
        std::istringstream parts(value.substr(colon + 1));
        std::string part;
        while (parts >> part) {
          const std::size_t peq = part.find('=');
          if (peq == std::string::npos) {
            throw DataError(ErrorCode::kBadConfig,
                            "sweep override without '=': " + part, line_number);
          }
          row.overrides[part.substr(0, peq)] = part.substr(peq + 1);
        }
      }
      spec.rows.push_back(std::move(row));
    } else if (key == "template_row") {
      // template_row = LABEL : path
      const std::size_t colon = value.find(':');
      if (colon == std::string::npos) {
        throw DataError(ErrorCode::kBadConfig, "template_row needs 'label : path'",
                        line_number);
      }
      spec.template_rows.push_back(
          {trim(value.substr(0, colon)), trim(value.substr(colon + 1))});
    } else {
      throw DataError(ErrorCode::kBadConfig, "unknown sweep key '" + key + "'",
                      line_number);
    }
  }
  return spec;
}

SweepSpec load_sweep(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(ErrorCode::kIoError, "cannot read sweep " + path);
  return parse_sweep(in);
}

TrainPlan apply_overrides(const TrainPlan& plan,
                          const std::map<std::string, std::string>& overrides) {
  TrainPlan out = plan;
  for (const auto& [key, value] : overrides) {
    if (key == "uie") {
      out.ablation.use_id_embeddings = parse_bool(value, 0);
    } else if (key == "amm") {
      out.ablation.use_attention_mask = parse_bool(value, 0);
    } else if (key == "question") {
      out.include_question = parse_bool(value, 0);
    } else if (key == "preset") {
      out.preset = value;
      out.layers.reset(), out.hidden.reset(), out.heads.reset();
    } else if (key == "epochs") {
      out.epochs = std::stoi(value);
    } else if (key == "mlm_ratio") {
      out.mlm_ratio = std::stod(value);
    } else {
      throw DataError(ErrorCode::kBadConfig, "unknown sweep override '" + key + "'");
    }
  }
  return out;
}

namespace {

std::set<std::string> train_flag_set(const TrainPlan& plan,
                                     const std::vector<std::vector<MCExample>>& train_sets) {
  std::set<std::string> flagged;
  for (const DatasetEntry& entry : plan.train) flagged.insert(entry.path);
  for (const auto& set : train_sets) {
    for (const MCExample& ex : set) flagged.insert(ex.source_dataset);
  }
  return flagged;
}

}  // namespace

AblationReport ablate(const TrainPlan& plan, const SweepSpec& sweep, const Vocab& vocab) {
  AblationReport report;

  std::vector<std::vector<MCExample>> train_sets;
  for (const DatasetEntry& entry : plan.train) {
    train_sets.push_back(read_mc_file(entry.path));
  }
  const std::set<std::string> flagged = train_flag_set(plan, train_sets);

  std::vector<std::pair<std::string, std::vector<MCExample>>> eval_sets;
  for (const std::string& path : plan.eval) {
    eval_sets.emplace_back(path, read_mc_file(path));
  }

  std::vector<SweepRow> rows = sweep.rows;
  if (rows.empty()) rows.push_back({"baseline", {}});

  // Baseline models per seed are reused by the template sweep.
  std::vector<ModelParameters> baseline_models;
  for (const SweepRow& row : rows) {
    const TrainPlan row_plan = apply_overrides(plan, row.overrides);
    AblationRow out_row;
    out_row.name = row.name;
    double sum = 0.0;
    for (std::uint64_t seed : plan.seeds) {
      TrainResult trained = train(row_plan, train_sets, vocab, seed);
      EvalReport eval = evaluate(eval_sets, trained.params, vocab, row_plan.max_len,
                                 row_plan.include_question, flagged);
      eval.seed = seed;
      sum += eval.overall;
      out_row.per_seed.push_back(std::move(eval));
      if (row.overrides.empty()) baseline_models.push_back(std::move(trained.params));
    }
    out_row.mean_overall = sum / static_cast<double>(plan.seeds.size());
    report.rows.push_back(std::move(out_row));
  }

  if (!sweep.template_rows.empty()) {
    if (baseline_models.empty()) {
      const TrainPlan base_plan = plan;
      for (std::uint64_t seed : plan.seeds) {
        baseline_models.push_back(train(base_plan, train_sets, vocab, seed).params);
      }
    }
    // accuracy[source dataset][template label], averaged over seeds
    std::map<std::string, std::vector<std::pair<std::string, double>>> per_dataset;
    for (const TemplateRow& trow : sweep.template_rows) {
      std::vector<std::pair<std::string, std::vector<MCExample>>> sets;
      sets.emplace_back(trow.path, read_mc_file(trow.path));
      double sum = 0.0;
      for (const ModelParameters& model : baseline_models) {
        const EvalReport eval =
            evaluate(sets, model, vocab, plan.max_len, plan.include_question, flagged);
        sum += eval.datasets.front().accuracy;
      }
      const double acc = sum / static_cast<double>(baseline_models.size());
      const std::string dataset_key = sets.front().second.front().source_dataset;
      per_dataset[dataset_key].emplace_back(trow.label, acc);
    }
    for (auto& [dataset, entries] : per_dataset) {
      if (entries.empty()) continue;
      TemplateStats stats;
      stats.dataset = dataset;
      stats.per_template = entries;
      double mean = 0.0;
      for (const auto& [label, acc] : entries) mean += acc;
      mean /= static_cast<double>(entries.size());
      double var = 0.0;
      for (const auto& [label, acc] : entries) var += (acc - mean) * (acc - mean);
      var /= static_cast<double>(entries.size());
      stats.mean = mean;
      stats.stddev = std::sqrt(var);
      report.template_stats.push_back(std::move(stats));
    }
  }
  return report;
}

std::string ablation_table(const AblationReport& report) {
  std::ostringstream out;
  char line[200];
  if (!report.rows.empty()) {
    out << "configuration                    mean overall accuracy\n";
    for (const AblationRow& row : report.rows) {
      std::snprintf(line, sizeof(line), "%-32s %8.4f\n", row.name.c_str(),
                    row.mean_overall);
      out << line;
      for (const EvalReport& eval : row.per_seed) {
        std::snprintf(line, sizeof(line), "  seed %-10llu overall %8.4f\n",
                      static_cast<unsigned long long>(eval.seed), eval.overall);
        out << line;
      }
    }
  }
  if (!report.template_stats.empty()) {
    out << "option-template sweep (accuracy per wording, mean, std)\n";
    for (const TemplateStats& stats : report.template_stats) {
      out << stats.dataset << "\n";
      for (const auto& [label, acc] : stats.per_template) {
        std::snprintf(line, sizeof(line), "  %-24s %8.4f\n", label.c_str(), acc);
        out << line;
      }
      std::snprintf(line, sizeof(line), "  mean %8.4f  std %8.4f\n", stats.mean,
                    stats.stddev);
      out << line;
    }
  }
  return out.str();
}

}  // namespace unimc

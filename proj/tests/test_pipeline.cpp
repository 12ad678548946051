#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "unimc/checkpoint.hpp"
#include "unimc/errors.hpp"
#include "unimc/pipeline.hpp"
#include "unimc/synthetic.hpp"

using namespace unimc;

namespace {

// Small copy-task corpus for fast training tests.
struct CopyFixture {
  std::vector<MCExample> train;
  std::vector<MCExample> heldout;
  Vocab vocab;
  TrainPlan plan;

  explicit CopyFixture(int train_count = 320, int heldout_count = 64) {
    SyntheticSpec spec;
    spec.copy_train = train_count;
    spec.nli_train = 0;
    spec.topic_train = 0;
    spec.copy_heldout = heldout_count;
    spec.nli_transfer = 0;
    spec.topic_transfer = 0;
    spec.seed = 77;
    SyntheticCurriculum curriculum = make_synthetic_curriculum(spec);
    train = std::move(curriculum.copy_train);
    heldout = std::move(curriculum.copy_heldout);
    vocab = build_vocab(curriculum.corpus, 512);

    plan.train = {{"copy", 1.0}};
    plan.per_task_cap = 20000;
    plan.batch_size = 16;
    plan.epochs = 1;
    plan.learning_rate = 1e-3;
    plan.max_len = 48;
    plan.preset = "toy";
    plan.seeds = {11};
  }
};

}  // namespace

TEST_CASE("plan files parse with defaults and validation") {
  std::istringstream in(
      "# plan\n"
      "train = a.mc.jsonl\n"
      "train = b.mc.jsonl weight=2\n"
      "eval = c.mc.jsonl\n"
      "seeds = 3,5\n"
      "batch_size = 8\n"
      "use_attention_mask = off\n");
  const TrainPlan plan = parse_train_plan(in);
  REQUIRE(plan.train.size() == 2);
  CHECK(plan.train[1].weight == 2.0);
  CHECK(plan.eval == std::vector<std::string>{"c.mc.jsonl"});
  CHECK(plan.seeds == std::vector<std::uint64_t>{3, 5});
  CHECK(plan.batch_size == 8);
  CHECK_FALSE(plan.ablation.use_attention_mask);
  CHECK(plan.per_task_cap == 20000);
  CHECK(plan.epochs == 1);
  CHECK(plan.mlm_ratio == 0.15);

  std::istringstream bad("unknown_key = 1\n");
  CHECK_THROWS_AS(parse_train_plan(bad), DataError);
  std::istringstream no_seeds("seeds =\n");
  CHECK_THROWS_AS(parse_train_plan(no_seeds), DataError);
}

TEST_CASE("per-task cap limits each task's contribution") {
  std::mt19937_64 rng(5);
  std::vector<MCExample> big, small;
  for (int i = 0; i < 30; ++i) big.push_back(testing::random_example(rng));
  for (int i = 0; i < 5; ++i) small.push_back(testing::random_example(rng));
  const Vocab vocab = testing::vocab_for(big, 512);

  TrainPlan plan;
  plan.per_task_cap = 20;
  plan.batch_size = 4;
  plan.max_len = 128;
  const TrainingStream stream = build_training_stream(plan, {big, small}, vocab, 1);
  CHECK(stream.example_count() == 25);  // min(30,20) + min(5,20)
  CHECK(stream.batch_count() == 7);     // ceil(25/4)
}

TEST_CASE("training stream is deterministic per seed and mixes tasks") {
  std::mt19937_64 rng(6);
  std::vector<MCExample> twos, fives;
  for (int i = 0; i < 40; ++i) twos.push_back(testing::random_example(rng, 2, 2));
  for (int i = 0; i < 40; ++i) fives.push_back(testing::random_example(rng, 5, 5));
  std::vector<MCExample> all = twos;
  all.insert(all.end(), fives.begin(), fives.end());
  const Vocab vocab = testing::vocab_for(all, 512);

  TrainPlan plan;
  plan.batch_size = 8;
  plan.max_len = 160;
  const TrainingStream a = build_training_stream(plan, {twos, fives}, vocab, 9);
  const TrainingStream b = build_training_stream(plan, {twos, fives}, vocab, 9);
  REQUIRE(a.example_count() == b.example_count());

  std::mt19937_64 mask_a(1), mask_b(1);
  bool saw_mixed = false;
  for (std::size_t i = 0; i < a.batch_count(); ++i) {
    const TrainingBatch ba = a.make_batch(i, 0.15, mask_a);
    const TrainingBatch bb = b.make_batch(i, 0.15, mask_b);
    CHECK(ba.token_ids == bb.token_ids);  // same seed, same batches
    bool has2 = false, has5 = false;
    for (int count : ba.option_counts) {
      has2 |= count == 2;
      has5 |= count == 5;
    }
    saw_mixed |= has2 && has5;
  }
  CHECK(saw_mixed);  // the global shuffle mixes option counts inside batches

  const TrainingStream c = build_training_stream(plan, {twos, fives}, vocab, 10);
  std::mt19937_64 mask_c(1);
  bool identical = true;
  for (std::size_t i = 0; i < std::min(a.batch_count(), c.batch_count()); ++i) {
    identical &= a.make_batch(i, 0.0, mask_a).token_ids ==
                 c.make_batch(i, 0.0, mask_c).token_ids;
  }
  CHECK_FALSE(identical);  // a different seed reorders the pool
}

TEST_CASE("training stream rejects unlabeled examples and empty pools") {
  std::mt19937_64 rng(7);
  MCExample unlabeled = testing::random_example(rng);
  unlabeled.answer.reset();
  const Vocab vocab = testing::vocab_for({unlabeled}, 128);
  TrainPlan plan;
  plan.max_len = 128;
  CHECK_THROWS_AS(build_training_stream(plan, {{unlabeled}}, vocab, 1), DataError);
  CHECK_THROWS_AS(build_training_stream(plan, {}, vocab, 1), DataError);
}

TEST_CASE("zero learning rate leaves parameters bit-exact") {
  CopyFixture fx(64, 0);
  fx.plan.learning_rate = 0.0;
  const ModelConfig config = fx.plan.model_config(fx.vocab.size());
  const ModelParameters init = init_parameters(config, 11);
  const TrainResult result = train(fx.plan, {fx.train}, fx.vocab, 11);
  for (const auto& [name, tensor] : init.named) {
    CHECK(result.params.named.at(name)->values() == tensor->values());
  }
}

TEST_CASE("same seed, same data: identical checkpoints and logs") {
  CopyFixture fx(96, 0);
  std::ostringstream log_a, log_b;
  const TrainResult a = train(fx.plan, {fx.train}, fx.vocab, 21, &log_a);
  const TrainResult b = train(fx.plan, {fx.train}, fx.vocab, 21, &log_b);
  CHECK(log_a.str() == log_b.str());
  for (const auto& [name, tensor] : a.params.named) {
    CHECK(b.params.named.at(name)->values() == tensor->values());
  }
}

TEST_CASE("200 steps on the copy task drive the OP loss under ln(2)/2") {
  CopyFixture fx(3200, 0);
  fx.plan.epochs = 1;
  const TrainResult result = train(fx.plan, {fx.train}, fx.vocab, 31);
  REQUIRE(result.log.size() >= 200);
  CHECK(result.log[199].l_op < std::log(2.0) / 2.0);
}

TEST_CASE("predict yields a valid deterministic distribution, ties at low index") {
  std::mt19937_64 rng(8);
  const MCExample ex = testing::random_example(rng, 4, 4);
  const Vocab vocab = testing::vocab_for({ex});
  ModelConfig config = preset_config("toy", vocab.size(), 128);
  const ModelParameters params = init_parameters(config, 77);

  const PredictionResult first = predict(ex, params, vocab, 128);
  const PredictionResult second = predict(ex, params, vocab, 128);
  REQUIRE(first.probabilities.size() == 4);
  CHECK(first.probabilities == second.probabilities);
  CHECK(first.chosen == second.chosen);
  double sum = 0.0;
  int argmax = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    sum += first.probabilities[i];
    if (first.probabilities[i] > first.probabilities[static_cast<std::size_t>(argmax)]) {
      argmax = static_cast<int>(i);
    }
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(first.chosen == argmax);
  REQUIRE(first.per_option_token.size() == 4);
  for (const std::string& tok : first.per_option_token) {
    CHECK((tok == "yes" || tok == "no"));
  }

  SUBCASE("an exact tie resolves to the lowest index") {
    // Identical option texts would be invalid; instead check the rule on the
    // distribution directly by feeding a duplicated-probability case.
    MCExample pair = ex;
    pair.options = {ex.options[0], ex.options[1]};
    pair.answer = 0;
    // With use_id_embeddings and the attention mask, two identical-content
    // options would tie exactly; over distinct options we only assert the
    // argmax rule above.
    const PredictionResult p = predict(pair, params, vocab, 128);
    CHECK(p.chosen >= 0);
    CHECK(p.chosen < 2);
  }

  SUBCASE("permuting options permutes probabilities and maps the choice") {
    MCExample permuted = ex;
    std::vector<std::size_t> perm = {2, 0, 3, 1};
    for (std::size_t i = 0; i < 4; ++i) permuted.options[i] = ex.options[perm[i]];
    const PredictionResult p = predict(permuted, params, vocab, 128);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(p.probabilities[i] ==
            doctest::Approx(first.probabilities[perm[i]]).epsilon(1e-9));
    }
    CHECK(static_cast<int>(perm[static_cast<std::size_t>(p.chosen)]) == first.chosen);
  }
}

TEST_CASE("evaluate aggregates per dataset, group, and overall") {
  // Synthetic reports with known correctness patterns drive the arithmetic:
  // group means {0.8, 0.6} -> 0.7 and {0.9}, overall (0.7 + 0.9) / 2 = 0.8.
  std::mt19937_64 rng(9);
  CopyFixture fx(64, 0);
  const TrainResult trained = train(fx.plan, {fx.train}, fx.vocab, 3);

  // Build datasets whose accuracy is forced by setting answers to the model's
  // own prediction (accuracy 1) or away from it (accuracy 0), in a ratio that
  // lands on the wanted dataset accuracies.
  auto forced_dataset = [&](TaskGroup group, const std::string& name, int total,
                            int correct) {
    std::vector<MCExample> out;
    for (int i = 0; i < total; ++i) {
      MCExample ex = testing::random_example(rng, 2, 2);
      ex.task_group = group;
      ex.source_dataset = name;
      const PredictionResult pred = predict(ex, trained.params, fx.vocab, fx.plan.max_len);
      ex.answer = i < correct ? pred.chosen : 1 - pred.chosen;
      out.push_back(ex);
    }
    return out;
  };

  std::vector<std::pair<std::string, std::vector<MCExample>>> datasets;
  datasets.emplace_back("nli_a", forced_dataset(TaskGroup::kNli3, "nli_a", 10, 8));
  datasets.emplace_back("nli_b", forced_dataset(TaskGroup::kNli3, "nli_b", 10, 6));
  datasets.emplace_back("senti", forced_dataset(TaskGroup::kSentiment, "senti", 10, 9));

  const EvalReport report =
      evaluate(datasets, trained.params, fx.vocab, fx.plan.max_len);
  REQUIRE(report.datasets.size() == 3);
  CHECK(report.datasets[0].accuracy == doctest::Approx(0.8));
  CHECK(report.datasets[1].accuracy == doctest::Approx(0.6));
  CHECK(report.datasets[2].accuracy == doctest::Approx(0.9));
  CHECK(report.overall == doctest::Approx(0.8).epsilon(1e-12));

  SUBCASE("an all-correct toy set scores 1.0") {
    std::vector<std::pair<std::string, std::vector<MCExample>>> perfect;
    perfect.emplace_back("easy", forced_dataset(TaskGroup::kTopic, "easy", 8, 8));
    const EvalReport r = evaluate(perfect, trained.params, fx.vocab, fx.plan.max_len);
    CHECK(r.overall == 1.0);
  }

  SUBCASE("zero-example datasets are an error") {
    std::vector<std::pair<std::string, std::vector<MCExample>>> empty;
    empty.emplace_back("none", std::vector<MCExample>{});
    CHECK_THROWS_AS(evaluate(empty, trained.params, fx.vocab, fx.plan.max_len),
                    DataError);
  }

  SUBCASE("train-flagged datasets are refused") {
    CHECK_THROWS_AS(evaluate(datasets, trained.params, fx.vocab, fx.plan.max_len, true,
                             {"nli_b"}),
                    DataError);
  }

  SUBCASE("report rendering is stable") {
    const std::string lines = eval_report_lines(report);
    CHECK(lines.find("\"type\":\"overall\"") != std::string::npos);
    const std::string table = eval_report_table(report);
    CHECK(table.find("overall") != std::string::npos);
  }
}

TEST_CASE("random-guess baseline sits near 1/k on balanced data") {
  // Monte-Carlo with the seeded predictor: an untrained model on balanced
  // two-option data scores within binomial noise of 1/2.
  std::mt19937_64 rng(10);
  CopyFixture fx(16, 0);
  const ModelConfig config = fx.plan.model_config(fx.vocab.size());
  const ModelParameters params = init_parameters(config, 123);

  int correct = 0;
  const int n = 300;
  for (int i = 0; i < n; ++i) {
    MCExample ex = testing::random_example(rng, 2, 2);
    std::uniform_int_distribution<int> coin(0, 1);
    ex.answer = coin(rng);
    const PredictionResult pred = predict(ex, params, fx.vocab, fx.plan.max_len);
    correct += pred.chosen == *ex.answer;
  }
  const double acc = static_cast<double>(correct) / n;
  CHECK(acc > 0.5 - 5.0 * 0.5 / std::sqrt(n));  // five sigma
  CHECK(acc < 0.5 + 5.0 * 0.5 / std::sqrt(n));
}

TEST_CASE("sweep files parse rows and template rows") {
  std::istringstream in(
      "row = baseline\n"
      "row = no_amm : amm=off\n"
      "row = bare : amm=off uie=off\n"
      "template_row = great_terrible : path/a.mc.jsonl\n");
  const SweepSpec spec = parse_sweep(in);
  REQUIRE(spec.rows.size() == 3);
  CHECK(spec.rows[0].overrides.empty());
  CHECK(spec.rows[1].overrides.at("amm") == "off");
  CHECK(spec.rows[2].overrides.size() == 2);
  REQUIRE(spec.template_rows.size() == 1);
  CHECK(spec.template_rows[0].label == "great_terrible");
  CHECK(spec.template_rows[0].path == "path/a.mc.jsonl");

  const TrainPlan plan;
  const TrainPlan no_amm = apply_overrides(plan, spec.rows[1].overrides);
  CHECK_FALSE(no_amm.ablation.use_attention_mask);
  CHECK(no_amm.ablation.use_id_embeddings);
}

TEST_CASE("synthetic curriculum is deterministic and validated") {
  SyntheticSpec spec;
  spec.copy_train = 50;
  spec.nli_train = 50;
  spec.topic_train = 50;
  spec.copy_heldout = 10;
  spec.nli_transfer = 10;
  spec.topic_transfer = 10;
  const SyntheticCurriculum a = make_synthetic_curriculum(spec);
  const SyntheticCurriculum b = make_synthetic_curriculum(spec);
  CHECK(a.copy_train == b.copy_train);
  CHECK(a.nli_transfer == b.nli_transfer);
  CHECK(a.corpus == b.corpus);
  for (const auto* set :
       {&a.copy_train, &a.nli_train, &a.topic_train, &a.copy_heldout, &a.nli_transfer,
        &a.topic_transfer}) {
    for (const MCExample& ex : *set) validate_example(ex);
  }
  // Transfer wording differs from the training wording.
  CHECK(a.nli_train.front().template_id != a.nli_transfer.front().template_id);
  // Labels are reasonably balanced.
  std::vector<int> counts(3, 0);
  for (const MCExample& ex : a.nli_train) ++counts[static_cast<std::size_t>(*ex.answer)];
  for (int c : counts) CHECK(c > 5);
}

// unimc: convert label-based task records into the unified multiple-choice
// format, build vocabularies, run MC training, and do zero-shot prediction,
// evaluation, and ablation sweeps.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "unimc/checkpoint.hpp"
#include "unimc/errors.hpp"
#include "unimc/mc_format.hpp"
#include "unimc/pipeline.hpp"
#include "unimc/selfcheck.hpp"
#include "unimc/tokenizer.hpp"

namespace {

using namespace unimc;

struct ConvertArgs {
  std::string in, out, task, template_id, schema, dataset;
  bool no_question = false;
};

int run_convert(const ConvertArgs& args) {
  SchemaMap schema;
  if (!args.schema.empty()) schema = load_schema_map(args.schema);
  const TaskGroup group = task_group_from_name(args.task);
  const std::string dataset_name =
      args.dataset.empty() ? std::filesystem::path(args.in).stem().string() : args.dataset;

  std::ifstream in(args.in);
  if (!in) throw DataError(ErrorCode::kIoError, "cannot read " + args.in);
  const std::vector<RawRecord> records = parse_dataset(in, group, schema, dataset_name);

  std::vector<MCExample> examples;
  examples.reserve(records.size());
  if (group == TaskGroup::kNativeMc) {
    for (const RawRecord& record : records) {
      examples.push_back(passthrough_mc(record));
      validate_example(examples.back());
    }
  } else {
    if (args.template_id.empty()) {
      throw DataError(ErrorCode::kBadConfig,
                      "--template is required for task group " + args.task);
    }
    const PromptTemplate& tmpl = get_template(args.template_id);
    for (const RawRecord& record : records) {
      examples.push_back(convert(record, tmpl, !args.no_question));
      validate_example(examples.back());
    }
  }
  write_mc_file(args.out, examples);
  std::cout << "wrote " << examples.size() << " examples to " << args.out << "\n";
  return 0;
}

std::vector<std::pair<std::string, std::vector<MCExample>>> load_eval_sets(
    const std::vector<std::string>& paths) {
  std::vector<std::pair<std::string, std::vector<MCExample>>> sets;
  for (const std::string& path : paths) sets.emplace_back(path, read_mc_file(path));
  return sets;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unified multiple-choice zero-shot toolkit"};
  app.require_subcommand(1);

  // convert
  ConvertArgs convert_args;
  CLI::App* cmd_convert =
      app.add_subcommand("convert", "Convert raw task records to unified MC format");
  cmd_convert->add_option("--in", convert_args.in, "Input line-delimited records")->required();
  cmd_convert->add_option("--out", convert_args.out, "Output .mc.jsonl file")->required();
  cmd_convert
      ->add_option("--task", convert_args.task,
                   "Task group: nli3, nli2, sentiment, topic, native_mc")
      ->required();
  cmd_convert->add_option("--template", convert_args.template_id,
                          "Prompt template id (see README; unused for native_mc)");
  cmd_convert->add_option("--schema", convert_args.schema,
                          "Schema map file (key=value field and value: remaps)");
  cmd_convert->add_option("--dataset", convert_args.dataset,
                          "Source dataset name (default: input file stem)");
  cmd_convert->add_flag("--no-question", convert_args.no_question,
                        "Drop the question prompt");

  // build-vocab
  std::string vocab_in, vocab_out;
  int vocab_size = 4096;
  CLI::App* cmd_vocab = app.add_subcommand("build-vocab", "Build a word-level vocabulary");
  cmd_vocab->add_option("--in", vocab_in, "Corpus text file")->required();
  cmd_vocab->add_option("--out", vocab_out, "Vocabulary file")->required();
  cmd_vocab->add_option("--size", vocab_size, "Target vocabulary size (default 4096)");

  // train
  std::string train_plan_path, train_vocab, train_out, train_log;
  std::uint64_t train_seed = 0;
  bool train_seed_set = false;
  int train_epochs = -1, train_cap = -1, train_max_len = -1;
  double train_mlm_ratio = -1.0;
  bool no_uie = false, no_amm = false, no_question = false;
  CLI::App* cmd_train = app.add_subcommand("train", "Run MC training from a plan file");
  cmd_train->add_option("--plan", train_plan_path, "Train plan file")->required();
  cmd_train->add_option("--vocab", train_vocab, "Vocabulary file")->required();
  cmd_train->add_option("--out", train_out, "Checkpoint output path")->required();
  cmd_train->add_option("--log", train_log, "Training log output (JSON lines)");
  cmd_train->add_option("--seed", train_seed, "Seed override (default: plan's first seed)")
      ->each([&](const std::string&) { train_seed_set = true; });
  cmd_train->add_option("--epochs", train_epochs, "Epoch override (default 1)");
  cmd_train->add_option("--cap", train_cap, "Per-task example cap override (default 20000)");
  cmd_train->add_option("--max-len", train_max_len, "Maximum sequence length (default 512)");
  cmd_train->add_option("--mlm-ratio", train_mlm_ratio, "Passage masking ratio (default 0.15)");
  cmd_train->add_flag("--no-uie", no_uie, "Disable segment/position id embeddings");
  cmd_train->add_flag("--no-amm", no_amm, "Disable the cross-option attention mask");
  cmd_train->add_flag("--no-question", no_question, "Drop question prompts when encoding");

  // eval
  std::string eval_model, eval_vocab, eval_plan_path, eval_out;
  std::vector<std::string> eval_in;
  int eval_max_len = -1;
  bool eval_no_question = false;
  CLI::App* cmd_eval = app.add_subcommand("eval", "Zero-shot evaluation of labeled MC files");
  cmd_eval->add_option("--model", eval_model, "Checkpoint path")->required();
  cmd_eval->add_option("--vocab", eval_vocab, "Vocabulary file")->required();
  cmd_eval->add_option("--in", eval_in, "Labeled .mc.jsonl files")->expected(-1);
  cmd_eval->add_option("--plan", eval_plan_path,
                       "Plan file naming eval sets and train-flagged data");
  cmd_eval->add_option("--out", eval_out, "Report output path (JSON lines)");
  cmd_eval->add_option("--max-len", eval_max_len, "Maximum sequence length (default 512)");
  cmd_eval->add_flag("--no-question", eval_no_question, "Drop question prompts");

  // predict
  std::string pred_model, pred_vocab, pred_in, pred_out;
  int pred_max_len = 512;
  bool pred_no_question = false;
  CLI::App* cmd_predict = app.add_subcommand("predict", "Zero-shot prediction on MC files");
  cmd_predict->add_option("--model", pred_model, "Checkpoint path")->required();
  cmd_predict->add_option("--vocab", pred_vocab, "Vocabulary file")->required();
  cmd_predict->add_option("--in", pred_in, "Input .mc.jsonl file")->required();
  cmd_predict->add_option("--out", pred_out, "Output path (default stdout)");
  cmd_predict->add_option("--max-len", pred_max_len, "Maximum sequence length (default 512)");
  cmd_predict->add_flag("--no-question", pred_no_question, "Drop question prompts");

  // ablate
  std::string abl_plan_path, abl_sweep_path, abl_vocab, abl_out;
  CLI::App* cmd_ablate = app.add_subcommand(
      "ablate", "Train/evaluate a sweep of configurations from a manifest");
  cmd_ablate->add_option("--plan", abl_plan_path, "Train plan file")->required();
  cmd_ablate->add_option("--sweep", abl_sweep_path, "Sweep manifest file")->required();
  cmd_ablate->add_option("--vocab", abl_vocab, "Vocabulary file")->required();
  cmd_ablate->add_option("--out", abl_out, "Report output path");

  // selfcheck
  std::uint64_t selfcheck_seed = 7;
  CLI::App* cmd_selfcheck =
      app.add_subcommand("selfcheck", "Run the built-in gradient and mask property suite");
  cmd_selfcheck->add_option("--seed", selfcheck_seed, "Seed for the property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*cmd_convert) return run_convert(convert_args);

    if (*cmd_vocab) {
      std::ifstream in(vocab_in);
      if (!in) throw DataError(ErrorCode::kIoError, "cannot read " + vocab_in);
      const Vocab vocab = build_vocab(in, vocab_size);
      vocab.save_file(vocab_out);
      std::cout << "wrote vocabulary of " << vocab.size() << " tokens to " << vocab_out
                << "\n";
      return 0;
    }

    if (*cmd_train) {
      TrainPlan plan = load_train_plan(train_plan_path);
      if (train_epochs > 0) plan.epochs = train_epochs;
      if (train_cap > 0) plan.per_task_cap = train_cap;
      if (train_max_len > 0) plan.max_len = train_max_len;
      if (train_mlm_ratio >= 0.0) plan.mlm_ratio = train_mlm_ratio;
      if (no_uie) plan.ablation.use_id_embeddings = false;
      if (no_amm) plan.ablation.use_attention_mask = false;
      if (no_question) plan.include_question = false;
      const std::uint64_t seed = train_seed_set ? train_seed : plan.seeds.front();

      const Vocab vocab = Vocab::load_file(train_vocab);
      std::vector<std::vector<MCExample>> datasets;
      for (const DatasetEntry& entry : plan.train) {
        datasets.push_back(read_mc_file(entry.path));
      }
      std::ofstream log_file;
      std::ostream* log_stream = nullptr;
      if (!train_log.empty()) {
        log_file.open(train_log, std::ios::binary | std::ios::trunc);
        if (!log_file) throw DataError(ErrorCode::kIoError, "cannot write " + train_log);
        log_stream = &log_file;
      }
      const TrainResult result = train(plan, datasets, vocab, seed, log_stream);
      save_checkpoint(result.params, train_out);
      std::cout << "trained " << result.log.size() << " steps (seed " << seed
                << "), final l_full "
                << (result.log.empty() ? 0.0 : result.log.back().l_full) << ", saved "
                << train_out << "\n";
      return 0;
    }

    if (*cmd_eval) {
      const Vocab vocab = Vocab::load_file(eval_vocab);
      const ModelParameters params = load_checkpoint(eval_model);
      std::set<std::string> train_flagged;
      std::vector<std::string> paths = eval_in;
      int max_len = eval_max_len > 0 ? eval_max_len : 512;
      bool include_question = !eval_no_question;
      if (!eval_plan_path.empty()) {
        const TrainPlan plan = load_train_plan(eval_plan_path);
        for (const DatasetEntry& entry : plan.train) {
          train_flagged.insert(entry.path);
          for (const MCExample& ex : read_mc_file(entry.path)) {
            train_flagged.insert(ex.source_dataset);
          }
        }
        if (paths.empty()) paths = plan.eval;
        if (eval_max_len <= 0) max_len = plan.max_len;
        include_question = include_question && plan.include_question;
      }
      if (paths.empty()) {
        throw DataError(ErrorCode::kBadConfig, "no eval datasets (--in or --plan)");
      }
      EvalReport report = evaluate(load_eval_sets(paths), params, vocab, max_len,
                                   include_question, train_flagged);
      std::cout << eval_report_table(report);
      if (!eval_out.empty()) {
        std::ofstream out(eval_out, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError(ErrorCode::kIoError, "cannot write " + eval_out);
        out << eval_report_lines(report);
      }
      return 0;
    }

    if (*cmd_predict) {
      const Vocab vocab = Vocab::load_file(pred_vocab);
      const ModelParameters params = load_checkpoint(pred_model);
      const std::vector<MCExample> examples = read_mc_file(pred_in);
      std::ofstream file;
      std::ostream* out = &std::cout;
      if (!pred_out.empty()) {
        file.open(pred_out, std::ios::binary | std::ios::trunc);
        if (!file) throw DataError(ErrorCode::kIoError, "cannot write " + pred_out);
        out = &file;
      }
      for (const MCExample& ex : examples) {
        const PredictionResult result =
            predict(ex, params, vocab, pred_max_len, !pred_no_question);
        nlohmann::json j;
        j["chosen"] = result.chosen;
        j["chosen_option"] = ex.options[static_cast<std::size_t>(result.chosen)];
        j["probabilities"] = result.probabilities;
        j["per_option_token"] = result.per_option_token;
        (*out) << j.dump() << "\n";
      }
      return 0;
    }

    if (*cmd_ablate) {
      const TrainPlan plan = load_train_plan(abl_plan_path);
      const SweepSpec sweep = load_sweep(abl_sweep_path);
      const Vocab vocab = Vocab::load_file(abl_vocab);
      const AblationReport report = ablate(plan, sweep, vocab);
      const std::string table = ablation_table(report);
      std::cout << table;
      if (!abl_out.empty()) {
        std::ofstream out(abl_out, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError(ErrorCode::kIoError, "cannot write " + abl_out);
        out << table;
      }
      return 0;
    }

    if (*cmd_selfcheck) {
      return run_selfcheck(std::cout, selfcheck_seed) ? 0 : 3;
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

#include "unimc/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "unimc/errors.hpp"

namespace unimc {

namespace {

// Generic filler words. Every word of the reworded eval templates appears
// here, so transfer wordings are in-vocabulary and trained in filler roles.
const std::vector<std::string> kFillers = {
    "about",  "according", "after",  "almost",  "always", "and",    "appears",
    "at",     "base",      "before", "both",    "but",    "by",     "can",
    "clearly", "day",      "down",   "each",    "evening", "few",   "finally",
    "for",    "from",      "here",   "in",      "infer",  "is",     "it",
    "just",   "later",     "looks",  "morning", "name",   "near",   "not",
    "now",    "of",        "often",  "on",      "once",   "one",    "only",
    "option", "over",      "paragraph", "passage", "people", "quite", "rather",
    "report", "said",      "says",   "short",   "slowly", "so",     "some",
    "soon",   "story",     "subject", "talks",  "text",   "that",   "the",
    "then",   "there",     "this",   "to",      "today",  "topic",  "under",
    "up",     "us",        "very",   "we",      "what",   "which",  "while",
    "with",   "yesterday", "difficult"};

const std::vector<std::string> kNouns = {
    "dog",  "cat",  "bird",  "horse", "fish",  "cow",   "fox",   "bear",
    "lion", "wolf", "ship",  "truck", "plane", "bike",  "house", "tree",
    "river", "stone", "cloud", "lamp"};

const std::vector<std::string> kAttributes = {
    "red",  "blue",   "green", "yellow", "black", "white",
    "brown", "purple", "orange", "pink",  "golden", "silver"};

const std::vector<std::vector<std::string>> kTopicPools = {
    {"sports", "football", "tennis", "match", "coach", "stadium", "goal", "race"},
    {"music", "song", "guitar", "band", "concert", "drum", "melody", "singer"},
    {"weather", "rain", "snow", "storm", "wind", "sunny", "cloudy", "thunder"},
    {"food", "bread", "cheese", "soup", "dinner", "kitchen", "meal", "butter"}};

constexpr const char* kCopyQuestion = "which option appears in the passage?";

template <typename T>
const T& pick(const std::vector<T>& pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, pool.size() - 1);
  return pool[dist(rng)];
}

int pick_index(int bound, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dist(0, bound - 1);
  return dist(rng);
}

std::string filler_phrase(int words, std::mt19937_64& rng) {
  std::string out;
  for (int i = 0; i < words; ++i) {
    if (!out.empty()) out += " ";
    out += pick(kFillers, rng);
  }
  return out;
}

// Copy task: two 2-word option phrases, the correct one embedded verbatim in
// a filler passage, the distractor's words absent.
MCExample make_copy_example(std::mt19937_64& rng, const std::string& source) {
  const std::string& noun_a = pick(kNouns, rng);
  const std::string& attr_a = pick(kAttributes, rng);
  std::string noun_b = pick(kNouns, rng);
  std::string attr_b = pick(kAttributes, rng);
  while (noun_b == noun_a) noun_b = pick(kNouns, rng);
  while (attr_b == attr_a) attr_b = pick(kAttributes, rng);

  const std::string phrase_a = attr_a + " " + noun_a;
  const std::string phrase_b = attr_b + " " + noun_b;
  const int answer = pick_index(2, rng);
  const std::string& present = answer == 0 ? phrase_a : phrase_b;

  std::string passage = filler_phrase(2 + pick_index(4, rng), rng);
  passage += " " + present + " " + filler_phrase(2 + pick_index(4, rng), rng);

  RawRecord record;
  record.task_group = TaskGroup::kNativeMc;
  record.source_dataset = source;
  record.fields["x1"] = passage;
  record.fields["question"] = kCopyQuestion;
  record.options = {phrase_a, phrase_b};
  record.answer_index = answer;
  return passthrough_mc(record);
}

// NLI task: label 0 repeats the premise core, 1 negates it, 2 moves to an
// unrelated subject.
MCExample make_nli_example(std::mt19937_64& rng, const PromptTemplate& tmpl,
                           const std::string& source) {
  const std::string& noun = pick(kNouns, rng);
  const std::string& attr = pick(kAttributes, rng);
  const std::string core = "the " + noun + " is " + attr;

  const int label = pick_index(3, rng);
  std::string hypothesis;
  if (label == 0) {
    hypothesis = core;
  } else if (label == 1) {
    hypothesis = "the " + noun + " is not " + attr;
  } else {
    std::string other_noun = pick(kNouns, rng);
    std::string other_attr = pick(kAttributes, rng);
    while (other_noun == noun) other_noun = pick(kNouns, rng);
    while (other_attr == attr) other_attr = pick(kAttributes, rng);
    hypothesis = "the " + other_noun + " is " + other_attr;
  }

  RawRecord record;
  record.task_group = TaskGroup::kNli3;
  record.source_dataset = source;
  record.fields["x1"] = filler_phrase(1 + pick_index(3, rng), rng) + " " + core + " " +
                        filler_phrase(1 + pick_index(3, rng), rng);
  record.fields["x2"] = hypothesis;
  record.answer_index = label;
  return convert_nli(record, tmpl, /*include_question=*/true);
}

// Topic task: the passage carries three keywords from the class pool.
MCExample make_topic_example(std::mt19937_64& rng, const PromptTemplate& tmpl,
                             const std::string& source) {
  const int label = pick_index(static_cast<int>(kTopicPools.size()), rng);
  const std::vector<std::string>& pool = kTopicPools[static_cast<std::size_t>(label)];

  std::string passage = filler_phrase(1 + pick_index(3, rng), rng);
  for (int k = 0; k < 3; ++k) {
    passage += " " + pick(pool, rng) + " " + filler_phrase(1 + pick_index(2, rng), rng);
  }

  RawRecord record;
  record.task_group = TaskGroup::kTopic;
  record.source_dataset = source;
  record.fields["x"] = passage;
  record.answer_index = label;
  return convert_topic(record, tmpl, /*include_question=*/true);
}

void append_text(std::ostringstream& corpus, const MCExample& ex) {
  corpus << ex.passage << "\n";
  if (ex.question) corpus << *ex.question << "\n";
  for (const std::string& option : ex.options) corpus << option << "\n";
}

}  // namespace

SyntheticCurriculum make_synthetic_curriculum(const SyntheticSpec& spec) {
  SyntheticCurriculum out;
  const PromptTemplate& nli_train_tmpl = get_template("table7_nli");
  const PromptTemplate& nli_transfer_tmpl = get_template("toy_nli_reworded");
  const PromptTemplate& topic_train_tmpl = get_template("toy_topic");
  const PromptTemplate& topic_transfer_tmpl = get_template("toy_topic_reworded");

  std::mt19937_64 rng(spec.seed);
  for (int i = 0; i < spec.copy_train; ++i) {
    out.copy_train.push_back(make_copy_example(rng, "synthetic_copy"));
  }
  for (int i = 0; i < spec.nli_train; ++i) {
    out.nli_train.push_back(make_nli_example(rng, nli_train_tmpl, "synthetic_nli"));
  }
  for (int i = 0; i < spec.topic_train; ++i) {
    out.topic_train.push_back(make_topic_example(rng, topic_train_tmpl, "synthetic_topic"));
  }

  std::mt19937_64 eval_rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  for (int i = 0; i < spec.copy_heldout; ++i) {
    out.copy_heldout.push_back(make_copy_example(eval_rng, "synthetic_copy_heldout"));
  }
  for (int i = 0; i < spec.nli_transfer; ++i) {
    out.nli_transfer.push_back(
        make_nli_example(eval_rng, nli_transfer_tmpl, "synthetic_nli_transfer"));
  }
  for (int i = 0; i < spec.topic_transfer; ++i) {
    out.topic_transfer.push_back(
        make_topic_example(eval_rng, topic_transfer_tmpl, "synthetic_topic_transfer"));
  }

  std::ostringstream corpus;
  for (const auto* set : {&out.copy_train, &out.nli_train, &out.topic_train}) {
    for (const MCExample& ex : *set) append_text(corpus, ex);
  }
  // Template wordings themselves (including the reworded ones) belong to the
  // vocabulary even where training never produces them.
  for (const auto& [id, tmpl] : template_registry()) {
    if (tmpl.question_text) corpus << *tmpl.question_text << "\n";
    for (const std::string& pattern : tmpl.option_patterns) corpus << pattern << "\n";
  }
  out.corpus = corpus.str();
  return out;
}

std::string write_synthetic_workspace(const SyntheticCurriculum& curriculum,
                                      const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto path = [&dir](const std::string& name) { return (fs::path(dir) / name).string(); };

  write_mc_file(path("copy_train.mc.jsonl"), curriculum.copy_train);
  write_mc_file(path("nli_train.mc.jsonl"), curriculum.nli_train);
  write_mc_file(path("topic_train.mc.jsonl"), curriculum.topic_train);
  write_mc_file(path("copy_heldout.mc.jsonl"), curriculum.copy_heldout);
  write_mc_file(path("nli_transfer.mc.jsonl"), curriculum.nli_transfer);
  write_mc_file(path("topic_transfer.mc.jsonl"), curriculum.topic_transfer);

  {
    std::ofstream corpus(path("corpus.txt"), std::ios::binary);
    if (!corpus) throw DataError(ErrorCode::kIoError, "cannot write corpus.txt");
    corpus << curriculum.corpus;
  }

  const std::string plan_path = path("train.plan");
  std::ofstream plan(plan_path, std::ios::binary);
  if (!plan) throw DataError(ErrorCode::kIoError, "cannot write train.plan");
  plan << "# synthetic desk-scale curriculum\n";
  plan << "train = " << path("copy_train.mc.jsonl") << "\n";
  plan << "train = " << path("nli_train.mc.jsonl") << "\n";
  plan << "train = " << path("topic_train.mc.jsonl") << "\n";
  plan << "eval = " << path("copy_heldout.mc.jsonl") << "\n";
  plan << "eval = " << path("nli_transfer.mc.jsonl") << "\n";
  plan << "eval = " << path("topic_transfer.mc.jsonl") << "\n";
  plan << "preset = toy\n";
  plan << "max_len = 80\n";
  plan << "batch_size = 16\n";
  plan << "epochs = 1\n";
  plan << "learning_rate = 0.001\n";
  plan << "warmup_fraction = 0.1\n";
  plan << "mlm_ratio = 0.15\n";
  plan << "per_task_cap = 20000\n";
  plan << "seeds = 11\n";
  return plan_path;
}

}  // namespace unimc

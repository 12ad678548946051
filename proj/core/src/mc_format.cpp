#include "unimc/mc_format.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "unimc/errors.hpp"
#include "unimc/tokenizer.hpp"

namespace unimc {

namespace {

using nlohmann::json;

// Aliases applied when the schema map has no entry for a source field.
const std::map<std::string, std::string>& default_aliases() {
  static const std::map<std::string, std::string> aliases = {
      {"premise", "x1"},  {"hypothesis", "x2"}, {"text", "x"},
      {"sentence", "x"},  {"label", "answer"},  {"option", "options"},
      {"context", "x1"},
  };
  return aliases;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return s;
}

bool is_integer_literal(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

std::string json_scalar_to_string(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  if (value.is_number()) {
    std::ostringstream out;
    out << value.get<double>();
    return out.str();
  }
  if (value.is_boolean()) return value.get<bool>() ? "1" : "0";
  return value.dump();
}

// Resolves a record's label against a class-name table, template order.
// Numeric labels index the template order directly; text labels go through
// the name table (each class may list several accepted spellings).
std::optional<int> resolve_label(const RawRecord& record,
                                 const std::vector<std::vector<std::string>>& class_names,
                                 int class_count) {
  long index = -1;
  if (record.answer_index) {
    index = *record.answer_index;
  } else if (record.has_field("answer")) {
    const std::string raw = trim(record.field("answer"));
    if (is_integer_literal(raw)) {
      index = std::stol(raw);
    } else {
      const std::string name = lower(raw);
      for (std::size_t c = 0; c < class_names.size(); ++c) {
        for (const std::string& candidate : class_names[c]) {
          if (name == candidate) index = static_cast<long>(c);
        }
      }
      if (index < 0) {
        throw DataError(ErrorCode::kLabelRange,
                        "label '" + raw + "' outside the class set of " +
                            task_group_name(record.task_group),
                        record.line_number);
      }
    }
  } else {
    return std::nullopt;
  }
  if (index < 0 || index >= class_count) {
    throw DataError(ErrorCode::kLabelRange,
                    "label index " + std::to_string(index) + " outside [0, " +
                        std::to_string(class_count) + ")",
                    record.line_number);
  }
  return static_cast<int>(index);
}

std::string substitute_slot(const std::string& pattern, const std::string& value) {
  const std::size_t slot = pattern.find("{}");
  if (slot == std::string::npos) return pattern;
  std::string out = pattern;
  out.replace(slot, 2, value);
  return out;
}

void require_pattern_count(const PromptTemplate& tmpl, int expected,
                           const RawRecord& record) {
  if (static_cast<int>(tmpl.option_patterns.size()) != expected) {
    throw DataError(ErrorCode::kTemplateMismatch,
                    "template '" + tmpl.template_id + "' has " +
                        std::to_string(tmpl.option_patterns.size()) +
                        " option patterns, needs " + std::to_string(expected),
                    record.line_number);
  }
}

MCExample base_example(const RawRecord& record, const PromptTemplate& tmpl,
                       bool include_question) {
  MCExample ex;
  ex.task_group = record.task_group;
  ex.source_dataset = record.source_dataset;
  ex.template_id = tmpl.template_id;
  if (include_question && tmpl.question_text) {
    ex.question = normalize_apostrophes(*tmpl.question_text);
  }
  return ex;
}

}  // namespace

const char* task_group_name(TaskGroup group) {
  switch (group) {
    case TaskGroup::kNli3: return "nli3";
    case TaskGroup::kNli2: return "nli2";
    case TaskGroup::kSentiment: return "sentiment";
    case TaskGroup::kTopic: return "topic";
    case TaskGroup::kNativeMc: return "native_mc";
  }
  return "unknown";
}

TaskGroup task_group_from_name(const std::string& name) {
  if (name == "nli3") return TaskGroup::kNli3;
  if (name == "nli2") return TaskGroup::kNli2;
  if (name == "sentiment") return TaskGroup::kSentiment;
  if (name == "topic") return TaskGroup::kTopic;
  if (name == "native_mc") return TaskGroup::kNativeMc;
  throw DataError(ErrorCode::kBadConfig, "unknown task group '" + name + "'");
}

const std::string& RawRecord::field(const std::string& name) const {
  auto it = fields.find(name);
  if (it == fields.end()) {
    throw DataError(ErrorCode::kMissingField, "record is missing field '" + name + "'",
                    line_number);
  }
  return it->second;
}

std::string SchemaMap::canonical_field(const std::string& source) const {
  auto it = field_map.find(source);
  if (it != field_map.end()) return it->second;
  auto alias = default_aliases().find(source);
  if (alias != default_aliases().end()) return alias->second;
  return source;
}

std::string SchemaMap::canonical_value(const std::string& source) const {
  auto it = value_map.find(source);
  return it == value_map.end() ? source : it->second;
}

SchemaMap parse_schema_map(std::istream& in) {
  SchemaMap schema;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw DataError(ErrorCode::kMalformedLine,
                      "schema line has no '=': " + stripped, line_number);
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw DataError(ErrorCode::kMalformedLine, "empty schema key or value",
                      line_number);
    }
    if (key.rfind("value:", 0) == 0) {
      schema.value_map[trim(key.substr(6))] = value;
    } else {
      schema.field_map[key] = value;
    }
  }
  return schema;
}

SchemaMap load_schema_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(ErrorCode::kIoError, "cannot read schema map " + path);
  return parse_schema_map(in);
}

std::vector<RawRecord> parse_dataset(std::istream& in, TaskGroup group,
                                     const SchemaMap& schema,
                                     const std::string& source_dataset) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;

    json parsed;
    try {
      parsed = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(ErrorCode::kMalformedLine, e.what(), line_number);
    }
    if (!parsed.is_object()) {
      throw DataError(ErrorCode::kMalformedLine, "record is not a JSON object",
                      line_number);
    }

    RawRecord record;
    record.task_group = group;
    record.source_dataset = source_dataset;
    record.line_number = line_number;
    for (const auto& [source_key, value] : parsed.items()) {
      const std::string key = schema.canonical_field(source_key);
      if (key == "options") {
        if (!value.is_array()) {
          throw DataError(ErrorCode::kMalformedLine, "'options' is not an array",
                          line_number);
        }
        for (const json& item : value) record.options.push_back(json_scalar_to_string(item));
      } else if (key == "answer") {
        const std::string mapped = schema.canonical_value(json_scalar_to_string(value));
        if (is_integer_literal(mapped)) {
          record.answer_index = std::stol(mapped);
        } else {
          record.fields["answer"] = mapped;
        }
      } else {
        record.fields[key] = json_scalar_to_string(value);
      }
    }

    std::vector<std::string> required;
    switch (group) {
      case TaskGroup::kNli3:
      case TaskGroup::kNli2: required = {"x1", "x2"}; break;
      case TaskGroup::kSentiment:
      case TaskGroup::kTopic: required = {"x"}; break;
      case TaskGroup::kNativeMc:
        if (record.options.empty()) {
          throw DataError(ErrorCode::kMissingField, "record is missing field 'options'",
                          line_number);
        }
        if (!record.has_field("x1") && !record.has_field("x")) {
          throw DataError(ErrorCode::kMissingField,
                          "record is missing a passage field ('x1' or 'x')", line_number);
        }
        break;
    }
    for (const std::string& name : required) {
      if (!record.has_field(name) || trim(record.field(name)).empty()) {
        throw DataError(ErrorCode::kMissingField, "record is missing field '" + name + "'",
                        line_number);
      }
    }
    records.push_back(std::move(record));
  }
  return records;
}

MCExample convert_nli(const RawRecord& record, const PromptTemplate& tmpl,
                      bool include_question) {
  if (record.task_group != TaskGroup::kNli3 && record.task_group != TaskGroup::kNli2) {
    throw DataError(ErrorCode::kBadConfig, "convert_nli needs an nli record",
                    record.line_number);
  }
  const bool three_way = record.task_group == TaskGroup::kNli3;
  require_pattern_count(tmpl, three_way ? 3 : 2, record);

  const std::string x2 = normalize_apostrophes(record.field("x2"));
  if (trim(x2).empty()) {
    throw DataError(ErrorCode::kEmptySubstitution, "hypothesis x2 is empty",
                    record.line_number);
  }

  MCExample ex = base_example(record, tmpl, include_question);
  ex.passage = normalize_apostrophes(record.field("x1"));
  for (const std::string& pattern : tmpl.option_patterns) {
    ex.options.push_back(substitute_slot(normalize_apostrophes(pattern), x2));
  }
  static const std::vector<std::vector<std::string>> nli3_names = {
      {"entailment"}, {"contradiction"}, {"neutral"}};
  static const std::vector<std::vector<std::string>> nli2_names = {
      {"entailment"}, {"non-entailment", "not_entailment", "non_entailment"}};
  ex.answer = resolve_label(record, three_way ? nli3_names : nli2_names,
                            three_way ? 3 : 2);
  return ex;
}

MCExample convert_sentiment(const RawRecord& record, const PromptTemplate& tmpl,
                            bool include_question) {
  if (record.task_group != TaskGroup::kSentiment) {
    throw DataError(ErrorCode::kBadConfig, "convert_sentiment needs a sentiment record",
                    record.line_number);
  }
  require_pattern_count(tmpl, 2, record);
  for (const std::string& pattern : tmpl.option_patterns) {
    if (pattern.find("{}") != std::string::npos) {
      throw DataError(ErrorCode::kTemplateMismatch,
                      "sentiment option patterns carry no substitution slot",
                      record.line_number);
    }
  }
  MCExample ex = base_example(record, tmpl, include_question);
  ex.passage = normalize_apostrophes(record.field("x"));
  for (const std::string& pattern : tmpl.option_patterns) {
    ex.options.push_back(normalize_apostrophes(pattern));
  }
  // Template order is positive-first for every built-in polarity wording.
  static const std::vector<std::vector<std::string>> names = {{"positive"}, {"negative"}};
  ex.answer = resolve_label(record, names, 2);
  return ex;
}

MCExample convert_topic(const RawRecord& record, const PromptTemplate& tmpl,
                        bool include_question) {
  if (record.task_group != TaskGroup::kTopic) {
    throw DataError(ErrorCode::kBadConfig, "convert_topic needs a topic record",
                    record.line_number);
  }
  const int class_count = static_cast<int>(tmpl.option_patterns.size());
  if (class_count < 2) {
    throw DataError(ErrorCode::kTemplateMismatch,
                    "topic template needs at least 2 classes", record.line_number);
  }
  MCExample ex = base_example(record, tmpl, include_question);
  ex.passage = normalize_apostrophes(record.field("x"));
  for (const std::string& pattern : tmpl.option_patterns) {
    ex.options.push_back(normalize_apostrophes(pattern));
  }
  ex.answer = resolve_label(record, {}, class_count);
  return ex;
}

MCExample passthrough_mc(const RawRecord& record) {
  if (record.task_group != TaskGroup::kNativeMc) {
    throw DataError(ErrorCode::kBadConfig, "passthrough_mc needs a native_mc record",
                    record.line_number);
  }
  if (record.options.size() < 2) {
    throw DataError(ErrorCode::kTooFewOptions,
                    "native_mc record has " + std::to_string(record.options.size()) +
                        " options, needs at least 2",
                    record.line_number);
  }
  MCExample ex;
  ex.task_group = record.task_group;
  ex.source_dataset = record.source_dataset;
  ex.template_id = "passthrough";
  ex.passage = normalize_apostrophes(
      record.has_field("x1") ? record.field("x1") : record.field("x"));
  if (record.has_field("question") && !trim(record.field("question")).empty()) {
    ex.question = normalize_apostrophes(record.field("question"));
  }
  for (const std::string& option : record.options) {
    ex.options.push_back(normalize_apostrophes(option));
  }
  if (record.answer_index) {
    if (*record.answer_index < 0 ||
        *record.answer_index >= static_cast<long>(ex.options.size())) {
      throw DataError(ErrorCode::kAnswerRange,
                      "answer index " + std::to_string(*record.answer_index) +
                          " outside option range",
                      record.line_number);
    }
    ex.answer = static_cast<int>(*record.answer_index);
  } else if (record.has_field("answer")) {
    const std::string wanted = normalize_apostrophes(record.field("answer"));
    int hit = -1;
    int hits = 0;
    for (std::size_t i = 0; i < ex.options.size(); ++i) {
      if (ex.options[i] == wanted) {
        hit = static_cast<int>(i);
        ++hits;
      }
    }
    if (hits == 0) {
      throw DataError(ErrorCode::kAnswerUnresolved,
                      "answer text '" + wanted + "' matches no option",
                      record.line_number);
    }
    if (hits > 1) {
      throw DataError(ErrorCode::kAnswerAmbiguous,
                      "answer text '" + wanted + "' matches several options",
                      record.line_number);
    }
    ex.answer = hit;
  }
  return ex;
}

MCExample convert(const RawRecord& record, const PromptTemplate& tmpl,
                  bool include_question) {
  switch (record.task_group) {
    case TaskGroup::kNli3:
    case TaskGroup::kNli2: return convert_nli(record, tmpl, include_question);
    case TaskGroup::kSentiment: return convert_sentiment(record, tmpl, include_question);
    case TaskGroup::kTopic: return convert_topic(record, tmpl, include_question);
    case TaskGroup::kNativeMc: return passthrough_mc(record);
  }
  throw DataError(ErrorCode::kBadConfig, "unknown task group");
}

const MCExample& validate_example(const MCExample& example) {
  if (example.options.size() < 2) {
    throw DataError(ErrorCode::kTooFewOptions,
                    "example has " + std::to_string(example.options.size()) +
                        " options, needs at least 2");
  }
  std::vector<std::string> normalized;
  normalized.reserve(example.options.size());
  for (const std::string& option : example.options) {
    normalized.push_back(normalize_whitespace(option));
  }
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    for (std::size_t j = i + 1; j < normalized.size(); ++j) {
      if (normalized[i] == normalized[j]) {
        throw DataError(ErrorCode::kDuplicateOption,
                        "options " + std::to_string(i) + " and " + std::to_string(j) +
                            " are identical after whitespace normalization");
      }
    }
  }
  if (example.answer &&
      (*example.answer < 0 || *example.answer >= static_cast<int>(example.options.size()))) {
    throw DataError(ErrorCode::kAnswerRange,
                    "answer " + std::to_string(*example.answer) + " outside [0, " +
                        std::to_string(example.options.size()) + ")");
  }
  if (normalize_whitespace(example.passage).empty()) {
    throw DataError(ErrorCode::kEmptyPassage, "passage is empty");
  }
  return example;
}

std::string serialize_mc(const MCExample& example) {
  json j;
  j["passage"] = example.passage;
  j["question"] = example.question ? json(*example.question) : json(nullptr);
  j["options"] = example.options;
  j["answer"] = example.answer ? json(*example.answer) : json(nullptr);
  j["task_group"] = task_group_name(example.task_group);
  j["source_dataset"] = example.source_dataset;
  j["template_id"] = example.template_id;
  return j.dump();
}

MCExample parse_mc_line(const std::string& line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(ErrorCode::kMalformedLine, e.what(), line_number);
  }
  if (!j.is_object()) {
    throw DataError(ErrorCode::kMalformedLine, "record is not a JSON object", line_number);
  }
  try {
    MCExample ex;
    ex.passage = j.at("passage").get<std::string>();
    if (j.contains("question") && !j["question"].is_null()) {
      ex.question = j["question"].get<std::string>();
    }
    ex.options = j.at("options").get<std::vector<std::string>>();
    if (j.contains("answer") && !j["answer"].is_null()) {
      ex.answer = j["answer"].get<int>();
    }
    ex.task_group = task_group_from_name(j.value("task_group", "native_mc"));
    ex.source_dataset = j.value("source_dataset", "");
    ex.template_id = j.value("template_id", "");
    return ex;
  } catch (const json::exception& e) {
    throw DataError(ErrorCode::kMalformedLine, e.what(), line_number);
  }
}

std::vector<MCExample> read_mc_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(ErrorCode::kIoError, "cannot read " + path);
  std::vector<MCExample> examples;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    MCExample ex = parse_mc_line(line, line_number);
    try {
      validate_example(ex);
    } catch (const DataError& e) {
      throw DataError(e.code(), std::string(e.what()) + " in " + path, line_number);
    }
    examples.push_back(std::move(ex));
  }
  return examples;
}

void write_mc_file(const std::string& path, const std::vector<MCExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(ErrorCode::kIoError, "cannot write " + path);
  for (const MCExample& ex : examples) out << serialize_mc(ex) << "\n";
}

const std::map<std::string, PromptTemplate>& template_registry() {
  static const std::map<std::string, PromptTemplate> registry = [] {
    std::map<std::string, PromptTemplate> reg;
    auto add = [&reg](std::string id, std::optional<std::string> question,
                      std::vector<std::string> patterns, TaskGroup group) {
      reg[id] = PromptTemplate{id, std::move(question), std::move(patterns), group};
    };
    add("table7_nli", "Base on the paragraph.",
        {"we can infer that {}", "we can not infer that {}",
         "it is difficult for us to infer that {}"},
        TaskGroup::kNli3);
    add("table7_nli2", "Base on the paragraph.",
        {"we can infer that {}", "we can not infer that {}"}, TaskGroup::kNli2);
    add("great_terrible", "What is sentiment of reviews?",
        {"It's great", "It's terrible"}, TaskGroup::kSentiment);
    add("good_bad", "What is sentiment of reviews?", {"It's good", "It's bad"},
        TaskGroup::kSentiment);
    add("positive_negative", "What is sentiment of reviews?",
        {"It's positive", "It's negative"}, TaskGroup::kSentiment);
    add("table7_agnews", "What is the topic of the news?",
        {"World news", "Sports news", "Business news", "Technology news"},
        TaskGroup::kTopic);
    add("table7_dbpedia", "What is the topic of the articles?",
        {"Company", "Educational Institution", "Artist", "Athlete", "Office Holder",
         "Mean Of Transportation", "Building", "Natural Place", "Village", "Animal",
         "Plant", "Album", "Written Work"},
        TaskGroup::kTopic);
    add("toy_topic", "what is the topic of the text?",
        {"the text is about sports", "the text is about music",
         "the text is about weather", "the text is about food"},
        TaskGroup::kTopic);
    add("toy_topic_reworded", "name the subject of this passage.",
        {"this passage talks about sports", "this passage talks about music",
         "this passage talks about weather", "this passage talks about food"},
        TaskGroup::kTopic);
    add("toy_nli_reworded", "according to the passage.",
        {"clearly we can infer that {}", "clearly we can not infer that {}",
         "it looks difficult for us to infer that {}"},
        TaskGroup::kNli3);
    return reg;
  }();
  return registry;
}

const PromptTemplate& get_template(const std::string& template_id) {
  const auto& registry = template_registry();
  auto it = registry.find(template_id);
  if (it == registry.end()) {
    throw DataError(ErrorCode::kBadConfig, "unknown template '" + template_id + "'");
  }
  return it->second;
}

}  // namespace unimc

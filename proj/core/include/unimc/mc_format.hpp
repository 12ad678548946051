#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace unimc {

enum class TaskGroup { kNli3, kNli2, kSentiment, kTopic, kNativeMc };

const char* task_group_name(TaskGroup group);
TaskGroup task_group_from_name(const std::string& name);

// One raw source record, field names already mapped to canonical ones
// (x1, x2, x, question, options, answer).
struct RawRecord {
  TaskGroup task_group = TaskGroup::kNativeMc;
  std::map<std::string, std::string> fields;
  std::vector<std::string> options;       // native_mc only
  std::optional<long> answer_index;       // numeric label/answer, if the source gave one
  std::string source_dataset;
  std::size_t line_number = 1;

  bool has_field(const std::string& name) const { return fields.count(name) > 0; }
  const std::string& field(const std::string& name) const;  // kMissingField if absent
};

// One unified multiple-choice instance.
struct MCExample {
  std::vector<std::string> options;      // N_O >= 2
  std::optional<std::string> question;   // N_Q in {0,1}
  std::string passage;
  std::optional<int> answer;             // index into options
  TaskGroup task_group = TaskGroup::kNativeMc;
  std::string source_dataset;
  std::string template_id;

  bool operator==(const MCExample&) const = default;
};

// Option prompt wording plus the optional question prompt. Each option
// pattern holds at most one "{}" slot (the hypothesis x2 for NLI groups;
// class phrasings carry no slot).
struct PromptTemplate {
  std::string template_id;
  std::optional<std::string> question_text;
  std::vector<std::string> option_patterns;
  TaskGroup group = TaskGroup::kNli3;
};

// Field-name (and optional answer-value) mapping from a source format to the
// canonical names. File format: `source_field = canonical_name` lines plus
// optional `value:SOURCE = CANONICAL` lines rewriting the answer value.
struct SchemaMap {
  std::map<std::string, std::string> field_map;
  std::map<std::string, std::string> value_map;

  std::string canonical_field(const std::string& source) const;
  std::string canonical_value(const std::string& source) const;
};

SchemaMap parse_schema_map(std::istream& in);
SchemaMap load_schema_map(const std::string& path);

// Parses UTF-8 line-delimited JSON records, one map per line. Blank lines are
// skipped; line numbers are preserved for error reporting.
std::vector<RawRecord> parse_dataset(std::istream& in, TaskGroup group,
                                     const SchemaMap& schema,
                                     const std::string& source_dataset);

MCExample convert_nli(const RawRecord& record, const PromptTemplate& tmpl,
                      bool include_question);
MCExample convert_sentiment(const RawRecord& record, const PromptTemplate& tmpl,
                            bool include_question);
MCExample convert_topic(const RawRecord& record, const PromptTemplate& tmpl,
                        bool include_question);
MCExample passthrough_mc(const RawRecord& record);

// Dispatches to the converter for record.task_group.
MCExample convert(const RawRecord& record, const PromptTemplate& tmpl,
                  bool include_question);

// Returns the example unchanged iff every MCExample invariant holds; throws
// DataError with a machine-readable code otherwise.
const MCExample& validate_example(const MCExample& example);

// Unified on-disk format: one JSON object per line with fields passage,
// question (nullable), options, answer (nullable), task_group,
// source_dataset, template_id.
std::string serialize_mc(const MCExample& example);
MCExample parse_mc_line(const std::string& line, std::size_t line_number = 1);
std::vector<MCExample> read_mc_file(const std::string& path);
void write_mc_file(const std::string& path, const std::vector<MCExample>& examples);

// Built-in prompt templates, keyed by template_id.
const std::map<std::string, PromptTemplate>& template_registry();
const PromptTemplate& get_template(const std::string& template_id);

}  // namespace unimc

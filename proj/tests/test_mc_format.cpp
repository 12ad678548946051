#include <random>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "unimc/errors.hpp"
#include "unimc/mc_format.hpp"

using namespace unimc;

namespace {

RawRecord nli3_record(const std::string& x1, const std::string& x2,
                      std::optional<long> label = std::nullopt) {
  RawRecord record;
  record.task_group = TaskGroup::kNli3;
  record.fields["x1"] = x1;
  record.fields["x2"] = x2;
  record.answer_index = label;
  record.source_dataset = "test";
  return record;
}

}  // namespace

TEST_CASE("parse_dataset maps premise/hypothesis/label to canonical names") {
  std::istringstream in(R"({"premise":"p","hypothesis":"h","label":0})");
  const auto records = parse_dataset(in, TaskGroup::kNli3, {}, "snli");
  REQUIRE(records.size() == 1);
  CHECK(records[0].field("x1") == "p");
  CHECK(records[0].field("x2") == "h");
  REQUIRE(records[0].answer_index.has_value());
  CHECK(*records[0].answer_index == 0);
  CHECK(records[0].line_number == 1);
}

TEST_CASE("parse_dataset: empty stream gives an empty list") {
  std::istringstream in("");
  CHECK(parse_dataset(in, TaskGroup::kNli3, {}, "x").empty());
}

TEST_CASE("parse_dataset reports the line of a missing field") {
  std::istringstream in("{\"premise\":\"a\",\"hypothesis\":\"b\",\"label\":1}\n"
                        "{\"premise\":\"c\",\"label\":1}\n");
  try {
    parse_dataset(in, TaskGroup::kNli3, {}, "x");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.code() == ErrorCode::kMissingField);
    CHECK(e.line() == 2);
  }
}

TEST_CASE("parse_dataset reports the line of a malformed record") {
  std::istringstream in("{\"premise\":\"a\",\"hypothesis\":\"b\"}\nnot json\n");
  try {
    parse_dataset(in, TaskGroup::kNli3, {}, "x");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.code() == ErrorCode::kMalformedLine);
    CHECK(e.line() == 2);
  }
}

TEST_CASE("parse_dataset applies value remapping to the answer") {
  SchemaMap schema;
  schema.value_map["0"] = "entailment";
  schema.value_map["1"] = "neutral";
  schema.value_map["2"] = "contradiction";
  std::istringstream in(R"({"premise":"p","hypothesis":"h","label":2})");
  const auto records = parse_dataset(in, TaskGroup::kNli3, schema, "snli");
  REQUIRE(records.size() == 1);
  CHECK_FALSE(records[0].answer_index.has_value());
  CHECK(records[0].field("answer") == "contradiction");
  const MCExample ex = convert_nli(records[0], get_template("table7_nli"), true);
  CHECK(*ex.answer == 1);  // contradiction sits at template slot 1
}

TEST_CASE("schema map file parses field and value lines") {
  std::istringstream in("# comment\npremise = x1\nvalue:1 = positive\n");
  const SchemaMap schema = parse_schema_map(in);
  CHECK(schema.canonical_field("premise") == "x1");
  CHECK(schema.canonical_value("1") == "positive");
  CHECK(schema.canonical_field("unmapped") == "unmapped");
}

TEST_CASE("convert_nli reproduces the worked SNLI example") {
  RawRecord record = nli3_record("A man reads the paper in a bar with green lighting.",
                                 "The man is inside.");
  record.fields["answer"] = "entailment";
  const MCExample ex = convert_nli(record, get_template("table7_nli"), true);
  REQUIRE(ex.options.size() == 3);
  CHECK(ex.options[0] == "we can infer that The man is inside.");
  CHECK(ex.options[1] == "we can not infer that The man is inside.");
  CHECK(ex.options[2] == "it is difficult for us to infer that The man is inside.");
  CHECK(ex.passage == "A man reads the paper in a bar with green lighting.");
  REQUIRE(ex.question.has_value());
  CHECK(*ex.question == "Base on the paragraph.");
  REQUIRE(ex.answer.has_value());
  CHECK(*ex.answer == 0);
}

TEST_CASE("convert_nli handles the two-option group") {
  RawRecord record = nli3_record("p", "h");
  record.task_group = TaskGroup::kNli2;
  record.fields["answer"] = "non-entailment";
  const MCExample ex = convert_nli(record, get_template("table7_nli2"), true);
  REQUIRE(ex.options.size() == 2);
  CHECK(ex.options[0] == "we can infer that h");
  CHECK(ex.options[1] == "we can not infer that h");
  CHECK(*ex.answer == 1);
}

TEST_CASE("convert_nli rejects an empty hypothesis") {
  RawRecord record = nli3_record("p", "   ");
  CHECK_THROWS_AS(convert_nli(record, get_template("table7_nli"), true), DataError);
}

TEST_CASE("convert_nli rejects labels outside the class set") {
  RawRecord record = nli3_record("p", "h", 3);
  CHECK_THROWS_AS(convert_nli(record, get_template("table7_nli"), true), DataError);
  RawRecord bad_name = nli3_record("p", "h");
  bad_name.fields["answer"] = "perhaps";
  CHECK_THROWS_AS(convert_nli(bad_name, get_template("table7_nli"), true), DataError);
}

TEST_CASE("convert_nli rejects a template with the wrong pattern count") {
  RawRecord record = nli3_record("p", "h", 0);
  CHECK_THROWS_AS(convert_nli(record, get_template("table7_nli2"), true), DataError);
}

TEST_CASE("convert_sentiment produces the polarity options post-normalization") {
  RawRecord record;
  record.task_group = TaskGroup::kSentiment;
  record.fields["x"] = "a warm, funny, engaging film.";
  record.fields["answer"] = "positive";
  const MCExample ex = convert_sentiment(record, get_template("great_terrible"), true);
  REQUIRE(ex.options.size() == 2);
  CHECK(ex.options[0] == "It's great");
  CHECK(ex.options[1] == "It's terrible");
  CHECK(*ex.answer == 0);
  CHECK(*ex.question == "What is sentiment of reviews?");

  // A different wording keeps the answer index.
  const MCExample variant = convert_sentiment(record, get_template("positive_negative"), true);
  CHECK(variant.options[0] == "It's positive");
  CHECK(variant.options[1] == "It's negative");
  CHECK(*variant.answer == *ex.answer);
}

TEST_CASE("convert_sentiment rejects a non-binary label") {
  RawRecord record;
  record.task_group = TaskGroup::kSentiment;
  record.fields["x"] = "text";
  record.answer_index = 2;
  CHECK_THROWS_AS(convert_sentiment(record, get_template("great_terrible"), true),
                  DataError);
}

TEST_CASE("convert_topic lists the class phrasings in template order") {
  RawRecord record;
  record.task_group = TaskGroup::kTopic;
  record.fields["x"] = "the team won the final";
  record.answer_index = 1;
  const MCExample ex = convert_topic(record, get_template("table7_agnews"), true);
  CHECK(ex.options == std::vector<std::string>{"World news", "Sports news",
                                               "Business news", "Technology news"});
  CHECK(*ex.answer == 1);
  CHECK(*ex.question == "What is the topic of the news?");
}

TEST_CASE("the 13-class topic template ends with Written Work") {
  RawRecord record;
  record.task_group = TaskGroup::kTopic;
  record.fields["x"] = "an article";
  record.answer_index = 12;
  const MCExample ex = convert_topic(record, get_template("table7_dbpedia"), true);
  REQUIRE(ex.options.size() == 13);
  CHECK(ex.options.front() == "Company");
  CHECK(ex.options[1] == "Educational Institution");
  CHECK(ex.options.back() == "Written Work");
}

TEST_CASE("convert_topic rejects out-of-range labels (zero-based)") {
  RawRecord record;
  record.task_group = TaskGroup::kTopic;
  record.fields["x"] = "text";
  record.answer_index = 4;
  CHECK_THROWS_AS(convert_topic(record, get_template("table7_agnews"), true), DataError);
}

TEST_CASE("passthrough_mc reproduces the worked multiple-choice example") {
  RawRecord record;
  record.task_group = TaskGroup::kNativeMc;
  record.fields["x1"] =
      "Jesse placed the music sheet in his hands and began to sing a song.";
  record.fields["question"] = "What will Jesse want to do next?";
  record.options = {"paint a picture", "make a speech", "start the song"};
  record.fields["answer"] = "start the song";
  const MCExample ex = passthrough_mc(record);
  CHECK(ex.options ==
        std::vector<std::string>{"paint a picture", "make a speech", "start the song"});
  CHECK(*ex.question == "What will Jesse want to do next?");
  REQUIRE(ex.answer.has_value());
  CHECK(*ex.answer == 2);  // answer text resolved by exact match
}

TEST_CASE("passthrough_mc needs at least two options") {
  RawRecord record;
  record.task_group = TaskGroup::kNativeMc;
  record.fields["x1"] = "p";
  record.options = {"only"};
  CHECK_THROWS_AS(passthrough_mc(record), DataError);
}

TEST_CASE("passthrough_mc flags ambiguous and unresolved answer text") {
  RawRecord record;
  record.task_group = TaskGroup::kNativeMc;
  record.fields["x1"] = "p";
  record.options = {"same", "same", "other"};
  record.fields["answer"] = "same";
  CHECK_THROWS_AS(passthrough_mc(record), DataError);
  record.options = {"a", "b"};
  record.fields["answer"] = "missing";
  CHECK_THROWS_AS(passthrough_mc(record), DataError);
}

TEST_CASE("validate_example returns the example unchanged when invariants hold") {
  MCExample ex;
  ex.options = {"one", "two", "three"};
  ex.passage = "text";
  ex.answer = 1;
  CHECK(validate_example(ex) == ex);
}

TEST_CASE("validate_example machine-readable codes") {
  MCExample ex;
  ex.options = {"dup", "  dup ", "x"};
  ex.passage = "text";
  try {
    validate_example(ex);
    FAIL("expected DUPLICATE_OPTION");
  } catch (const DataError& e) {
    CHECK(e.code() == ErrorCode::kDuplicateOption);
  }
  ex.options = {"a", "b"};
  ex.answer = 2;
  try {
    validate_example(ex);
    FAIL("expected ANSWER_RANGE");
  } catch (const DataError& e) {
    CHECK(e.code() == ErrorCode::kAnswerRange);
  }
  ex.answer = 0;
  ex.passage = "  ";
  try {
    validate_example(ex);
    FAIL("expected EMPTY_PASSAGE");
  } catch (const DataError& e) {
    CHECK(e.code() == ErrorCode::kEmptyPassage);
  }
}

TEST_CASE("serialized examples parse back field-for-field") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const MCExample ex = testing::random_example(rng);
    const MCExample back = parse_mc_line(serialize_mc(ex));
    CHECK(back == ex);
  }
}

TEST_CASE("answer index is a pure function of label and template order") {
  // Exhaustive over every label of every group.
  const PromptTemplate& nli3 = get_template("table7_nli");
  const std::vector<std::string> nli3_names = {"entailment", "contradiction", "neutral"};
  for (int label = 0; label < 3; ++label) {
    RawRecord by_index = nli3_record("p", "h", label);
    RawRecord by_name = nli3_record("p", "h");
    by_name.fields["answer"] = nli3_names[static_cast<std::size_t>(label)];
    CHECK(*convert_nli(by_index, nli3, true).answer == label);
    CHECK(*convert_nli(by_name, nli3, true).answer == label);
  }
  const std::vector<std::string> senti_names = {"positive", "negative"};
  for (int label = 0; label < 2; ++label) {
    RawRecord record;
    record.task_group = TaskGroup::kSentiment;
    record.fields["x"] = "t";
    record.fields["answer"] = senti_names[static_cast<std::size_t>(label)];
    CHECK(*convert_sentiment(record, get_template("great_terrible"), true).answer == label);
  }
  for (int label = 0; label < 4; ++label) {
    RawRecord record;
    record.task_group = TaskGroup::kTopic;
    record.fields["x"] = "t";
    record.answer_index = label;
    CHECK(*convert_topic(record, get_template("table7_agnews"), true).answer == label);
  }
}

TEST_CASE("include_question toggles only the question field") {
  RawRecord record = nli3_record("premise text", "hypothesis text", 1);
  const MCExample with_q = convert_nli(record, get_template("table7_nli"), true);
  const MCExample without_q = convert_nli(record, get_template("table7_nli"), false);
  CHECK(with_q.question.has_value());
  CHECK_FALSE(without_q.question.has_value());
  CHECK(with_q.options == without_q.options);
  CHECK(with_q.passage == without_q.passage);
  CHECK(with_q.answer == without_q.answer);
}

TEST_CASE("converters normalize typographic apostrophes") {
  RawRecord record;
  record.task_group = TaskGroup::kSentiment;
  record.fields["x"] = "it’s a film";
  record.answer_index = 0;
  const MCExample ex = convert_sentiment(record, get_template("great_terrible"), true);
  CHECK(ex.passage == "it's a film");
}

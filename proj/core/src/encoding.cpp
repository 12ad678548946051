#include "unimc/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "unimc/errors.hpp"

namespace unimc {

namespace {

std::vector<int> encode_text(const std::string& text, const Vocab& vocab) {
  return encode(tokenize(text), vocab);
}

}  // namespace

EncodedInput assemble(const MCExample& example, const Vocab& vocab, int max_len,
                      bool include_question) {
  validate_example(example);

  std::vector<std::vector<int>> option_ids;
  option_ids.reserve(example.options.size());
  int options_len = 0;
  for (const std::string& option : example.options) {
    option_ids.push_back(encode_text(option, vocab));
    options_len += 1 + static_cast<int>(option_ids.back().size());  // [O-MASK] + tokens
  }

  std::vector<int> question_ids;
  if (include_question && example.question) {
    question_ids = encode_text(*example.question, vocab);
  }
  std::vector<int> passage_ids = encode_text(example.passage, vocab);
  if (passage_ids.empty()) {
    throw DataError(ErrorCode::kEmptyPassage, "passage tokenizes to nothing");
  }

  // [CLS] + options + [SEP] ... passage tail truncates first, then question.
  const int scaffold = 1 + options_len + 1;
  int q_len = static_cast<int>(question_ids.size());
  int p_len = static_cast<int>(passage_ids.size());
  auto total = [&](int q, int p) { return scaffold + (q > 0 ? q + 1 : 0) + p + 1; };
  if (total(q_len, p_len) > max_len) {
    p_len = std::max(1, p_len - (total(q_len, p_len) - max_len));
  }
  if (total(q_len, p_len) > max_len) {
    q_len = std::max(0, q_len - (total(q_len, p_len) - max_len));
  }
  if (total(q_len, p_len) > max_len) {
    throw DataError(ErrorCode::kOptionsTooLong,
                    "options and scaffolding need " + std::to_string(total(0, 1)) +
                        " tokens, max_len is " + std::to_string(max_len));
  }
  question_ids.resize(static_cast<std::size_t>(q_len));
  passage_ids.resize(static_cast<std::size_t>(p_len));

  EncodedInput out;
  out.answer = example.answer;
  auto push = [&out](int id, int segment, int position) {
    out.token_ids.push_back(id);
    out.segment_ids.push_back(segment);
    out.position_ids.push_back(position);
  };

  push(special::kCls, 0, 0);
  for (const std::vector<int>& ids : option_ids) {
    const int start = out.length();
    out.omask_positions.push_back(start);
    push(special::kOMask, 0, 0);
    int pos = 1;
    for (int id : ids) push(id, 0, pos++);
    out.option_spans.emplace_back(start, out.length());
  }
  int pos = 0;
  push(special::kSep, 1, pos++);
  for (int id : question_ids) push(id, 1, pos++);
  if (!question_ids.empty()) push(special::kSep, 1, pos++);
  const int passage_start = out.length();
  for (int id : passage_ids) push(id, 1, pos++);
  out.passage_content = {passage_start, out.length()};
  push(special::kSep, 1, pos++);

  out.attention_allow = build_attention_mask(out);
  return out;
}

std::vector<std::uint8_t> build_attention_mask(const EncodedInput& encoded) {
  const int len = encoded.length();
  for (std::size_t i = 0; i < encoded.option_spans.size(); ++i) {
    const auto& [start, end] = encoded.option_spans[i];
    if (start < 0 || end > len || start >= end) {
      throw DataError(ErrorCode::kOverlappingSpans, "option span out of bounds");
    }
    if (i > 0 && start < encoded.option_spans[i - 1].second) {
      throw DataError(ErrorCode::kOverlappingSpans,
                      "option spans " + std::to_string(i - 1) + " and " +
                          std::to_string(i) + " overlap");
    }
  }
  std::vector<std::uint8_t> allow(static_cast<std::size_t>(len) * len, 1);
  for (std::size_t a = 0; a < encoded.option_spans.size(); ++a) {
    for (std::size_t b = 0; b < encoded.option_spans.size(); ++b) {
      if (a == b) continue;
      const auto& [as, ae] = encoded.option_spans[a];
      const auto& [bs, be] = encoded.option_spans[b];
      for (int i = as; i < ae; ++i) {
        for (int j = bs; j < be; ++j) {
          allow[static_cast<std::size_t>(i) * len + j] = 0;
        }
      }
    }
  }
  return allow;
}

EncodedInput apply_omlm_mask(const EncodedInput& encoded, std::optional<int> answer) {
  EncodedInput out = encoded;
  out.omlm_targets.clear();
  if (!answer) return out;  // inference: tokens already carry [O-MASK]
  if (*answer < 0 || *answer >= out.option_count()) {
    throw DataError(ErrorCode::kAnswerRange,
                    "answer " + std::to_string(*answer) + " outside [0, " +
                        std::to_string(out.option_count()) + ")");
  }
  for (int i = 0; i < out.option_count(); ++i) {
    out.omlm_targets.emplace_back(out.omask_positions[static_cast<std::size_t>(i)],
                                  i == *answer ? special::kYes : special::kNo);
  }
  out.answer = answer;
  return out;
}

EncodedInput apply_mlm_mask(const EncodedInput& encoded, double ratio,
                            std::mt19937_64& rng) {
  if (ratio < 0.0 || ratio > 1.0) {
    throw DataError(ErrorCode::kBadConfig,
                    "mlm ratio must lie in [0, 1], got " + std::to_string(ratio));
  }
  EncodedInput out = encoded;
  out.mlm_targets.clear();
  const auto [start, end] = out.passage_content;
  std::vector<int> positions;
  for (int p = start; p < end; ++p) positions.push_back(p);
  const long long want = std::llround(ratio * static_cast<double>(positions.size()));

  // Partial Fisher-Yates: the first `want` slots become the masked subset.
  for (long long i = 0; i < want; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i),
                                                    positions.size() - 1);
    std::swap(positions[static_cast<std::size_t>(i)], positions[pick(rng)]);
  }
  positions.resize(static_cast<std::size_t>(want));
  std::sort(positions.begin(), positions.end());
  for (int p : positions) {
    out.mlm_targets.emplace_back(p, out.token_ids[static_cast<std::size_t>(p)]);
    out.token_ids[static_cast<std::size_t>(p)] = special::kMask;
  }
  return out;
}

TrainingBatch collate(const std::vector<EncodedInput>& examples) {
  if (examples.empty()) {
    throw DataError(ErrorCode::kEmptyPool, "collate on an empty example list");
  }
  TrainingBatch batch;
  batch.batch_size = static_cast<int>(examples.size());
  for (const EncodedInput& ex : examples) {
    batch.max_len = std::max(batch.max_len, ex.length());
    batch.max_options = std::max(batch.max_options, ex.option_count());
  }
  const std::size_t L = static_cast<std::size_t>(batch.max_len);
  const std::size_t B = static_cast<std::size_t>(batch.batch_size);

  batch.token_ids.assign(B * L, special::kPad);
  batch.segment_ids.assign(B * L, 0);
  batch.position_ids.assign(B * L, 0);
  batch.attention_allow.assign(B * L * L, 0);
  batch.yes_logit_mask.assign(B * static_cast<std::size_t>(batch.max_options),
                              std::numeric_limits<double>::lowest());

  for (std::size_t b = 0; b < B; ++b) {
    const EncodedInput& ex = examples[b];
    const std::size_t len = static_cast<std::size_t>(ex.length());
    batch.lengths.push_back(ex.length());
    batch.option_counts.push_back(ex.option_count());
    batch.labels.push_back(ex.answer.value_or(-1));
    batch.omask_positions.push_back(ex.omask_positions);
    batch.mlm_targets.push_back(ex.mlm_targets);
    batch.omlm_targets.push_back(ex.omlm_targets);

    std::copy(ex.token_ids.begin(), ex.token_ids.end(), batch.token_ids.begin() + b * L);
    std::copy(ex.segment_ids.begin(), ex.segment_ids.end(),
              batch.segment_ids.begin() + b * L);
    std::copy(ex.position_ids.begin(), ex.position_ids.end(),
              batch.position_ids.begin() + b * L);

    std::uint8_t* allow = batch.attention_allow.data() + b * L * L;
    for (std::size_t i = 0; i < len; ++i) {
      std::copy(ex.attention_allow.begin() + static_cast<std::ptrdiff_t>(i * len),
                ex.attention_allow.begin() + static_cast<std::ptrdiff_t>((i + 1) * len),
                allow + i * L);
    }
    for (std::size_t i = len; i < L; ++i) allow[i * L + i] = 1;  // pads see themselves

    for (int o = 0; o < ex.option_count(); ++o) {
      batch.yes_logit_mask[b * static_cast<std::size_t>(batch.max_options) +
                           static_cast<std::size_t>(o)] = 0.0;
    }
  }
  return batch;
}

}  // namespace unimc

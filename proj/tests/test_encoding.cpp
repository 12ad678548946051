#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "unimc/encoding.hpp"
#include "unimc/errors.hpp"

using namespace unimc;

namespace {

MCExample tiny_example() {
  MCExample ex;
  ex.options = {"a", "b"};
  ex.passage = "c";
  ex.answer = 0;
  return ex;
}

Vocab tiny_vocab() { return build_vocab(std::string("a b c d e f g h"), 32); }

// Checks every EncodedInput invariant: layout, ids, spans, mask symmetry.
void check_invariants(const EncodedInput& enc) {
  const int len = enc.length();
  REQUIRE(len > 0);
  CHECK(enc.token_ids[0] == special::kCls);
  CHECK(enc.segment_ids[0] == 0);
  CHECK(enc.position_ids[0] == 0);
  CHECK(enc.token_ids[static_cast<std::size_t>(len - 1)] == special::kSep);
  REQUIRE(enc.option_spans.size() == enc.omask_positions.size());
  CHECK(enc.option_count() >= 2);

  int omask_count = 0;
  for (int id : enc.token_ids) omask_count += id == special::kOMask;
  CHECK(omask_count == enc.option_count());

  int prev_end = 1;  // [CLS]
  for (std::size_t i = 0; i < enc.option_spans.size(); ++i) {
    const auto [start, end] = enc.option_spans[i];
    CHECK(start == prev_end);  // spans ordered, back to back
    CHECK(start < end);
    CHECK(enc.omask_positions[i] == start);
    CHECK(enc.token_ids[static_cast<std::size_t>(start)] == special::kOMask);
    for (int p = start; p < end; ++p) {
      CHECK(enc.segment_ids[static_cast<std::size_t>(p)] == 0);
      CHECK(enc.position_ids[static_cast<std::size_t>(p)] == p - start);
    }
    prev_end = end;
  }
  // Context: [SEP] ... [SEP], segment 1, positions restarting at the SEP.
  const int context_start = prev_end;
  CHECK(enc.token_ids[static_cast<std::size_t>(context_start)] == special::kSep);
  for (int p = context_start; p < len; ++p) {
    CHECK(enc.segment_ids[static_cast<std::size_t>(p)] == 1);
    CHECK(enc.position_ids[static_cast<std::size_t>(p)] == p - context_start);
  }

  // Attention blocks exactly the cross-option pairs.
  auto span_of = [&](int pos) {
    for (std::size_t s = 0; s < enc.option_spans.size(); ++s) {
      if (pos >= enc.option_spans[s].first && pos < enc.option_spans[s].second) {
        return static_cast<int>(s);
      }
    }
    return -1;
  };
  for (int i = 0; i < len; ++i) {
    CHECK(enc.attention_allow[static_cast<std::size_t>(i * len + i)] == 1);
    for (int j = 0; j < len; ++j) {
      const int si = span_of(i), sj = span_of(j);
      const bool cross = si >= 0 && sj >= 0 && si != sj;
      CHECK(enc.attention_allow[static_cast<std::size_t>(i * len + j)] ==
            (cross ? 0 : 1));
    }
  }
}

}  // namespace

TEST_CASE("assemble lays out the trivial two-option example exactly") {
  const Vocab vocab = tiny_vocab();
  const EncodedInput enc = assemble(tiny_example(), vocab, 32);
  // [CLS] [O-MASK] a [O-MASK] b [SEP] c [SEP]
  REQUIRE(enc.length() == 8);
  CHECK(enc.token_ids ==
        std::vector<int>{special::kCls, special::kOMask, vocab.id_of("a"),
                         special::kOMask, vocab.id_of("b"), special::kSep,
                         vocab.id_of("c"), special::kSep});
  CHECK(enc.position_ids == std::vector<int>{0, 0, 1, 0, 1, 0, 1, 2});
  CHECK(enc.segment_ids == std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1});
  CHECK(enc.omask_positions == std::vector<int>{1, 3});
  CHECK(enc.option_spans ==
        std::vector<std::pair<int, int>>{{1, 3}, {3, 5}});
  check_invariants(enc);
}

TEST_CASE("assemble reproduces the sentiment layout with question and passage") {
  MCExample ex;
  ex.options = {"It's great", "It's terrible"};
  ex.question = "What is sentiment of reviews?";
  ex.passage = "a gorgeous film";
  const std::string corpus =
      "it ' s great terrible what is sentiment of reviews ? a gorgeous film";
  const Vocab vocab = build_vocab(corpus, 64);
  const EncodedInput enc = assemble(ex, vocab, 64);

  std::vector<std::string> words;
  for (int id : enc.token_ids) words.push_back(vocab.token_of(id));
  CHECK(words == std::vector<std::string>{
                     "[CLS]", "[O-MASK]", "it", "'", "s", "great", "[O-MASK]", "it",
                     "'", "s", "terrible", "[SEP]", "what", "is", "sentiment", "of",
                     "reviews", "?", "[SEP]", "a", "gorgeous", "film", "[SEP]"});
  check_invariants(enc);
}

TEST_CASE("assemble rejects a single option") {
  MCExample ex;
  ex.options = {"only"};
  ex.passage = "p";
  CHECK_THROWS_AS(assemble(ex, tiny_vocab(), 32), DataError);
}

TEST_CASE("assemble truncates passage first, then question, never options") {
  MCExample ex;
  ex.options = {"a b", "c d"};
  ex.question = "e f g";
  ex.passage = "h a b c d e f g h a b c";

  // Plenty of room: everything fits.
  const Vocab vocab = build_vocab(std::string("a b c d e f g h"), 32);
  const EncodedInput full = assemble(ex, vocab, 64);

  // Tight: passage shrinks to fit, question intact.
  const EncodedInput tight = assemble(ex, vocab, 20);
  CHECK(tight.length() == 20);
  CHECK(tight.option_spans == full.option_spans);
  const int full_q_len = 3;
  int q_tokens = 0;
  for (int id : tight.token_ids) q_tokens += id == vocab.id_of("e");
  (void)full_q_len;
  CHECK(q_tokens >= 1);  // "e" appears in question and passage

  // Tighter: passage at one token, question tail goes too.
  const EncodedInput tighter = assemble(ex, vocab, 13);
  CHECK(tighter.length() <= 13);
  CHECK(tighter.passage_content.second - tighter.passage_content.first == 1);
  check_invariants(tighter);

  // Options alone can never fit: error.
  CHECK_THROWS_AS(assemble(ex, vocab, 9), DataError);
}

TEST_CASE("build_attention_mask blocks exactly the cross-option pairs") {
  EncodedInput enc;
  enc.token_ids.assign(8, 0);
  enc.option_spans = {{1, 3}, {3, 5}};
  enc.omask_positions = {1, 3};
  const auto allow = build_attention_mask(enc);
  int blocked = 0;
  for (std::uint8_t a : allow) blocked += a == 0;
  CHECK(blocked == 8);  // {1,2}x{3,4} both directions
  for (int i = 0; i < 8; ++i) CHECK(allow[static_cast<std::size_t>(i * 8 + i)] == 1);

  EncodedInput solo;
  solo.token_ids.assign(6, 0);
  solo.option_spans = {{1, 4}};
  solo.omask_positions = {1};
  const auto solo_allow = build_attention_mask(solo);
  for (std::uint8_t a : solo_allow) CHECK(a == 1);
}

TEST_CASE("build_attention_mask rejects overlapping spans") {
  EncodedInput enc;
  enc.token_ids.assign(8, 0);
  enc.option_spans = {{1, 4}, {3, 6}};
  CHECK_THROWS_AS(build_attention_mask(enc), DataError);
}

TEST_CASE("O-MLM masking targets yes at the answer and no elsewhere") {
  const Vocab vocab = tiny_vocab();
  MCExample ex;
  ex.options = {"a", "b", "c"};
  ex.passage = "d";
  const EncodedInput enc = assemble(ex, vocab, 32);

  const EncodedInput three = apply_omlm_mask(enc, 2);
  REQUIRE(three.omlm_targets.size() == 3);
  CHECK(three.omlm_targets[0].second == special::kNo);
  CHECK(three.omlm_targets[1].second == special::kNo);
  CHECK(three.omlm_targets[2].second == special::kYes);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(three.omlm_targets[i].first == three.omask_positions[i]);
  }

  const EncodedInput two = apply_omlm_mask(assemble(tiny_example(), vocab, 32), 0);
  REQUIRE(two.omlm_targets.size() == 2);
  CHECK(two.omlm_targets[0].second == special::kYes);
  CHECK(two.omlm_targets[1].second == special::kNo);

  const EncodedInput inference = apply_omlm_mask(enc, std::nullopt);
  CHECK(inference.omlm_targets.empty());
  CHECK(inference.token_ids == enc.token_ids);

  CHECK_THROWS_AS(apply_omlm_mask(enc, 3), DataError);
}

TEST_CASE("MLM masking touches only passage content, reproducibly") {
  std::mt19937_64 rng(42);
  MCExample ex;
  ex.options = {"a", "b"};
  ex.question = "e f";
  ex.passage = "a b c d e f g h a b c d e f g h a b c d";  // 20 tokens
  const Vocab vocab = build_vocab(std::string("a b c d e f g h"), 32);
  const EncodedInput enc = assemble(ex, vocab, 64);
  REQUIRE(enc.passage_content.second - enc.passage_content.first == 20);

  SUBCASE("ratio 0 masks nothing") {
    const EncodedInput none = apply_mlm_mask(enc, 0.0, rng);
    CHECK(none.mlm_targets.empty());
    CHECK(none.token_ids == enc.token_ids);
  }

  SUBCASE("ratio 1 masks every passage content token") {
    const EncodedInput all = apply_mlm_mask(enc, 1.0, rng);
    CHECK(all.mlm_targets.size() == 20);
    for (int p = enc.passage_content.first; p < enc.passage_content.second; ++p) {
      CHECK(all.token_ids[static_cast<std::size_t>(p)] == special::kMask);
    }
  }

  SUBCASE("ratio 0.15 of 20 tokens is 3 positions, reproducible per seed") {
    std::mt19937_64 rng_a(7), rng_b(7);
    const EncodedInput a = apply_mlm_mask(enc, 0.15, rng_a);
    const EncodedInput b = apply_mlm_mask(enc, 0.15, rng_b);
    CHECK(a.mlm_targets.size() == 3);
    CHECK(a.mlm_targets == b.mlm_targets);
    CHECK(a.token_ids == b.token_ids);
  }

  SUBCASE("masked positions avoid options, question, scaffold and [O-MASK]s") {
    std::mt19937_64 rng_c(9);
    for (int trial = 0; trial < 50; ++trial) {
      const EncodedInput masked = apply_mlm_mask(enc, 0.5, rng_c);
      for (const auto& [pos, original] : masked.mlm_targets) {
        CHECK(pos >= enc.passage_content.first);
        CHECK(pos < enc.passage_content.second);
        CHECK(original == enc.token_ids[static_cast<std::size_t>(pos)]);
      }
      // Partition: MLM positions and [O-MASK] positions are disjoint.
      for (int om : masked.omask_positions) {
        for (const auto& [pos, original] : masked.mlm_targets) CHECK(pos != om);
      }
    }
  }
}

TEST_CASE("collate pads the logit mask row per option count") {
  const Vocab vocab = tiny_vocab();
  MCExample two = tiny_example();
  MCExample three;
  three.options = {"a", "b", "c"};
  three.passage = "d e f";
  three.answer = 1;

  const TrainingBatch batch = collate(
      {assemble(two, vocab, 32), assemble(three, vocab, 32)});
  REQUIRE(batch.max_options == 3);
  const double blocked = std::numeric_limits<double>::lowest();
  CHECK(batch.yes_logit_mask ==
        std::vector<double>{0.0, 0.0, blocked, 0.0, 0.0, 0.0});
  for (int b = 0; b < 2; ++b) {
    int zeros = 0;
    for (int o = 0; o < batch.max_options; ++o) {
      zeros += batch.yes_logit_mask[static_cast<std::size_t>(b * batch.max_options + o)] == 0.0;
    }
    CHECK(zeros == batch.option_counts[static_cast<std::size_t>(b)]);
  }

  SUBCASE("homogeneous batch has an all-zero mask") {
    const TrainingBatch same = collate(
        {assemble(two, vocab, 32), assemble(two, vocab, 32)});
    for (double v : same.yes_logit_mask) CHECK(v == 0.0);
  }
}

TEST_CASE("collate isolates padding and keeps real attention untouched") {
  const Vocab vocab = tiny_vocab();
  MCExample shorter = tiny_example();
  MCExample longer;
  longer.options = {"a b c", "d e f"};
  longer.passage = "g h a b c d e f g h";
  longer.answer = 0;

  const EncodedInput enc_short = assemble(shorter, vocab, 64);
  const TrainingBatch batch = collate({enc_short, assemble(longer, vocab, 64)});
  const std::size_t L = static_cast<std::size_t>(batch.max_len);
  const std::size_t len = static_cast<std::size_t>(batch.lengths[0]);
  REQUIRE(len < L);

  const std::uint8_t* allow = batch.attention_allow.data();
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      const bool pad_pair = (i >= len || j >= len);
      if (!pad_pair) {
        CHECK(allow[i * L + j] == enc_short.attention_allow[i * enc_short.length() + j]);
      } else {
        CHECK(allow[i * L + j] == (i == j ? 1 : 0));
      }
    }
  }
  for (std::size_t p = len; p < L; ++p) {
    CHECK(batch.token_ids[p] == special::kPad);
  }
}

TEST_CASE("assembled random examples satisfy every invariant") {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 100; ++trial) {
    const MCExample ex = testing::random_example(rng);
    const Vocab vocab = testing::vocab_for({ex});
    check_invariants(assemble(ex, vocab, 256));
  }
}

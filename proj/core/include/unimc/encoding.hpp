#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "unimc/mc_format.hpp"
#include "unimc/tokenizer.hpp"

namespace unimc {

// One assembled sequence:
//   [CLS] ([O-MASK] option_i)* [SEP] (question [SEP])^{N_Q} passage [SEP]
// Segment id 0 covers [CLS] and the option spans, 1 the rest. Position ids
// restart at 0 at each [O-MASK] and at the first [SEP] after the options,
// so options are positionally interchangeable. attention_allow blocks
// exactly the cross-option pairs.
struct EncodedInput {
  std::vector<int> token_ids;
  std::vector<int> segment_ids;
  std::vector<int> position_ids;
  std::vector<std::pair<int, int>> option_spans;  // [start, end), starts at the [O-MASK]
  std::vector<int> omask_positions;
  std::vector<std::uint8_t> attention_allow;      // L*L, 1 = allow, 0 = block
  std::pair<int, int> passage_content{0, 0};      // [start, end) of passage tokens
  std::vector<std::pair<int, int>> mlm_targets;   // (position, original id)
  std::vector<std::pair<int, int>> omlm_targets;  // (omask position, yes or no id)
  std::optional<int> answer;

  int length() const { return static_cast<int>(token_ids.size()); }
  int option_count() const { return static_cast<int>(omask_positions.size()); }
};

// Padded stack of EncodedInput. attention_allow carries the cross-option
// blocking extended with padding isolation; lengths lets the model keep
// padding isolated even when the option mask ablation is off. yes_logit_mask
// holds 0 on real option slots and the most negative finite double on padded
// slots, per-row zero count equals that example's option count.
struct TrainingBatch {
  int batch_size = 0;
  int max_len = 0;
  int max_options = 0;
  std::vector<int> token_ids;                     // B*L
  std::vector<int> segment_ids;                   // B*L
  std::vector<int> position_ids;                  // B*L
  std::vector<int> lengths;                       // B
  std::vector<std::uint8_t> attention_allow;      // B*L*L
  std::vector<double> yes_logit_mask;             // B*N_max
  std::vector<int> labels;                        // B, -1 when unknown
  std::vector<int> option_counts;                 // B
  std::vector<std::vector<int>> omask_positions;  // per example
  std::vector<std::vector<std::pair<int, int>>> mlm_targets;
  std::vector<std::vector<std::pair<int, int>>> omlm_targets;
};

// Assembles a validated example. Over-length input loses passage tokens from
// the tail first, then question tokens; options are never truncated
// (OPTIONS_TOO_LONG when they cannot fit).
EncodedInput assemble(const MCExample& example, const Vocab& vocab, int max_len,
                      bool include_question = true);

// Recomputes the L*L allow matrix from option_spans: exactly the pairs lying
// in two distinct option spans are blocked, both directions.
std::vector<std::uint8_t> build_attention_mask(const EncodedInput& encoded);

// Training mode (answer given): records yes/no targets at every [O-MASK],
// yes at the answer's position. Inference mode (answer absent): no targets.
EncodedInput apply_omlm_mask(const EncodedInput& encoded, std::optional<int> answer);

// Replaces a round(ratio * P) uniform subset of the P passage-content
// positions with [MASK], recording the originals. Options, question and
// scaffold tokens are never touched.
EncodedInput apply_mlm_mask(const EncodedInput& encoded, double ratio,
                            std::mt19937_64& rng);

TrainingBatch collate(const std::vector<EncodedInput>& examples);

}  // namespace unimc

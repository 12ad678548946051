#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unimc/mc_format.hpp"

namespace unimc {

// Desk-scale synthetic curriculum. Three generator families:
//   copy  - native MC, "pick the option phrase appearing in the passage";
//   nli   - templated premise/hypothesis pairs, the hypothesis either
//           repeats the premise core (entailment), negates it
//           (contradiction), or talks about something else (neutral);
//   topic - four keyword-marked classes.
// Transfer sets reuse the generators on held-out samples but convert them
// with reworded prompt templates the model never trained on.
struct SyntheticSpec {
  int copy_train = 4000;
  int nli_train = 4000;
  int topic_train = 3000;
  int copy_heldout = 400;
  int nli_transfer = 450;
  int topic_transfer = 400;
  std::uint64_t seed = 1234;
};

struct SyntheticCurriculum {
  std::vector<MCExample> copy_train;
  std::vector<MCExample> nli_train;
  std::vector<MCExample> topic_train;
  std::vector<MCExample> copy_heldout;    // in-distribution, unseen samples
  std::vector<MCExample> nli_transfer;    // reworded template, unseen samples
  std::vector<MCExample> topic_transfer;  // reworded template, unseen samples
  std::string corpus;                     // text for vocabulary building
};

SyntheticCurriculum make_synthetic_curriculum(const SyntheticSpec& spec);

// Writes the curriculum as .mc.jsonl files plus corpus.txt and a ready
// train plan under dir. Returns the plan path.
std::string write_synthetic_workspace(const SyntheticCurriculum& curriculum,
                                      const std::string& dir);

}  // namespace unimc

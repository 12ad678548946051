#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace unimc {

// Fixed special-token ids. [O-MASK] is the option-mask token: it stands in
// for the "yes"/"no" the model recovers in front of each candidate option.
namespace special {
inline constexpr int kPad = 0;
inline constexpr int kCls = 1;
inline constexpr int kSep = 2;
inline constexpr int kMask = 3;
inline constexpr int kOMask = 4;
inline constexpr int kUnk = 5;
inline constexpr int kCount = 6;
// "yes"/"no" are ordinary words but always sit right after the specials.
inline constexpr int kYes = 6;
inline constexpr int kNo = 7;
}  // namespace special

// Word-level vocabulary. Ids 0-5 are the special tokens, 6 and 7 are always
// the plain tokens "yes" and "no", the rest is corpus vocabulary ordered by
// descending frequency (ties broken lexicographically). Word-level ids are
// position-independent by construction, which is what makes recovering
// "yes"/"no" at [O-MASK] positions stable.
class Vocab {
 public:
  Vocab() = default;

  int id_of(const std::string& token) const;  // [UNK] id for unknown tokens
  const std::string& token_of(int id) const;  // throws on out-of-range ids
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  int yes_id() const { return yes_id_; }
  int no_id() const { return no_id_; }

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static Vocab load(std::istream& in);
  static Vocab load_file(const std::string& path);

  friend Vocab build_vocab(std::istream& corpus, int target_size);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int yes_id_ = -1;
  int no_id_ = -1;

  void index_tokens();
};

// Builds a deterministic whole-word vocabulary: specials first, then
// "yes"/"no", then corpus tokens by descending frequency (lexicographic
// tie-break), truncated to target_size. target_size must be at least 8.
Vocab build_vocab(std::istream& corpus, int target_size);
Vocab build_vocab(const std::string& corpus, int target_size);

// Replaces typographic apostrophes/quotes with their ASCII forms.
std::string normalize_apostrophes(const std::string& text);

// Collapses whitespace runs to single spaces and trims both ends.
std::string normalize_whitespace(const std::string& text);

// Lowercases, splits on whitespace, and separates .,!?;:'"()- into their own
// tokens. Literal special-token strings in the input (e.g. "[O-MASK]") are
// escaped to "[UNK]" so data can never spoof scaffolding tokens. The same
// word always yields the same tokens regardless of surrounding context.
std::vector<std::string> tokenize(const std::string& text);

std::vector<int> encode(const std::vector<std::string>& tokens, const Vocab& vocab);
std::vector<std::string> decode(const std::vector<int>& ids, const Vocab& vocab);

}  // namespace unimc

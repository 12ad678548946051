#include "unimc/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "unimc/errors.hpp"

namespace unimc {

namespace {

const std::array<const char*, special::kCount> kSpecialTokens = {
    "[PAD]", "[CLS]", "[SEP]", "[MASK]", "[O-MASK]", "[UNK]"};

constexpr const char* kVocabHeader = "unimc-vocab v1";

bool is_split_punct(char c) {
  switch (c) {
    case '.':
    case ',':
    case '!':
    case '?':
    case ';':
    case ':':
    case '\'':
    case '"':
    case '(':
    case ')':
    case '-':
      return true;
    default:
      return false;
  }
}

// Case-insensitive search for a literal special-token string.
std::size_t find_ci(const std::string& haystack, const std::string& needle,
                    std::size_t from) {
  if (needle.empty() || haystack.size() < needle.size()) return std::string::npos;
  for (std::size_t i = from; i + needle.size() <= haystack.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < needle.size(); ++j) {
      if (std::tolower(static_cast<unsigned char>(haystack[i + j])) !=
          std::tolower(static_cast<unsigned char>(needle[j]))) {
        match = false;
        break;
      }
    }
    if (match) return i;
  }
  return std::string::npos;
}

// Replaces every literal special-token occurrence with " [UNK] ". The
// replacement is done before punctuation splitting so "[O-MASK]" cannot
// resurface via its bracket characters.
std::string escape_special_literals(const std::string& text) {
  std::string out = text;
  std::replace(out.begin(), out.end(), '\x01', ' ');
  for (const char* raw : kSpecialTokens) {
    const std::string needle(raw);
    std::size_t pos = 0;
    while ((pos = find_ci(out, needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), " \x01 ");
      pos += 3;
    }
  }
  return out;
}

}  // namespace

std::string normalize_apostrophes(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    // U+2018 / U+2019 (e2 80 98/99) -> ' ; U+201C / U+201D (e2 80 9c/9d) -> "
    if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xe2 &&
        static_cast<unsigned char>(text[i + 1]) == 0x80) {
      const unsigned char b = static_cast<unsigned char>(text[i + 2]);
      if (b == 0x98 || b == 0x99) {
        out.push_back('\'');
        i += 3;
        continue;
      }
      if (b == 0x9c || b == 0x9d) {
        out.push_back('"');
        i += 3;
        continue;
      }
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

std::string normalize_whitespace(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = true;  // leading whitespace dropped
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
    } else {
      if (in_space && !out.empty()) out.push_back(' ');
      out.push_back(c);
      in_space = false;
    }
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  const std::string escaped = escape_special_literals(normalize_apostrophes(text));
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      tokens.push_back(word);
      word.clear();
    }
  };
  for (char c : escaped) {
    if (c == '\x01') {
      flush();
      tokens.push_back(kSpecialTokens[special::kUnk]);
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (is_split_punct(c)) {
      flush();
      tokens.push_back(std::string(1, c));
    } else {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return tokens;
}

void Vocab::index_tokens() {
  ids_.clear();
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    ids_.emplace(tokens_[i], static_cast<int>(i));
  }
  auto yes = ids_.find("yes");
  auto no = ids_.find("no");
  if (yes == ids_.end() || no == ids_.end() || yes->second != special::kYes ||
      no->second != special::kNo) {
    throw DataError(ErrorCode::kCorrupt, "vocabulary must keep yes/no at ids 6/7");
  }
  yes_id_ = yes->second;
  no_id_ = no->second;
}

int Vocab::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? special::kUnk : it->second;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || id >= size()) {
    throw DataError(ErrorCode::kIdRange,
                    "token id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(const std::string& token) const {
  return ids_.count(token) > 0;
}

Vocab build_vocab(std::istream& corpus, int target_size) {
  if (target_size < special::kCount + 2) {
    throw DataError(ErrorCode::kVocabTooSmall,
                    "target_size must be >= 8 (6 specials plus yes/no), got " +
                        std::to_string(target_size));
  }
  // Ordered map gives the lexicographic tie-break for free.
  std::map<std::string, long long> freq;
  std::string line;
  while (std::getline(corpus, line)) {
    for (const std::string& tok : tokenize(line)) ++freq[tok];
  }
  freq.erase("yes");
  freq.erase("no");
  freq.erase(kSpecialTokens[special::kUnk]);  // escaped literals are not vocabulary

  std::vector<std::pair<std::string, long long>> by_count(freq.begin(), freq.end());
  std::stable_sort(by_count.begin(), by_count.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocab vocab;
  for (const char* tok : kSpecialTokens) vocab.tokens_.emplace_back(tok);
  vocab.tokens_.emplace_back("yes");
  vocab.tokens_.emplace_back("no");
  for (const auto& [token, count] : by_count) {
    if (static_cast<int>(vocab.tokens_.size()) >= target_size) break;
    (void)count;
    vocab.tokens_.push_back(token);
  }
  vocab.index_tokens();
  return vocab;
}

Vocab build_vocab(const std::string& corpus, int target_size) {
  std::istringstream stream(corpus);
  return build_vocab(stream, target_size);
}

void Vocab::save(std::ostream& out) const {
  out << kVocabHeader << "\n";
  for (const std::string& tok : tokens_) out << tok << "\n";
}

void Vocab::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(ErrorCode::kIoError, "cannot write vocab file " + path);
  save(out);
}

Vocab Vocab::load(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header != kVocabHeader) {
    throw DataError(ErrorCode::kCorrupt, "bad vocab header: '" + header + "'");
  }
  Vocab vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    vocab.tokens_.push_back(line);
  }
  if (static_cast<int>(vocab.tokens_.size()) < special::kCount + 2) {
    throw DataError(ErrorCode::kCorrupt, "vocab file too small");
  }
  for (int i = 0; i < special::kCount; ++i) {
    if (vocab.tokens_[static_cast<std::size_t>(i)] != kSpecialTokens[static_cast<std::size_t>(i)]) {
      throw DataError(ErrorCode::kCorrupt,
                      "special token mismatch at id " + std::to_string(i));
    }
  }
  vocab.index_tokens();
  return vocab;
}

Vocab Vocab::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(ErrorCode::kIoError, "cannot read vocab file " + path);
  return load(in);
}

std::vector<int> encode(const std::vector<std::string>& tokens, const Vocab& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& tok : tokens) ids.push_back(vocab.id_of(tok));
  return ids;
}

std::vector<std::string> decode(const std::vector<int>& ids, const Vocab& vocab) {
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (int id : ids) tokens.push_back(vocab.token_of(id));
  return tokens;
}

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedLine: return "MALFORMED_LINE";
    case ErrorCode::kMissingField: return "MISSING_FIELD";
    case ErrorCode::kLabelRange: return "LABEL_RANGE";
    case ErrorCode::kTemplateMismatch: return "TEMPLATE_MISMATCH";
    case ErrorCode::kEmptySubstitution: return "EMPTY_SUBSTITUTION";
    case ErrorCode::kTooFewOptions: return "TOO_FEW_OPTIONS";
    case ErrorCode::kDuplicateOption: return "DUPLICATE_OPTION";
    case ErrorCode::kAnswerRange: return "ANSWER_RANGE";
    case ErrorCode::kAnswerAmbiguous: return "ANSWER_AMBIGUOUS";
    case ErrorCode::kAnswerUnresolved: return "ANSWER_UNRESOLVED";
    case ErrorCode::kEmptyPassage: return "EMPTY_PASSAGE";
    case ErrorCode::kVocabTooSmall: return "VOCAB_TOO_SMALL";
    case ErrorCode::kIdRange: return "ID_RANGE";
    case ErrorCode::kOptionsTooLong: return "OPTIONS_TOO_LONG";
    case ErrorCode::kOverlappingSpans: return "OVERLAPPING_SPANS";
    case ErrorCode::kMissingTargets: return "MISSING_TARGETS";
    case ErrorCode::kShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::kFullyMaskedRow: return "FULLY_MASKED_ROW";
    case ErrorCode::kNonScalarLoss: return "NON_SCALAR_LOSS";
    case ErrorCode::kCorrupt: return "CORRUPT";
    case ErrorCode::kShape: return "SHAPE";
    case ErrorCode::kEmptyPool: return "EMPTY_POOL";
    case ErrorCode::kEmptyDataset: return "EMPTY_DATASET";
    case ErrorCode::kTrainEvalOverlap: return "TRAIN_EVAL_OVERLAP";
    case ErrorCode::kBadConfig: return "BAD_CONFIG";
    case ErrorCode::kIoError: return "IO_ERROR";
    case ErrorCode::kNonFiniteLoss: return "NON_FINITE_LOSS";
    case ErrorCode::kLabelMasked: return "LABEL_MASKED";
  }
  return "UNKNOWN";
}

}  // namespace unimc

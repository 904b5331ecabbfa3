#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace docmt {

using Tokens = std::vector<std::string>;
using TokenIds = std::vector<std::int32_t>;

enum class Side { source, target };
enum class PhenomenonKind { pronoun, formality, cohesion, verb_form };

std::string_view to_string(Side side);
std::string_view to_string(PhenomenonKind kind);
Side parse_side(std::string_view text);
PhenomenonKind parse_kind(std::string_view text);
inline constexpr PhenomenonKind kAllKinds[] = {PhenomenonKind::pronoun, PhenomenonKind::cohesion,
                                               PhenomenonKind::formality,
                                               PhenomenonKind::verb_form};

Tokens split_tokens(std::string_view text);
std::string join_tokens(const Tokens& tokens);

struct SentencePair {
  Tokens source;
  Tokens target;
  bool operator==(const SentencePair&) const = default;
};

// Token span [begin, end) inside sentence `sentence` of the same document.
struct AntecedentSpan {
  std::size_t sentence = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const AntecedentSpan&) const = default;
};

// A tagged token. `token` indexes the sentence on `side`; pronoun records
// carry the antecedent span on that same side.
struct Annotation {
  PhenomenonKind kind = PhenomenonKind::pronoun;
  Side side = Side::target;
  std::size_t sentence = 0;
  std::size_t token = 0;
  std::optional<AntecedentSpan> antecedent;

  std::size_t distance() const { return antecedent ? sentence - antecedent->sentence : 0; }
  bool operator==(const Annotation&) const = default;
};

struct ParallelDocument {
  std::string id;
  std::vector<SentencePair> sentences;
  std::vector<Annotation> annotations;

  std::size_t size() const { return sentences.size(); }
  const Tokens& side(std::size_t i, Side s) const {
    return s == Side::source ? sentences[i].source : sentences[i].target;
  }
  bool operator==(const ParallelDocument&) const = default;
};

struct ParallelCorpus {
  std::vector<ParallelDocument> documents;

  std::size_t sentence_count() const;
  bool empty() const { return documents.empty(); }
  bool operator==(const ParallelCorpus&) const = default;
};

// Reason an annotation does not fit its document, if any.
std::optional<std::string> annotation_problem(const ParallelDocument& doc, const Annotation& a);
// Validates annotation indices against their document; throws AnnotationError.
void validate_annotations(const ParallelDocument& doc);

// Splits whole documents: the first `n_train` go to training, the next
// `n_valid` to validation, the rest to test.
struct CorpusSplit {
  ParallelCorpus train, valid, test;
};
CorpusSplit split_documents(const ParallelCorpus& corpus, std::size_t n_train, std::size_t n_valid);

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kBos = 1;
  static constexpr std::int32_t kEos = 2;
  static constexpr std::int32_t kSep = 3;  // joins context and current sentences
  static constexpr std::int32_t kUnk = 4;
  static constexpr std::int32_t kReserved = 5;

  Vocabulary();
  // Reserved tokens followed by `tokens` in the given order (duplicates dropped).
  explicit Vocabulary(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  std::int32_t id(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(std::int32_t id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenIds encode(const Tokens& tokens) const;
  // Throws VocabularyError on tokens outside the vocabulary.
  TokenIds encode_strict(const Tokens& tokens) const;
  Tokens decode(const TokenIds& ids) const;

  static bool is_reserved(std::int32_t id) { return id >= 0 && id < kReserved; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::int32_t, std::less<>> index_;
};

// All tokens of one side, sorted, behind the reserved block.
Vocabulary build_vocab(const ParallelCorpus& corpus, Side side);

}  // namespace docmt

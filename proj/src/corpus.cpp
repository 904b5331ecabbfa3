#include "docmt/corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "docmt/errors.hpp"

namespace docmt {

std::string_view to_string(Side side) { return side == Side::source ? "source" : "target"; }

std::string_view to_string(PhenomenonKind kind) {
  switch (kind) {
    case PhenomenonKind::pronoun: return "pronoun";
    case PhenomenonKind::formality: return "formality";
    case PhenomenonKind::cohesion: return "cohesion";
    case PhenomenonKind::verb_form: return "verb_form";
  }
  return "?";
}

Side parse_side(std::string_view text) {
  if (text == "source" || text == "src") return Side::source;
  if (text == "target" || text == "tgt") return Side::target;
  throw ConfigError("unknown side '" + std::string(text) + "'");
}

PhenomenonKind parse_kind(std::string_view text) {
  for (PhenomenonKind k : kAllKinds)
    if (to_string(k) == text) return k;
  throw ConfigError("unknown phenomenon kind '" + std::string(text) + "'");
}

Tokens split_tokens(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::size_t ParallelCorpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.size();
  return n;
}

std::optional<std::string> annotation_problem(const ParallelDocument& doc, const Annotation& a) {
  if (a.sentence >= doc.size()) return "sentence index beyond document length";
  if (a.token >= doc.side(a.sentence, a.side).size()) return "token index outside sentence";
  if (a.antecedent) {
    const AntecedentSpan& s = *a.antecedent;
    if (s.sentence > a.sentence) return "antecedent follows the tagged sentence";
    if (s.begin >= s.end || s.end > doc.side(s.sentence, a.side).size())
      return "antecedent span outside its sentence";
  }
  return std::nullopt;
}

void validate_annotations(const ParallelDocument& doc) {
  for (std::size_t r = 0; r < doc.annotations.size(); ++r) {
    const Annotation& a = doc.annotations[r];
    if (auto why = annotation_problem(doc, a)) {
      std::ostringstream os;
      os << "annotation " << r << " (doc " << doc.id << ", sentence " << a.sentence << ", "
         << to_string(a.kind) << "): " << *why;
      throw AnnotationError(os.str());
    }
  }
}

CorpusSplit split_documents(const ParallelCorpus& corpus, std::size_t n_train,
                            std::size_t n_valid) {
  CorpusSplit split;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    auto& dst = i < n_train ? split.train : (i < n_train + n_valid ? split.valid : split.test);
    dst.documents.push_back(corpus.documents[i]);
  }
  return split;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  tokens_ = {"<pad>", "<s>", "</s>", "<sep>", "<unk>"};
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    index_.emplace(tokens_[i], static_cast<std::int32_t>(i));
  for (const auto& t : tokens) {
    if (index_.count(t)) continue;
    index_.emplace(t, static_cast<std::int32_t>(tokens_.size()));
    tokens_.push_back(t);
  }
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.find(token) != index_.end(); }

const std::string& Vocabulary::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenIds Vocabulary::encode(const Tokens& tokens) const {
  TokenIds ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

TokenIds Vocabulary::encode_strict(const Tokens& tokens) const {
  TokenIds ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = index_.find(t);
    if (it == index_.end()) throw VocabularyError("unknown token '" + t + "'");
    ids.push_back(it->second);
  }
  return ids;
}

Tokens Vocabulary::decode(const TokenIds& ids) const {
  Tokens out;
  out.reserve(ids.size());
  for (std::int32_t i : ids) out.push_back(token(i));
  return out;
}

Vocabulary build_vocab(const ParallelCorpus& corpus, Side side) {
  std::set<std::string> seen;
  for (const auto& doc : corpus.documents)
    for (std::size_t i = 0; i < doc.size(); ++i)
      for (const auto& t : doc.side(i, side)) seen.insert(t);
  return Vocabulary(std::vector<std::string>(seen.begin(), seen.end()));
}

}  // namespace docmt

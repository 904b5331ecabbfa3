#pragma once

#include <map>
#include <string>
#include <vector>

#include "docmt/corpus.hpp"
#include "docmt/generator.hpp"

namespace docmt {

struct PhenomenonTag {
  PhenomenonKind kind;
  std::size_t sentence;
  std::size_t token;
  bool operator==(const PhenomenonTag&) const = default;
};

// Lexical rules over one document's sentences (one side):
//   pronoun    gendered pronoun with no noun before it in its sentence and a noun earlier in the document
//   cohesion   noun already mentioned earlier in the document
//   formality  second-person form (target only)
//   verb_form  suffix-marked past verb (target only)
// Tags are ordered by (sentence, token, kind).
std::vector<PhenomenonTag> tag_document(const std::vector<Tokens>& sentences, Side side, const Lexicon& lexicon);

std::vector<std::vector<PhenomenonTag>> tag_corpus(const ParallelCorpus& corpus, Side side, const Lexicon& lexicon);

// Copy of `corpus` whose annotations are the tags (no antecedents), for the annotations file format.
ParallelCorpus with_tags(const ParallelCorpus& corpus, const std::vector<std::vector<PhenomenonTag>>& tags, Side side);

struct PhenomenaStats {
  std::size_t total_tokens = 0;
  std::map<PhenomenonKind, std::size_t> counts;

  double percentage(PhenomenonKind kind) const;  // tagged / total, in percent
};

// Target-side counts.
PhenomenaStats phenomena_stats(const ParallelCorpus& corpus, const Lexicon& lexicon);

}  // namespace docmt

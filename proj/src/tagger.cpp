#include "docmt/tagger.hpp"

#include <algorithm>
#include <set>

namespace docmt {

std::vector<PhenomenonTag> tag_document(const std::vector<Tokens>& sentences, Side side, const Lexicon& lexicon) {
  const bool target = side == Side::target;
  auto is_noun = [&](const std::string& t) { return target ? lexicon.is_target_noun(t) : lexicon.is_source_noun(t); };
  auto is_pronoun = [&](const std::string& t) {
    return target ? lexicon.pronoun_gender(t).has_value() : t == lexicon.source_pronoun;
  };

  std::vector<PhenomenonTag> tags;
  std::set<std::string, std::less<>> seen_nouns;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const Tokens& sent = sentences[s];
    const bool earlier_noun = !seen_nouns.empty();
    bool noun_in_sentence = false;
    std::vector<std::string> mentioned;
    for (std::size_t t = 0; t < sent.size(); ++t) {
      const std::string& w = sent[t];
      if (is_noun(w)) {
        if (seen_nouns.contains(w)) tags.push_back({PhenomenonKind::cohesion, s, t});
        mentioned.push_back(w);
        noun_in_sentence = true;
      } else if (is_pronoun(w) && !noun_in_sentence && earlier_noun) {
        tags.push_back({PhenomenonKind::pronoun, s, t});
      }
      if (target && (w == lexicon.informal_you || w == lexicon.formal_you))
        tags.push_back({PhenomenonKind::formality, s, t});
      if (target && lexicon.is_past_verb(w)) tags.push_back({PhenomenonKind::verb_form, s, t});
    }
    seen_nouns.insert(mentioned.begin(), mentioned.end());
  }
  return tags;
}

std::vector<std::vector<PhenomenonTag>> tag_corpus(const ParallelCorpus& corpus, Side side, const Lexicon& lexicon) {
  std::vector<std::vector<PhenomenonTag>> out;
  out.reserve(corpus.documents.size());
  for (const auto& doc : corpus.documents) {
    std::vector<Tokens> sents;
    sents.reserve(doc.sentences.size());
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) sents.push_back(doc.side(i, side));
    out.push_back(tag_document(sents, side, lexicon));
  }
  return out;
}

ParallelCorpus with_tags(const ParallelCorpus& corpus, const std::vector<std::vector<PhenomenonTag>>& tags, Side side) {
  ParallelCorpus out = corpus;
  for (std::size_t d = 0; d < out.documents.size(); ++d) {
    auto& ann = out.documents[d].annotations;
    ann.clear();
    if (d >= tags.size()) continue;
    for (const auto& t : tags[d]) ann.push_back({t.kind, side, t.sentence, t.token, std::nullopt});
  }
  return out;
}

double PhenomenaStats::percentage(PhenomenonKind kind) const {
  if (total_tokens == 0) return 0.0;
  auto it = counts.find(kind);
  const std::size_t n = it == counts.end() ? 0 : it->second;
  return 100.0 * static_cast<double>(n) / static_cast<double>(total_tokens);
}

PhenomenaStats phenomena_stats(const ParallelCorpus& corpus, const Lexicon& lexicon) {
  PhenomenaStats stats;
  for (PhenomenonKind k : kAllKinds) stats.counts[k] = 0;
  const auto tags = tag_corpus(corpus, Side::target, lexicon);
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    for (const auto& s : corpus.documents[d].sentences) stats.total_tokens += s.target.size();
    for (const auto& t : tags[d]) ++stats.counts[t.kind];
  }
  return stats;
}

}  // namespace docmt

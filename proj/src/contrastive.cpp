#include "docmt/contrastive.hpp"

#include <algorithm>
#include <map>

#include "docmt/rng.hpp"

namespace docmt {

ContrastiveSet make_contrastive_set(const ParallelCorpus& corpus, std::uint64_t seed,
                                    std::size_t max_context, const Lexicon& lexicon) {
  std::array<std::vector<ContrastiveExample>, kGenderCount> by_class;
  for (const auto& doc : corpus.documents) {
    for (const Annotation& a : doc.annotations) {
      if (a.kind != PhenomenonKind::pronoun || a.side != Side::target || !a.antecedent) continue;
      const std::size_t d = a.distance();
      if (d < 1 || d > max_context) continue;
      const Tokens& tgt = doc.sentences[a.sentence].target;
      auto gender = lexicon.pronoun_gender(tgt[a.token]);
      if (!gender) continue;
      auto src_it = std::find_if(doc.annotations.begin(), doc.annotations.end(),
                                 [&](const Annotation& s) {
                                   return s.kind == PhenomenonKind::pronoun &&
                                          s.side == Side::source && s.sentence == a.sentence &&
                                          s.antecedent && s.antecedent->sentence == a.antecedent->sentence;
                                 });
      if (src_it == doc.annotations.end()) continue;

      ContrastiveExample ex;
      ex.id = doc.id + ":" + std::to_string(a.sentence) + ":" + std::to_string(a.token);
      ex.doc_id = doc.id;
      ex.sentence = a.sentence;
      const std::size_t first = a.sentence >= max_context ? a.sentence - max_context : 0;
      for (std::size_t i = first; i < a.sentence; ++i) {
        ex.source_context.push_back(doc.sentences[i].source);
        ex.target_context.push_back(doc.sentences[i].target);
      }
      ex.source = doc.sentences[a.sentence].source;
      ex.correct = tgt;
      for (std::size_t g = 0; g < kGenderCount; ++g) {
        if (g == static_cast<std::size_t>(*gender)) continue;
        Tokens variant = tgt;
        variant[a.token] = lexicon.pronouns[g];
        ex.incorrect.push_back(std::move(variant));
      }
      ex.pronoun_index = a.token;
      ex.distance = d;
      ex.src_begin = src_it->antecedent->begin;
      ex.src_end = src_it->antecedent->end;
      ex.tgt_begin = a.antecedent->begin;
      ex.tgt_end = a.antecedent->end;
      by_class[static_cast<std::size_t>(*gender)].push_back(std::move(ex));
    }
  }

  ContrastiveSet result;
  std::size_t total = 0;
  for (const auto& c : by_class) total += c.size();
  if (total == 0) {
    result.warning = "no pronoun with antecedent distance 1.." + std::to_string(max_context);
    return result;
  }
  // Classes absent from the corpus are ignored when balancing the others.
  std::size_t quota = total;
  for (const auto& c : by_class)
    if (!c.empty()) quota = std::min(quota, c.size());

  Rng rng = Rng(seed).split("contrastive");
  std::vector<std::pair<std::size_t, std::size_t>> kept;  // (class, index)
  for (std::size_t g = 0; g < kGenderCount; ++g) {
    std::vector<std::size_t> idx(by_class[g].size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    idx.resize(std::min(quota, idx.size()));
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) kept.emplace_back(g, i);
  }
  // Interleave classes deterministically by corpus order of the kept items.
  std::sort(kept.begin(), kept.end(), [&](const auto& x, const auto& y) {
    return x.second != y.second ? x.second < y.second : x.first < y.first;
  });
  for (const auto& [g, i] : kept) result.examples.push_back(std::move(by_class[g][i]));
  return result;
}

ParallelCorpus contrastive_to_corpus(const std::vector<ContrastiveExample>& examples,
                                     const Lexicon& lexicon) {
  ParallelCorpus corpus;
  for (const auto& ex : examples) {
    ParallelDocument doc;
    doc.id = ex.id;
    for (std::size_t i = 0; i < ex.source_context.size(); ++i)
      doc.sentences.push_back({ex.source_context[i], ex.target_context[i]});
    doc.sentences.push_back({ex.source, ex.correct});
    const std::size_t cur = ex.source_context.size();
    const std::size_t ante = cur - ex.distance;
    std::size_t src_pronoun = 0;
    for (std::size_t i = 0; i < ex.source.size(); ++i)
      if (ex.source[i] == lexicon.source_pronoun) src_pronoun = i;
    doc.annotations.push_back({PhenomenonKind::pronoun, Side::source, cur, src_pronoun,
                               AntecedentSpan{ante, ex.src_begin, ex.src_end}});
    doc.annotations.push_back({PhenomenonKind::pronoun, Side::target, cur, ex.pronoun_index,
                               AntecedentSpan{ante, ex.tgt_begin, ex.tgt_end}});
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

}  // namespace docmt

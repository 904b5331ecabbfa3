#include <gtest/gtest.h>

#include <set>

#include "docmt/contrastive.hpp"
#include "docmt/errors.hpp"
#include "docmt/generator.hpp"
#include "docmt/tagger.hpp"

using namespace docmt;

namespace {

std::size_t count_kind(const std::vector<std::vector<PhenomenonTag>>& tags, PhenomenonKind kind) {
  std::size_t n = 0;
  for (const auto& d : tags)
    for (const auto& t : d) n += t.kind == kind;
  return n;
}

}  // namespace

TEST(Tagger, NoPhenomenaNoTags) {
  GenConfig cfg;
  cfg.pronoun_rate = 0.0;
  cfg.cohesion = false;
  auto corpus = generate_corpus(cfg, 2);
  for (Side side : {Side::source, Side::target})
    for (const auto& d : tag_corpus(corpus, side, Lexicon::standard())) EXPECT_TRUE(d.empty());
}

TEST(Tagger, RecoversGoldPronouns) {
  GenConfig cfg;
  cfg.distance_weights = {0.2, 0.2, 0.2, 0.2, 0.1, 0.1};
  cfg.formality = cfg.verb_form = true;
  auto corpus = generate_corpus(cfg, 3);
  for (Side side : {Side::source, Side::target}) {
    const auto tags = tag_corpus(corpus, side, Lexicon::standard());
    std::size_t gold = 0, found = 0;
    for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
      std::set<std::pair<std::size_t, std::size_t>> tagged;
      for (const auto& t : tags[d])
        if (t.kind == PhenomenonKind::pronoun) tagged.insert({t.sentence, t.token});
      for (const auto& a : corpus.documents[d].annotations) {
        if (a.kind != PhenomenonKind::pronoun || a.side != side || a.distance() < 1) continue;
        ++gold;
        found += tagged.count({a.sentence, a.token});
      }
    }
    ASSERT_GT(gold, 100u);
    EXPECT_EQ(found, gold) << to_string(side);
  }
}

TEST(Tagger, TargetTagsMatchGeneratorAnnotations) {
  GenConfig cfg;
  cfg.formality = cfg.verb_form = true;
  auto corpus = generate_corpus(cfg, 4);
  const auto tags = tag_corpus(corpus, Side::target, Lexicon::standard());
  for (PhenomenonKind k : {PhenomenonKind::cohesion, PhenomenonKind::formality, PhenomenonKind::verb_form}) {
    std::size_t gold = 0;
    for (const auto& d : corpus.documents)
      for (const auto& a : d.annotations) gold += a.kind == k && a.side == Side::target;
    EXPECT_EQ(count_kind(tags, k), gold) << to_string(k);
  }
}

TEST(Tagger, RepeatedEntityGivesCohesionTags) {
  std::vector<Tokens> doc{split_tokens("ich sehe die katze ."), split_tokens("die katze ist hell ."),
                          split_tokens("wir moegen die katze .")};
  auto tags = tag_document(doc, Side::target, Lexicon::standard());
  ASSERT_EQ(tags.size(), 2u);
  EXPECT_EQ(tags[0], (PhenomenonTag{PhenomenonKind::cohesion, 1, 1}));
  EXPECT_EQ(tags[1], (PhenomenonTag{PhenomenonKind::cohesion, 2, 3}));
}

TEST(Tagger, PronounNeedsReferentInEarlierSentence) {
  const Lexicon& lex = Lexicon::standard();
  auto tags = tag_document({split_tokens("sie ist hell .")}, Side::target, lex);
  EXPECT_TRUE(tags.empty());
  tags = tag_document({split_tokens("die lampe ist hell und sie bleibt hier .")}, Side::target, lex);
  EXPECT_TRUE(tags.empty());
  tags = tag_document({split_tokens("die lampe ist hier ."), split_tokens("Sie sind leer ."),
                       split_tokens("sie ist hell .")},
                      Side::target, lex);
  ASSERT_EQ(tags.size(), 2u);
  EXPECT_EQ(tags[0].kind, PhenomenonKind::formality);
  EXPECT_EQ(tags[1], (PhenomenonTag{PhenomenonKind::pronoun, 2, 0}));
}

TEST(PhenomenaStats, EmptyAndConsistent) {
  auto empty = phenomena_stats(ParallelCorpus{}, Lexicon::standard());
  EXPECT_EQ(empty.total_tokens, 0u);
  for (PhenomenonKind k : kAllKinds) EXPECT_EQ(empty.percentage(k), 0.0);

  auto corpus = generate_corpus(GenConfig{}, 5);
  auto stats = phenomena_stats(corpus, Lexicon::standard());
  auto tags = tag_corpus(corpus, Side::target, Lexicon::standard());
  for (PhenomenonKind k : kAllKinds) EXPECT_EQ(stats.counts.at(k), count_kind(tags, k));
}

TEST(PhenomenaStats, ContrastiveCorpusIsPronounDense) {
  GenConfig plain;
  plain.pronoun_rate = 0.1;
  auto test_set = generate_corpus(plain, 6);
  auto contrastive = make_contrastive_set(generate_corpus(GenConfig{}, 7), 7);
  auto derived = contrastive_to_corpus(contrastive.examples);
  const Lexicon& lex = Lexicon::standard();
  EXPECT_GT(phenomena_stats(derived, lex).percentage(PhenomenonKind::pronoun),
            phenomena_stats(test_set, lex).percentage(PhenomenonKind::pronoun));
}

TEST(Tagger, UnknownKindIsConfigError) { EXPECT_THROW(parse_kind("honorific"), ConfigError); }

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "docmt/decoding.hpp"
#include "docmt/errors.hpp"
#include "docmt/metrics.hpp"
#include "docmt/training.hpp"

using namespace docmt;

namespace {

std::vector<Tokens> sents(std::initializer_list<const char*> lines) {
  std::vector<Tokens> out;
  for (const char* l : lines) out.push_back(split_tokens(l));
  return out;
}

// Two-sentence documents whose second target sentence repeats a token that
// only the previous sentence carries.
ParallelCorpus copy_context_corpus(std::size_t docs, std::uint64_t seed) {
  const char* words[] = {"red", "blue", "green", "black", "white", "pink", "gray", "gold"};
  Rng rng(seed);
  ParallelCorpus c;
  for (std::size_t d = 0; d < docs; ++d) {
    const std::string w = words[rng.below(8)];
    ParallelDocument doc;
    doc.id = "doc" + std::to_string(d);
    doc.sentences.push_back({{"take", w, "."}, {"nimm", w, "."}});
    doc.sentences.push_back({{"again", "."}, {w, "."}});
    c.documents.push_back(std::move(doc));
  }
  return c;
}

}  // namespace

TEST(Bleu, IdentityAndDisjoint) {
  auto refs = sents({"the cat sat on the mat .", "a dog ran"});
  EXPECT_DOUBLE_EQ(bleu(refs, refs).score, 100.0);
  EXPECT_EQ(bleu(sents({"x y z w", "q r s t"}), sents({"a b c d", "e f g h"})).score, 0.0);
  EXPECT_THROW(bleu(refs, sents({"a"})), PairingError);
}

TEST(Bleu, HandCountedExamples) {
  auto r = bleu(sents({"the the the the the the the"}), sents({"the cat sat on the mat ."}));
  EXPECT_NEAR(r.precisions[0], 2.0 / 7.0, 1e-12);
  EXPECT_EQ(r.precisions[1], 0.0);
  EXPECT_EQ(r.score, 0.0);
  // 6/6, 4/5, 2/4, 1/3 matches; c=6, r=7.
  auto partial = bleu(sents({"the cat sat on mat ."}), sents({"the cat sat on the mat ."}));
  EXPECT_NEAR(partial.score, 51.15078115793243, 1e-3);
  auto short_hyp = bleu(sents({"the cat sat on the mat"}), sents({"the cat sat on the mat ."}));
  EXPECT_NEAR(short_hyp.score, 84.64817248906141, 1e-3);
}

TEST(Bleu, PairOrderInvariant) {
  auto hyp = sents({"the cat sat on mat .", "a dog ran home", "it is here ."});
  auto ref = sents({"the cat sat on the mat .", "a dog ran far home", "it is not here ."});
  const double base = bleu(hyp, ref).score;
  std::vector<std::size_t> perm{2, 0, 1};
  std::vector<Tokens> h2, r2;
  for (auto i : perm) {
    h2.push_back(hyp[i]);
    r2.push_back(ref[i]);
  }
  EXPECT_DOUBLE_EQ(bleu(h2, r2).score, base);
}

TEST(Cxmi, IdenticalBuildersGiveZero) {
  auto corpus = copy_context_corpus(4, 1);
  auto src = build_vocab(corpus, Side::source), tgt = build_vocab(corpus, Side::target);
  ModelConfig c;
  c.arch = Architecture::concat_2to2;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ffn = 16;
  c.src_vocab = src.size();
  c.tgt_vocab = tgt.size();
  Model m(c, 1);
  BatchBuilder with = [&](const ParallelDocument& d, std::size_t i) {
    return build_batch(Layout::concat, d, i, 1, src, tgt);
  };
  auto r = cxmi(m, corpus, with, with);
  EXPECT_EQ(r.mean_delta, 0.0);
  EXPECT_EQ(r.token_count, 4u * (4 + 3));
  BatchBuilder none = [&](const ParallelDocument& d, std::size_t i) {
    return build_batch(Layout::concat, d, i, 0, src, tgt);
  };
  EXPECT_EQ(cxmi(m, corpus, none, none).mean_delta, 0.0);
  // Mean is the token-weighted mean of per-sentence deltas.
  auto mixed = cxmi(m, corpus, with, none);
  double s = 0;
  for (const auto& d : mixed.sentences) s += d.mean_delta * d.tokens;
  EXPECT_NEAR(mixed.mean_delta, s / mixed.token_count, 1e-12);
}

TEST(Cxmi, CopyTaskRewardsCorrectContext) {
  auto train_set = copy_context_corpus(60, 2);
  auto test_set = copy_context_corpus(20, 3);
  auto src = build_vocab(train_set, Side::source), tgt = build_vocab(train_set, Side::target);
  ModelConfig c;
  c.arch = Architecture::concat_2to2;
  c.d_model = 32;
  c.n_heads = 2;
  c.d_ffn = 64;
  c.max_context = 1;
  c.src_vocab = src.size();
  c.tgt_vocab = tgt.size();
  Model m(c, 2);
  TrainConfig t;
  t.batch_tokens = 64;
  t.warmup = 50;
  t.lr_scale = 0.02;
  t.max_epochs = 40;
  t.patience = 6;
  train(m, train_set, test_set, src, tgt, t);

  BatchBuilder correct = [&](const ParallelDocument& d, std::size_t i) {
    return build_batch(Layout::concat, d, i, 1, src, tgt);
  };
  BatchBuilder none = [&](const ParallelDocument& d, std::size_t i) {
    return build_batch(Layout::concat, d, i, 0, src, tgt);
  };
  // Context taken from the next document instead.
  BatchBuilder shuffled = [&](const ParallelDocument& d, std::size_t i) {
    if (i == 0) return none(d, i);
    std::size_t idx = 0;
    while (test_set.documents[idx].id != d.id) ++idx;
    const auto& other = test_set.documents[(idx + 1) % test_set.documents.size()];
    ParallelDocument mixed = d;
    mixed.sentences[0] = other.sentences[0];
    return build_batch(Layout::concat, mixed, i, 1, src, tgt);
  };
  const double with = cxmi(m, test_set, correct, none).mean_delta;
  const double wrong = cxmi(m, test_set, shuffled, none).mean_delta;
  EXPECT_GT(with, 0.0);
  EXPECT_LT(wrong, with);
}

TEST(ContrastiveAccuracy, TieRuleAndOracle) {
  ContrastiveExample ex;
  ex.correct = split_tokens("sie ist hell .");
  ex.incorrect = {split_tokens("er ist hell ."), split_tokens("es ist hell .")};
  ex.pronoun_index = 0;
  std::vector<ContrastiveExample> set(5, ex);
  EXPECT_EQ(contrastive_accuracy(set, [](const ContrastiveExample&, const Tokens&) { return -1.0; }).accuracy, 0.0);
  auto oracle = contrastive_accuracy(
      set, [](const ContrastiveExample& e, const Tokens& cand) { return cand == e.correct ? 0.0 : -1.0; });
  EXPECT_EQ(oracle.accuracy, 1.0);
  EXPECT_EQ(oracle.per_class.at("sie"), (std::pair<std::size_t, std::size_t>{5, 5}));
  EXPECT_THROW(contrastive_accuracy({}, [](const ContrastiveExample&, const Tokens&) { return 0.0; }),
               ValidationError);
}

TEST(PhenomenaF1, WorkedExample) {
  auto f = tagged_word_f1({{"sie"}}, {{"sie", "es"}});
  EXPECT_EQ(f.precision, 0.5);
  EXPECT_EQ(f.recall, 1.0);
  EXPECT_EQ(f.f1, 2.0 / 3.0);
  auto dropped = tagged_word_f1({{"sie"}, {"er", "er"}}, {{}, {}});
  EXPECT_EQ(dropped.recall, 0.0);
  EXPECT_EQ(dropped.f1, 0.0);
  // Multiset matching: one hypothesis occurrence consumes one reference occurrence.
  auto multi = tagged_word_f1({{"er"}}, {{"er", "er"}});
  EXPECT_EQ(multi.matched, 1u);
  EXPECT_EQ(tagged_word_f1({{}}, {{}}).f1, 1.0);
}

TEST(PhenomenaF1, IdentityAndDroppedWords) {
  GenConfig cfg;
  cfg.formality = cfg.verb_form = true;
  cfg.n_docs = 30;
  auto corpus = generate_corpus(cfg, 8);
  std::vector<std::vector<Tokens>> hyp, dropped;
  const Lexicon& lex = Lexicon::standard();
  for (const auto& d : corpus.documents) {
    hyp.emplace_back();
    dropped.emplace_back();
    for (const auto& s : d.sentences) {
      hyp.back().push_back(s.target);
      Tokens kept;
      for (const auto& w : s.target)
        if (!lex.pronoun_gender(w)) kept.push_back(w);
      dropped.back().push_back(kept);
    }
  }
  for (const auto& [kind, f] : phenomena_f1(corpus, hyp, lex)) {
    EXPECT_EQ(f.f1, 1.0) << to_string(kind);
    EXPECT_GT(f.ref_tagged, 0u) << to_string(kind);
  }
  auto f = phenomena_f1(corpus, dropped, lex).at(PhenomenonKind::pronoun);
  EXPECT_EQ(f.recall, 0.0);
  EXPECT_EQ(f.f1, 0.0);
}

TEST(Perplexity, UniformModelGivesVocabularySize) {
  auto corpus = copy_context_corpus(3, 4);
  auto src = build_vocab(corpus, Side::source), tgt = build_vocab(corpus, Side::target);
  ModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ffn = 8;
  c.src_vocab = src.size();
  c.tgt_vocab = tgt.size();
  Model m(c, 1);
  for (auto& p : m.parameters())
    if (p.name == "out.w" || p.name == "out.b")
      for (double& v : p.value.mutable_data()) v = 0.0;
  EXPECT_NEAR(perplexity(m, corpus, src, tgt, 0), static_cast<double>(tgt.size()), 1e-9);
}

TEST(MetricReport, FixedFormatting) {
  MetricReport r;
  r.add("bleu", "concat.correct", 23.3);
  r.add("cxmi", "concat.random", -0.32);
  EXPECT_EQ(r.tsv(), "bleu\tconcat.correct\t23.300000\ncxmi\tconcat.random\t-0.320000\n");
  EXPECT_EQ(r.summary(), "bleu.concat.correct=23.300000\ncxmi.concat.random=-0.320000\n");
}

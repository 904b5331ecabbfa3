#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "docmt/contrastive.hpp"
#include "docmt/decoding.hpp"
#include "docmt/errors.hpp"
#include "docmt/generator.hpp"
#include "docmt/ops.hpp"
#include "docmt/training.hpp"

using namespace docmt;

namespace {

struct Data {
  ParallelCorpus corpus;
  Vocabulary src, tgt;
};

const Data& data() {
  static const Data d = [] {
    Data x;
    GenConfig cfg;
    cfg.n_docs = 4;
    x.corpus = generate_corpus(cfg, 31);
    // Put a document with an inter-sentential pronoun first; the overfit tests use it.
    auto has_pronoun = [](const ParallelDocument& doc) {
      return std::any_of(doc.annotations.begin(), doc.annotations.end(), [](const Annotation& a) {
        return a.kind == PhenomenonKind::pronoun && a.distance() >= 1;
      });
    };
    auto it = std::find_if(x.corpus.documents.begin(), x.corpus.documents.end(), has_pronoun);
    std::rotate(x.corpus.documents.begin(), it, x.corpus.documents.end());
    x.src = build_vocab(x.corpus, Side::source);
    x.tgt = build_vocab(x.corpus, Side::target);
    return x;
  }();
  return d;
}

ModelConfig config(Architecture arch) {
  ModelConfig c;
  c.arch = arch;
  c.d_model = 32;
  c.n_heads = 2;
  c.d_ffn = 64;
  c.dropout = 0.0;
  c.src_vocab = data().src.size();
  c.tgt_vocab = data().tgt.size();
  return c;
}

// Concat model fit to the first document of the corpus.
const Model& overfit_model() {
  static const Model m = [] {
    Model model(config(Architecture::concat_2to2), 11);
    ParallelCorpus one;
    one.documents.push_back(data().corpus.documents[0]);
    TrainConfig t;
    t.batch_tokens = 64;
    t.warmup = 50;
    t.lr_scale = 0.02;
    t.label_smoothing = 0.0;
    t.max_epochs = 150;
    t.patience = 1000;
    train(model, one, one, data().src, data().tgt, t);
    return model;
  }();
  return m;
}

}  // namespace

TEST(Decoding, ContextModesAgreeWithoutContext) {
  Model m(config(Architecture::concat_2to2), 1);
  const auto& doc = data().corpus.documents[1];
  TranslateOptions opt;
  opt.k = 0;
  std::vector<std::vector<Tokens>> outs;
  for (ContextMode mode : {ContextMode::correct, ContextMode::random, ContextMode::none}) {
    opt.mode = mode;
    outs.push_back(translate_document(m, doc, data().src, data().tgt, opt).sentences);
  }
  EXPECT_EQ(outs[0], outs[1]);
  EXPECT_EQ(outs[0], outs[2]);
}

TEST(Decoding, RandomContextIsSeededAndLengthPreserving) {
  const auto& doc = data().corpus.documents[0];
  TranslationCache cache;
  for (std::size_t j = 0; j < doc.sentences.size(); ++j) cache[j] = doc.sentences[j].target;
  auto correct = gather_context(doc, 6, 4, data().src, data().tgt, ContextMode::correct,
                                TargetContextSource::generated, &cache, 5);
  auto random = gather_context(doc, 6, 4, data().src, data().tgt, ContextMode::random,
                               TargetContextSource::generated, &cache, 5);
  ASSERT_EQ(random.source.size(), 4u);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(random.source[j].size(), correct.source[j].size());
    EXPECT_EQ(random.target[j].size(), correct.target[j].size());
    for (auto id : random.target[j]) EXPECT_FALSE(Vocabulary::is_reserved(id));
  }
  EXPECT_NE(random.source, correct.source);

  Model m(config(Architecture::multi_encoder), 2);
  TranslateOptions opt;
  opt.k = 3;
  opt.mode = ContextMode::random;
  opt.seed = 9;
  auto a = translate_document(m, doc, data().src, data().tgt, opt);
  auto b = translate_document(m, doc, data().src, data().tgt, opt);
  EXPECT_EQ(a.sentences, b.sentences);
}

TEST(Decoding, ConcatOutputHasNoSeparator) {
  for (const Model* m : {&overfit_model()}) {
    TranslateOptions opt;
    opt.k = 3;
    for (const auto& doc : data().corpus.documents) {
      auto t = translate_document(*m, doc, data().src, data().tgt, opt);
      for (const auto& s : t.sentences)
        for (const auto& w : s) EXPECT_NE(w, "<sep>");
    }
  }
  EXPECT_EQ(extract_current({5, 6, 3, 7, 3}, {8, 9}), (TokenIds{8, 9}));
  EXPECT_EQ(extract_current({}, {8, 3, 9}), (TokenIds{9}));
}

TEST(Decoding, OverfitModelReproducesDocument) {
  TranslateOptions opt;
  opt.k = 3;
  const auto& doc = data().corpus.documents[0];
  auto t = translate_document(overfit_model(), doc, data().src, data().tgt, opt);
  std::size_t exact = 0;
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) exact += t.sentences[i] == doc.sentences[i].target;
  EXPECT_GE(exact, doc.sentences.size() - 1);
}

TEST(Decoding, CausallyConsistentContext) {
  const Model& m = overfit_model();
  const auto& doc = data().corpus.documents[2];
  TranslateOptions opt;
  opt.k = 2;
  auto full = translate_document(m, doc, data().src, data().tgt, opt);
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    TranslationCache earlier;
    for (std::size_t j = 0; j < i; ++j) earlier[j] = full.cache.at(j);
    auto ctx = gather_context(doc, i, 2, data().src, data().tgt, ContextMode::correct,
                              TargetContextSource::generated, &earlier, 0);
    const TokenIds src = data().src.encode(doc.sentences[i].source);
    auto batch = assemble_batch(Layout::concat, ctx.source, src, ctx.target, {});
    auto h = greedy_decode(m, batch, max_decode_length(src.size()));
    TokenIds forced(batch.target_in.begin() + 1, batch.target_in.end());
    EXPECT_EQ(data().tgt.decode(extract_current(forced, h.tokens)), full.sentences[i]);
  }
}

TEST(Decoding, BeamOneEqualsGreedyAndWiderBeamScoresNoWorse) {
  const Model& m = overfit_model();
  for (const auto& doc : data().corpus.documents)
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      auto b = build_batch(Layout::concat, doc, i, 2, data().src, data().tgt);
      b.target_in.resize(1 + b.target_context_len);
      const std::size_t max_len = max_decode_length(doc.sentences[i].source.size());
      auto g = greedy_decode(m, b, max_len);
      auto b1 = beam_decode(m, b, 1, max_len);
      EXPECT_EQ(g.tokens, b1.tokens);
      EXPECT_EQ(g.logprob, b1.logprob);
      auto b4 = beam_decode(m, b, 4, max_len);
      EXPECT_GE(b4.normalized(), g.normalized() - 1e-12);
    }
}

TEST(Decoding, MaxLengthTerminates) {
  Model m(config(Architecture::sentence), 3);
  const auto& doc = data().corpus.documents[0];
  for (std::size_t i = 0; i < 3; ++i) {
    auto b = assemble_batch(Layout::sentence, {}, data().src.encode(doc.sentences[i].source), {}, {});
    auto g = greedy_decode(m, b, 5);
    EXPECT_LE(g.tokens.size(), 5u);
    auto h = beam_decode(m, b, 3, 5);
    EXPECT_LE(h.tokens.size(), 5u);
  }
  EXPECT_EQ(max_decode_length(7), 22u);
  TranslateOptions opt;
  opt.beam = 0;
  EXPECT_THROW(translate_document(m, doc, data().src, data().tgt, opt), ConfigError);
}

TEST(ForceScore, SingleEosTarget) {
  Model m(config(Architecture::sentence), 4);
  auto b = assemble_batch(Layout::sentence, {}, data().src.encode({"the", "dog", "."}), {}, {});
  auto s = force_score(m, b);
  ASSERT_EQ(s.token_logprobs.size(), 1u);
  NoGradGuard ng;
  Tensor lp = ops::log_softmax(m.forward(b));
  EXPECT_NEAR(s.total, lp.at(0, Vocabulary::kEos), 1e-12);
}

TEST(ForceScore, CaptureInvariantAndExcludesContext) {
  Model m(config(Architecture::concat_2to2), 5);
  const auto& doc = data().corpus.documents[1];
  auto b = build_batch(Layout::concat, doc, 4, 3, data().src, data().tgt);
  ForwardTrace trace;
  auto plain = force_score(m, b);
  auto traced = force_score(m, b, &trace);
  EXPECT_EQ(plain.total, traced.total);
  EXPECT_EQ(plain.token_logprobs.size(), doc.sentences[4].target.size() + 1);
}

TEST(ForceScore, OverfitModelPrefersCorrectPronoun) {
  const Model& m = overfit_model();
  ParallelCorpus one;
  one.documents.push_back(data().corpus.documents[0]);
  auto set = make_contrastive_set(one, 1);
  ASSERT_FALSE(set.examples.empty());
  for (const auto& ex : set.examples) {
    std::vector<TokenIds> sc, tc;
    for (const auto& s : ex.source_context) sc.push_back(data().src.encode(s));
    for (const auto& s : ex.target_context) tc.push_back(data().tgt.encode(s));
    const TokenIds src = data().src.encode(ex.source);
    const double good = force_score(m, assemble_batch(Layout::concat, sc, src, tc, data().tgt.encode(ex.correct))).total;
    for (const auto& wrong : ex.incorrect)
      EXPECT_GT(good, force_score(m, assemble_batch(Layout::concat, sc, src, tc, data().tgt.encode(wrong))).total);
  }
}

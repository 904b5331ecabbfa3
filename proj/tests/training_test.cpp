#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "docmt/errors.hpp"
#include "docmt/generator.hpp"
#include "docmt/ops.hpp"
#include "docmt/training.hpp"

using namespace docmt;

namespace {

ModelConfig small_config(Architecture arch, const Vocabulary& src, const Vocabulary& tgt) {
  ModelConfig c;
  c.arch = arch;
  c.d_model = 32;
  c.n_heads = 2;
  c.d_ffn = 64;
  c.src_vocab = src.size();
  c.tgt_vocab = tgt.size();
  return c;
}

// Target side replaced by the source side.
ParallelCorpus copy_task(std::size_t docs, std::uint64_t seed) {
  GenConfig cfg;
  cfg.n_docs = docs;
  cfg.sents_per_doc = 12;
  auto corpus = generate_corpus(cfg, seed);
  for (auto& d : corpus.documents) {
    d.annotations.clear();
    for (auto& s : d.sentences) s.target = s.source;
  }
  return corpus;
}

}  // namespace

TEST(LrSchedule, Shape) {
  const std::size_t w = 400;
  const double scale = 0.04;
  EXPECT_DOUBLE_EQ(1.0 / std::sqrt(400.0), 400.0 * std::pow(400.0, -1.5));
  EXPECT_NEAR(lr_at(4 * w, w, scale), scale / (2.0 * std::sqrt(400.0)), 1e-15);
  for (std::size_t s = 1; s < w; ++s) EXPECT_LT(lr_at(s, w, scale), lr_at(s + 1, w, scale));
  for (std::size_t s = w; s < 3 * w; ++s) EXPECT_GT(lr_at(s, w, scale), lr_at(s + 1, w, scale));
  EXPECT_THROW(lr_at(0, w, scale), ConfigError);
}

TEST(Adam, HandTraceOnScalarQuadratic) {
  // f(x) = x^2, grad 2x; reference values from 40-digit arithmetic.
  const double expected[3] = {0.9000000004999999975, 0.8004122286917921452, 0.7015862729460295452};
  std::vector<double> x{1.0};
  AdamMoments mom;
  for (std::size_t t = 1; t <= 3; ++t) {
    std::vector<double> g{2.0 * x[0]};
    adam_step(x, g, mom, t, 0.1, 0.9, 0.999, 1e-8);
    EXPECT_NEAR(x[0], expected[t - 1], 1e-12) << "step " << t;
  }
}

TEST(Adam, ZeroGradientAndMomentDecay) {
  std::vector<double> x{0.5, -2.0};
  AdamMoments mom;
  adam_step(x, std::vector<double>{0.0, 0.0}, mom, 1, 0.1, 0.9, 0.98, 1e-9);
  EXPECT_EQ(x, (std::vector<double>{0.5, -2.0}));
  mom.m = {1.0, -1.0};
  mom.v = {4.0, 1.0};
  adam_step(x, std::vector<double>{0.0, 0.0}, mom, 2, 0.1, 0.9, 0.98, 1e-9);
  EXPECT_DOUBLE_EQ(mom.m[0], 0.9);
  EXPECT_DOUBLE_EQ(mom.v[0], 4.0 * 0.98);
}

TEST(Adam, ConstantGradientStepApproachesLr) {
  std::vector<double> x{0.0};
  AdamMoments mom;
  double prev = 0.0;
  for (std::size_t t = 1; t <= 2000; ++t) {
    adam_step(x, std::vector<double>{3.0}, mom, t, 0.01, 0.9, 0.98, 1e-9);
    const double delta = x[0] - prev;
    prev = x[0];
    EXPECT_LT(delta, 0.0);
    if (t > 100) EXPECT_NEAR(-delta, 0.01, 1e-8);
  }
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  std::vector<double> x{1.0, 2.0};
  AdamMoments mom;
  try {
    adam_step(x, std::vector<double>{0.0, NAN}, mom, 1, 0.1, 0.9, 0.98, 1e-9, "dec.0.ffn1.w");
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("dec.0.ffn1.w"), std::string::npos);
  }
}

TEST(Training, ContextSizesAreUniform) {
  Rng rng(77);
  const std::size_t n = 6000, K = 5;
  const auto ks = sample_context_sizes(n, K, rng);
  std::vector<std::size_t> hist(K + 1, 0);
  for (auto k : ks) ++hist[k];
  const double p = 1.0 / (K + 1);
  const double sigma = std::sqrt(n * p * (1 - p));
  for (auto h : hist) EXPECT_LT(std::abs(static_cast<double>(h) - n * p), 3 * sigma);
}

TEST(Training, ConcatLossCountsContextTokens) {
  GenConfig cfg;
  cfg.n_docs = 2;
  auto corpus = generate_corpus(cfg, 3);
  auto src = build_vocab(corpus, Side::source), tgt = build_vocab(corpus, Side::target);
  Model m(small_config(Architecture::concat_2to2, src, tgt), 1);
  auto b = build_batch(Layout::concat, corpus.documents[0], 4, 3, src, tgt);
  auto ce = ops::cross_entropy(m.forward(b), b.target_out, 0.0, Vocabulary::kPad);
  EXPECT_EQ(ce.token_count, b.target_out.size());
  long double sum = 0;
  for (double lp : ce.token_logprobs) sum -= lp;
  EXPECT_NEAR(ce.loss.item(), static_cast<double>(sum / ce.token_count), 1e-12);
}

TEST(Training, CopyTaskSmoke) {
  auto train_set = copy_task(10, 5);
  auto valid_set = copy_task(4, 6);
  auto src = build_vocab(train_set, Side::source);
  Model m(small_config(Architecture::sentence, src, src), 2);
  TrainConfig t;
  t.batch_tokens = 64;
  t.warmup = 100;
  t.lr_scale = 0.03;
  t.max_epochs = 200;
  t.patience = 20;
  t.eval_interval = 1.0;
  auto r = train(m, train_set, valid_set, src, src, t);
  EXPECT_LT(r.best_valid_ppl, 1.5) << r.steps << " steps";
  // The returned model is the best checkpoint.
  const double final_ppl = validation_perplexity(m, valid_set, src, src, 0);
  EXPECT_DOUBLE_EQ(final_ppl, r.best_valid_ppl);
  for (const auto& rec : r.log) EXPECT_LE(r.best_valid_ppl, rec.valid_ppl);
}

TEST(Training, PlateauStopsAtFirstNonImprovingEval) {
  auto corpus = copy_task(4, 8);
  auto src = build_vocab(corpus, Side::source);
  Model m(small_config(Architecture::sentence, src, src), 3);
  TrainConfig t;
  t.lr_scale = 0.0;
  t.patience = 1;
  auto r = train(m, corpus, corpus, src, src, t);
  ASSERT_EQ(r.log.size(), 2u);
  EXPECT_TRUE(r.early_stopped);
  EXPECT_EQ(r.log[0].valid_ppl, r.log[1].valid_ppl);
}

TEST(Training, DeterministicLogAndHistogram) {
  GenConfig cfg;
  cfg.n_docs = 6;
  auto corpus = generate_corpus(cfg, 9);
  auto split = split_documents(corpus, 5, 1);
  auto src = build_vocab(split.train, Side::source), tgt = build_vocab(split.train, Side::target);
  TrainConfig t;
  t.max_epochs = 1;
  std::string logs[2];
  TrainResult results[2];
  for (int run = 0; run < 2; ++run) {
    Model m(small_config(Architecture::concat_2to2, src, tgt), 4);
    std::ostringstream out;
    results[run] = train(m, split.train, split.valid, src, tgt, t, &out);
    logs[run] = out.str();
  }
  EXPECT_EQ(logs[0], logs[1]);
  EXPECT_FALSE(logs[0].empty());
  std::istringstream in(logs[0]);
  EXPECT_EQ(parse_training_log(in).size(), results[0].log.size());
  std::size_t total = 0;
  for (auto h : results[0].context_histogram) total += h;
  EXPECT_EQ(total, split.train.sentence_count());
  EXPECT_EQ(results[0].context_histogram.size(), 6u);
}

TEST(TrainConfig, RoundTripAndValidation) {
  TrainConfig t;
  t.lr_scale = 0.0123;
  t.patience = 3;
  auto back = TrainConfig::from_kv(t.to_kv());
  EXPECT_EQ(back.to_kv(), t.to_kv());
  t.warmup = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  EXPECT_THROW(TrainConfig::from_kv({{"beta1", "abc"}}), ConfigError);
}

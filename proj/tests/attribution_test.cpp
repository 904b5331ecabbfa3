#include <gtest/gtest.h>

#include "docmt/attribution.hpp"
#include "docmt/errors.hpp"
#include "docmt/generator.hpp"
#include "trace_fixture.hpp"

using namespace docmt;
using docmt::testing::random_layer;
using docmt::testing::random_trace;

namespace {

void expect_row_stochastic(const Matrix& m, double tol) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      EXPECT_GE(m(i, j), 0.0);
      s += m(i, j);
    }
    EXPECT_NEAR(s, 1.0, tol) << "row " << i;
  }
}

struct Toy {
  ParallelCorpus corpus;
  Vocabulary src, tgt;
  std::vector<ContrastiveExample> examples;
  Toy() {
    GenConfig cfg;
    cfg.n_docs = 20;
    corpus = generate_corpus(cfg, 12);
    src = build_vocab(corpus, Side::source);
    tgt = build_vocab(corpus, Side::target);
    examples = make_contrastive_set(corpus, 12).examples;
  }
  Model model(Architecture arch) const {
    ModelConfig c;
    c.arch = arch;
    c.d_model = 16;
    c.n_heads = 2;
    c.d_ffn = 16;
    c.src_vocab = src.size();
    c.tgt_vocab = tgt.size();
    return Model(c, 3);
  }
};

}  // namespace

TEST(LayerContribution, UniformAttentionWithResidualBump) {
  Matrix uniform(3, 3, 1.0 / 3.0);
  Matrix c = layer_contribution({uniform}, {{1, 1, 1}}, {1, 1, 1});
  // Row i: 1/3 everywhere plus 1 on the diagonal, total 2.
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(c(i, j), (i == j ? 4.0 / 3.0 : 1.0 / 3.0) / 2.0, 1e-15);
}

TEST(LayerContribution, IdentityAttentionGivesIdentity) {
  Matrix c = layer_contribution({Matrix::identity(4), Matrix::identity(4)}, {{1, 2, 3, 4}, {9, 0.5, 2, 7}},
                                {0.3, 5, 0.01, 2});
  EXPECT_EQ(c, Matrix::identity(4));
}

TEST(LayerContribution, RandomRowsSumToOneAndZeroRowFails) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    auto at = random_layer(rng, 4, 4, 2, false);
    expect_row_stochastic(layer_contribution(at.weights, at.value_norms, at.residual_norms), 1e-12);
  }
  EXPECT_THROW(layer_contribution({Matrix::identity(2)}, {{0, 1}}, {0, 1}), NumericError);
  EXPECT_THROW(layer_contribution({Matrix::identity(2)}, {{1, 1, 1}}, {1, 1}), TraceError);
}

TEST(EncoderRollout, CompositionRules) {
  Rng rng(2);
  auto l1 = random_layer(rng, 5, 5, 2, false);
  const Matrix m1 = layer_contribution(l1.weights, l1.value_norms, l1.residual_norms);
  EXPECT_EQ(encoder_rollout({l1}), m1);
  AttentionTrace ident{{Matrix::identity(5)}, {std::vector<double>(5, 1.0)}, std::vector<double>(5, 1.0)};
  const Matrix two = encoder_rollout({l1, ident});
  for (std::size_t i = 0; i < m1.data.size(); ++i) EXPECT_NEAR(two.data[i], m1.data[i], 1e-15);
  auto l2 = random_layer(rng, 5, 5, 3, false);
  auto l3 = random_layer(rng, 5, 5, 1, false);
  const Matrix deep = encoder_rollout({l1, l2, l3});
  expect_row_stochastic(deep, 1e-9);
  const Matrix m2 = layer_contribution(l2.weights, l2.value_norms, l2.residual_norms);
  const Matrix m3 = layer_contribution(l3.weights, l3.value_norms, l3.residual_norms);
  const Matrix expected = multiply(m3, multiply(m2, m1));
  for (std::size_t i = 0; i < deep.data.size(); ++i) EXPECT_NEAR(deep.data[i], expected.data[i], 1e-14);
  EXPECT_THROW(encoder_rollout({l1, random_layer(rng, 4, 4, 2, false)}), TraceError);
  EXPECT_THROW(encoder_rollout({}), TraceError);
}

TEST(ComposeMultiEncoder, BlockDiagonal) {
  Rng rng(3);
  auto a = random_layer(rng, 3, 3, 2, false), b = random_layer(rng, 4, 4, 2, false),
       c = random_layer(rng, 2, 2, 2, false);
  const Matrix ca = encoder_rollout({a}), cb = encoder_rollout({b}), cc = encoder_rollout({c});
  EXPECT_EQ(compose_multi_encoder(Matrix(0, 0), cb, Matrix(0, 0)), cb);
  const Matrix full = compose_multi_encoder(ca, cb, cc);
  ASSERT_EQ(full.rows, 9u);
  auto block = [](std::size_t i) { return i < 3 ? 0 : i < 7 ? 1 : 2; };
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j)
      if (block(i) != block(j)) EXPECT_EQ(full(i, j), 0.0);
  expect_row_stochastic(full, 1e-12);
  EXPECT_THROW(compose_multi_encoder(Matrix(2, 3), cb, cc), DimensionError);
}

TEST(DecoderRollout, DegeneratePathAndStepZero) {
  ForwardTrace t;
  t.block_sizes = {3};
  t.encoder_positions = 3;
  t.decoder_positions = 2;
  Matrix one_hot(2, 3);
  one_hot(0, 1) = one_hot(1, 1) = 1.0;
  t.decoder.push_back({{{Matrix::identity(2)}, {{1, 1}}, {1, 1}}, {{one_hot}, {{1, 1, 1}}, {0, 0}}});
  Matrix r = decoder_rollout(t, Matrix::identity(3));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(r(i, j), j == 1 ? 1.0 : 0.0);

  Rng rng(4);
  ForwardTrace rt = random_trace(rng, {4}, 5, 2, 2);
  Matrix rr = decoder_rollout(rt, encoder_contributions(rt));
  expect_row_stochastic(rr, 1e-9);
  // Step 0 sees only encoder inputs and BOS; every step only earlier decoder inputs.
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 4 + i + 1; j < 9; ++j) EXPECT_EQ(rr(i, j), 0.0);
  EXPECT_THROW(decoder_rollout(rt, Matrix::identity(3)), TraceError);
}

TEST(DecoderRollout, HandBuiltAntecedentShare) {
  // Encoder: antecedent at 0, current source at 1; decoder BOS attends fully to 0.
  const double value = 3.0, residual = 1.0;
  ForwardTrace t;
  t.block_sizes = {2};
  t.encoder_positions = 2;
  t.decoder_positions = 1;
  t.encoders = {{{{Matrix::identity(2)}, {{1, 1}}, {1, 1}}}};
  Matrix cross(1, 2);
  cross(0, 0) = 1.0;
  t.decoder.push_back({{{Matrix::identity(1)}, {{1}}, {1}}, {{cross}, {{value, 5.0}}, {residual}}});
  t.segments = {{Segment::source_context, 0, 1}, {Segment::source, 1, 2}, {Segment::target_prefix, 2, 3}};
  auto report = attribution_report(t);
  auto share = supporting_context_share(report, 0, {0});
  EXPECT_NEAR(share.antecedent_pct, 100.0 * (1.0 - residual / (value + residual)), 1e-12);
  EXPECT_NEAR(share.context_pct + share.current_pct, 100.0, 1e-9);
}

TEST(DecoderRollout, RandomTracesAreDistributions) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const bool multi = trial % 2;
    std::vector<std::size_t> blocks = multi ? std::vector<std::size_t>{rng.below(4), 1 + rng.below(5), rng.below(4)}
                                            : std::vector<std::size_t>{1 + rng.below(8)};
    ForwardTrace t = random_trace(rng, blocks, 1 + rng.below(6), 1 + rng.below(3), 1 + rng.below(3));
    Matrix r = decoder_rollout(t, encoder_contributions(t));
    expect_row_stochastic(r, 1e-6);
    if (HasFailure()) break;
  }
}

TEST(Attribution, SentenceArchitectureHasNoContext) {
  Toy s;
  Model m = s.model(Architecture::sentence);
  ASSERT_FALSE(s.examples.empty());
  for (std::size_t i = 0; i < 5; ++i) {
    auto r = attribute_example(m, s.examples[i], 5, s.src, s.tgt);
    EXPECT_EQ(r.share.antecedent_pct, 0.0);
    EXPECT_EQ(r.share.context_pct, 0.0);
    EXPECT_NEAR(r.share.current_pct, 100.0, 1e-9);
  }
}

TEST(Attribution, ContextArchitecturesOnRealTraces) {
  Toy s;
  for (Architecture a : {Architecture::concat_2to2, Architecture::multi_encoder}) {
    Model m = s.model(a);
    for (std::size_t i = 0; i < 8; ++i) {
      const auto& ex = s.examples[i];
      auto r = attribute_example(m, ex, 5, s.src, s.tgt);
      EXPECT_GT(r.share.antecedent_pct, 0.0);
      EXPECT_LE(r.share.antecedent_pct, r.share.context_pct + 1e-9);
      EXPECT_NEAR(r.share.context_pct + r.share.current_pct, 100.0, 1e-6);
      if (ex.distance > 1) EXPECT_THROW(attribute_example(m, ex, ex.distance - 1, s.src, s.tgt), CoverageError);
      // Identical input gives a bit-identical report.
      EXPECT_EQ(attribute_example(m, ex, 5, s.src, s.tgt).distribution, r.distribution);
    }
  }
}

TEST(Attribution, PadPositionsCarryNoMass) {
  Toy s;
  Model m = s.model(Architecture::concat_2to2);
  auto batch = build_batch(Layout::concat, s.corpus.documents[0], 5, 3, s.src, s.tgt);
  auto base = attribute(m, batch);
  auto padded_batch = batch;
  pad_batch(padded_batch, batch.source.size() + 3, batch.target_in.size() + 2);
  auto padded = attribute(m, padded_batch);
  const std::size_t n = batch.source.size(), t = batch.target_in.size();
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(padded.distribution(i, j), base.distribution(i, j), 1e-12);
    for (std::size_t j = n; j < n + 3; ++j) EXPECT_EQ(padded.distribution(i, j), 0.0);
    for (std::size_t j = 0; j < t; ++j)
      EXPECT_NEAR(padded.distribution(i, n + 3 + j), base.distribution(i, n + j), 1e-12);
  }
}

TEST(Attribution, SummaryAndDump) {
  std::vector<ExampleAttribution> rs(3);
  rs[0] = {"a", "er", {10, 20, 80}, {}, {}};
  rs[1] = {"b", "er", {30, 40, 60}, {}, {}};
  rs[2] = {"c", "sie", {50, 60, 40}, {}, {}};
  auto s = summarize(rs);
  EXPECT_DOUBLE_EQ(s.mean.antecedent_pct, 30.0);
  EXPECT_DOUBLE_EQ(s.per_class.at("er").antecedent_pct, 20.0);
  EXPECT_DOUBLE_EQ(s.class_mean.antecedent_pct, 35.0);
  EXPECT_EQ(attribution_dump({rs[0]}), "a\t10.000000\t20.000000\t80.000000\n");
}

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "docmt/errors.hpp"
#include "docmt/generator.hpp"
#include "docmt/gradcheck.hpp"
#include "docmt/model.hpp"
#include "docmt/ops.hpp"

using namespace docmt;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  ParallelCorpus corpus;
  Vocabulary src, tgt;

  Fixture() {
    GenConfig cfg;
    cfg.n_docs = 6;
    corpus = generate_corpus(cfg, 21);
    src = build_vocab(corpus, Side::source);
    tgt = build_vocab(corpus, Side::target);
  }

  ModelConfig config(Architecture arch, std::size_t layers = 2, std::size_t d = 16) const {
    ModelConfig c;
    c.arch = arch;
    c.n_layers = layers;
    c.d_model = d;
    c.n_heads = 2;
    c.d_ffn = 24;
    c.src_vocab = src.size();
    c.tgt_vocab = tgt.size();
    return c;
  }

  SequenceBatch batch(Layout layout, std::size_t i, std::size_t k, std::size_t doc = 0) const {
    return build_batch(layout, corpus.documents[doc], i, k, src, tgt);
  }
};

bool same(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

std::size_t count(const TokenIds& ids, std::int32_t id) { return std::count(ids.begin(), ids.end(), id); }

}  // namespace

TEST(Model, SentenceLogitsShapeAndFinite) {
  Fixture fx;
  Model m(fx.config(Architecture::sentence), 1);
  auto b = fx.batch(Layout::sentence, 3, 5);
  EXPECT_TRUE(b.source_context.empty());
  Tensor logits = m.forward(b);
  EXPECT_EQ(logits.shape(), (Shape{b.target_in.size(), fx.tgt.size()}));
  for (double v : logits.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(BuildBatch, ContextCounts) {
  Fixture fx;
  for (Layout l : {Layout::sentence, Layout::concat, Layout::multi}) {
    auto b = fx.batch(l, 4, 0);
    EXPECT_EQ(count(b.source, Vocabulary::kSep), 0u);
    EXPECT_TRUE(b.source_context.empty() && b.target_context.empty());
    EXPECT_EQ(b.source_context_len, 0u);
  }
  auto c2 = fx.batch(Layout::concat, 4, 2);
  EXPECT_EQ(count(c2.source, Vocabulary::kSep), 2u);
  EXPECT_EQ(count(c2.target_in, Vocabulary::kSep), 2u);
  EXPECT_EQ(c2.target_in.size(), c2.target_out.size());
  // Target input is the output shifted right by one.
  EXPECT_TRUE(std::equal(c2.target_out.begin(), c2.target_out.end() - 1, c2.target_in.begin() + 1));
  EXPECT_EQ(c2.target_out[c2.score_begin - 1], Vocabulary::kSep);

  auto start = fx.batch(Layout::concat, 0, 5);
  EXPECT_EQ(start.k, 0u);
  EXPECT_EQ(count(start.source, Vocabulary::kSep), 0u);

  auto m3 = fx.batch(Layout::multi, 4, 3);
  EXPECT_EQ(count(m3.source_context, Vocabulary::kSep), 2u);
  EXPECT_EQ(count(m3.source, Vocabulary::kSep), 0u);
}

TEST(BuildBatch, GeneratedContextNeedsCache) {
  Fixture fx;
  const auto& doc = fx.corpus.documents[0];
  EXPECT_THROW(build_batch(Layout::concat, doc, 3, 2, fx.src, fx.tgt, TargetContextSource::generated),
               ContextError);
  TranslationCache cache{{1, {"x"}}, {2, {"y", "z"}}};
  auto b = build_batch(Layout::concat, doc, 3, 2, fx.src, fx.tgt, TargetContextSource::generated, &cache);
  EXPECT_EQ(b.target_context_len, 1 + 1 + 2 + 1);
}

TEST(Model, CaptureDoesNotChangeLogits) {
  Fixture fx;
  for (Architecture a : {Architecture::sentence, Architecture::concat_2to2, Architecture::multi_encoder}) {
    Model m(fx.config(a), 2);
    auto b = fx.batch(layout_of(a), 4, 3);
    ForwardTrace trace;
    Tensor with = m.forward(b, &trace);
    EXPECT_TRUE(same(with, m.forward(b)));
    for (const auto& layer : trace.decoder)
      for (const auto* at : {&layer.self, &layer.cross})
        for (const auto& w : at->weights)
          for (std::size_t i = 0; i < w.rows; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < w.cols; ++j) s += w(i, j);
            EXPECT_NEAR(s, 1.0, 1e-9);
          }
    // Segments partition all input positions.
    std::size_t pos = 0;
    for (const auto& seg : trace.segments) {
      EXPECT_EQ(seg.begin, pos);
      pos = seg.end;
    }
    EXPECT_EQ(pos, trace.encoder_positions + trace.decoder_positions);
  }
}

TEST(Model, CausalMask) {
  Fixture fx;
  Model m(fx.config(Architecture::concat_2to2), 3);
  auto b = fx.batch(Layout::concat, 3, 2);
  Tensor base = m.forward(b);
  const std::size_t t = b.target_in.size() / 2;
  auto changed = b;
  for (std::size_t j = t + 1; j < changed.target_in.size(); ++j)
    changed.target_in[j] = static_cast<std::int32_t>(Vocabulary::kReserved + (j % 5));
  Tensor other = m.forward(changed);
  const std::size_t v = fx.tgt.size();
  for (std::size_t r = 0; r <= t; ++r)
    for (std::size_t c = 0; c < v; ++c) EXPECT_EQ(base.at(r, c), other.at(r, c));
  bool later_differs = false;
  for (std::size_t r = t + 1; r < b.target_in.size(); ++r)
    for (std::size_t c = 0; c < v; ++c) later_differs |= base.at(r, c) != other.at(r, c);
  EXPECT_TRUE(later_differs);
}

TEST(Model, PadInvariance) {
  Fixture fx;
  for (Architecture a : {Architecture::sentence, Architecture::concat_2to2, Architecture::multi_encoder}) {
    Model m(fx.config(a), 4);
    auto b = fx.batch(layout_of(a), 5, 2);
    Tensor base = m.forward(b);
    auto padded = b;
    pad_batch(padded, b.source.size() + 4, b.target_in.size() + 3);
    padded.source_context.resize(padded.source_context.size() + 2, Vocabulary::kPad);
    Tensor other = m.forward(padded);
    for (std::size_t r = 0; r < base.rows(); ++r)
      for (std::size_t c = 0; c < base.cols(); ++c) EXPECT_EQ(base.at(r, c), other.at(r, c)) << to_string(a);
  }
}

TEST(Model, MultiEncoderBlocks) {
  Fixture fx;
  Model m(fx.config(Architecture::multi_encoder), 5);
  auto b = fx.batch(Layout::multi, 5, 3);
  EncoderMemory full = m.encode(b);
  ASSERT_EQ(full.block_sizes, (std::vector<std::size_t>{b.source_context.size(), b.source.size(),
                                                         b.target_context.size()}));
  const std::size_t s0 = b.source_context.size(), s1 = s0 + b.source.size();
  EncoderMemory alone = m.encode_multi({}, b.source, {});
  EXPECT_EQ(alone.block_sizes, (std::vector<std::size_t>{0, b.source.size(), 0}));
  EXPECT_TRUE(same(ops::slice_rows(full.states, s0, s1), alone.states));

  // Permuting the source context leaves the current-source block untouched.
  auto permuted = b;
  std::reverse(permuted.source_context.begin(), permuted.source_context.end());
  EncoderMemory perm = m.encode(permuted);
  EXPECT_TRUE(same(ops::slice_rows(perm.states, s0, s1), alone.states));
  EXPECT_FALSE(same(ops::slice_rows(perm.states, 0, s0), ops::slice_rows(full.states, 0, s0)));

  // Ablation: hiding the context blocks from cross-attention recovers the
  // context-free logits, so context reaches the decoder only through them.
  EncoderMemory hidden = full;
  for (std::size_t j = 0; j < hidden.key_pad.size(); ++j) hidden.key_pad[j] = j < s0 || j >= s1;
  Tensor ablated = m.decode(hidden, b.target_in);
  Tensor reference = m.decode(alone, b.target_in);
  for (std::size_t i = 0; i < ablated.size(); ++i) EXPECT_NEAR(ablated.data()[i], reference.data()[i], 1e-12);
  EXPECT_FALSE(same(m.decode(full, b.target_in), reference));
}

TEST(Model, LayoutAndLengthErrors) {
  Fixture fx;
  Model multi(fx.config(Architecture::multi_encoder), 6);
  Model concat(fx.config(Architecture::concat_2to2), 6);
  EXPECT_THROW(multi.forward(fx.batch(Layout::concat, 2, 1)), ArchitectureError);
  EXPECT_THROW(concat.forward(fx.batch(Layout::multi, 2, 1)), ArchitectureError);
  auto cfg = fx.config(Architecture::sentence);
  cfg.max_positions = 4;
  Model tiny(cfg, 6);
  EXPECT_THROW(tiny.forward(fx.batch(Layout::sentence, 2, 0)), LengthError);
  auto bad = fx.config(Architecture::sentence);
  bad.n_heads = 3;
  EXPECT_THROW(Model(bad, 1), ConfigError);
}

TEST(Model, LossGradientOnTwoSentenceBatch) {
  Fixture fx;
  for (Architecture a : {Architecture::sentence, Architecture::concat_2to2, Architecture::multi_encoder}) {
    auto cfg = fx.config(a, 2, 8);
    cfg.dropout = 0.0;
    Model m(cfg, 7);
    auto b1 = fx.batch(layout_of(a), 1, 1);
    auto b2 = fx.batch(layout_of(a), 2, 1, 1);
    auto loss = [&] {
      Tensor l1 = ops::cross_entropy(m.forward(b1), b1.target_out, 0.1, Vocabulary::kPad).loss;
      Tensor l2 = ops::cross_entropy(m.forward(b2), b2.target_out, 0.1, Vocabulary::kPad).loss;
      return ops::scale(ops::add(l1, l2), 0.5);
    };
    std::vector<Tensor> leaves;
    for (auto& p : m.parameters()) leaves.push_back(p.value);
    Rng rng(3);
    // Small step so no ReLU pre-activation crosses zero inside the stencil.
    auto report = gradient_check_leaves(loss, leaves, 1e-7, 1e-4, 6, &rng);
    EXPECT_TRUE(report.passed) << to_string(a) << " max rel err " << report.max_rel_error;
    EXPECT_GT(report.checked, 100u);
  }
}

TEST(Checkpoint, BitExactRoundTrip) {
  Fixture fx;
  fs::path dir = fs::temp_directory_path() / "docmt_model_test";
  fs::create_directories(dir);
  for (Architecture a : {Architecture::concat_2to2, Architecture::multi_encoder}) {
    auto cfg = fx.config(a);
    cfg.share_context_embeddings = false;
    cfg.pre_norm = a == Architecture::concat_2to2;
    Model m(cfg, 8);
    save_checkpoint(dir / "m.ckpt", m, fx.src, fx.tgt);
    LoadedModel loaded = load_checkpoint(dir / "m.ckpt");
    EXPECT_EQ(loaded.model.config(), cfg);
    EXPECT_EQ(loaded.src_vocab, fx.src);
    EXPECT_EQ(loaded.tgt_vocab, fx.tgt);
    ASSERT_EQ(loaded.model.parameters().size(), m.parameters().size());
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
      EXPECT_EQ(loaded.model.parameters()[i].name, m.parameters()[i].name);
      EXPECT_TRUE(same(loaded.model.parameters()[i].value, m.parameters()[i].value));
    }
    auto b = fx.batch(layout_of(a), 3, 2);
    EXPECT_TRUE(same(loaded.model.forward(b), m.forward(b)));
  }
  auto size = fs::file_size(dir / "m.ckpt");
  fs::resize_file(dir / "m.ckpt", size - 16);
  EXPECT_THROW(load_checkpoint(dir / "m.ckpt"), CheckpointError);
}

TEST(Model, PositionalEncodingValues) {
  Tensor pe = positional_encoding(3, 4);
  EXPECT_EQ(pe.at(0, 0), 0.0);
  EXPECT_EQ(pe.at(0, 1), 1.0);
  EXPECT_NEAR(pe.at(2, 0), std::sin(2.0), 1e-15);
  EXPECT_NEAR(pe.at(2, 3), std::cos(2.0 / 100.0), 1e-15);
}

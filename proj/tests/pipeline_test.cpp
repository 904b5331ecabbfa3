#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "docmt/corpus_io.hpp"
#include "docmt/errors.hpp"
#include "docmt/pipeline.hpp"

using namespace docmt;

namespace {

DataConfig small_config() {
  DataConfig d = DataConfig::defaults();
  d.corpus.n_docs = 12;
  d.n_train = 8;
  d.n_valid = 2;
  d.sparse.n_docs = 3;
  d.sparse.pronoun_rate = 0.5;
  d.contrastive.n_docs = 12;
  return d;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("docmt_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(GenConfigKv, RoundTripsEveryField) {
  GenConfig g;
  g.n_docs = 7;
  g.pronoun_rate = 0.125;
  g.pronoun_cue_rate = 0.3;
  g.distance_weights = {0.1, 0.3, 0.2, 0.2, 0.1, 0.1};
  g.gender_weights = {1, 2, 3};
  g.formality = true;
  g.verb_form = true;
  g.cohesion = false;
  const GenConfig back = gen_config_from_kv(gen_config_to_kv(g));
  EXPECT_EQ(gen_config_to_kv(back), gen_config_to_kv(g));
  EXPECT_EQ(back.distance_weights, g.distance_weights);
  EXPECT_EQ(back.pronoun_rate, g.pronoun_rate);
}

TEST(GenConfigKv, RejectsUnknownAndMalformedValues) {
  EXPECT_THROW(gen_config_from_kv({{"n_doc", "3"}}), ConfigError);
  EXPECT_THROW(gen_config_from_kv({{"pronoun_rate", "high"}}), ConfigError);
  EXPECT_THROW(gen_config_from_kv({{"distance_weights", "1,0"}}), ConfigError);
  EXPECT_THROW(gen_config_from_kv({{"cohesion", "yes"}}), ConfigError);
}

TEST(DataConfig, PrefixedKeysRoundTrip) {
  DataConfig d = small_config();
  d.sparse.pronoun_cue_rate = 0.5;
  const DataConfig back = DataConfig::from_kv(d.to_kv());
  EXPECT_EQ(back.to_kv(), d.to_kv());
  EXPECT_THROW(DataConfig::from_kv({{"pronoun_rate", "0.1"}}), ConfigError);
  DataConfig bad = small_config();
  bad.n_train = 11;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Dataset, SaveLoadPreservesStructure) {
  const Dataset d = generate_dataset(small_config(), 4);
  EXPECT_EQ(d.train.documents.size(), 8u);
  EXPECT_EQ(d.valid.documents.size(), 2u);
  EXPECT_EQ(d.test.documents.size(), 2u);
  ASSERT_FALSE(d.contrastive.empty());
  const fs::path dir = temp_dir("dataset");
  const auto files = save_dataset(dir, d);
  ASSERT_EQ(files.size(), dataset_file_names().size());
  for (std::size_t i = 0; i < files.size(); ++i) EXPECT_EQ(files[i].filename().string(), dataset_file_names()[i]);
  const Dataset back = load_dataset(dir);
  EXPECT_EQ(back.train, d.train);
  EXPECT_EQ(back.valid, d.valid);
  EXPECT_EQ(back.test, d.test);
  EXPECT_EQ(back.sparse, d.sparse);
  EXPECT_EQ(back.contrastive, d.contrastive);
  EXPECT_EQ(back.contrastive_corpus, d.contrastive_corpus);
}

TEST(Dataset, SameSeedSameBytes) {
  const fs::path a = temp_dir("seed_a"), b = temp_dir("seed_b");
  const auto fa = save_dataset(a, generate_dataset(small_config(), 9));
  const auto fb = save_dataset(b, generate_dataset(small_config(), 9));
  for (std::size_t i = 0; i < fa.size(); ++i) EXPECT_EQ(file_sha256(fa[i]), file_sha256(fb[i])) << fa[i];
  const auto fc = save_dataset(temp_dir("seed_c"), generate_dataset(small_config(), 10));
  EXPECT_NE(file_sha256(fa[0]), file_sha256(fc[0]));
}

TEST(Pareto, DominanceDefinition) {
  auto single = pareto({{"a", 50, 2}});
  EXPECT_FALSE(single[0].dominated);

  auto two = pareto({{"A", 50, 2}, {"B", 60, 3}});
  EXPECT_TRUE(two[0].dominated);
  EXPECT_FALSE(two[1].dominated);

  // Equal points do not dominate each other; a trade-off leaves both on the front.
  auto tie = pareto({{"A", 50, 2}, {"B", 50, 2}, {"C", 40, 9}});
  EXPECT_FALSE(tie[0].dominated);
  EXPECT_FALSE(tie[1].dominated);
  EXPECT_FALSE(tie[2].dominated);

  // Better in one coordinate, equal in the other.
  auto edge = pareto({{"A", 50, 2}, {"B", 50, 3}});
  EXPECT_TRUE(edge[0].dominated);
  EXPECT_EQ(pareto_tsv(edge), "model\tf1_pronoun\tantecedent_pct\tdominated\n"
                              "A\t50.000000\t2.000000\t1\n"
                              "B\t50.000000\t3.000000\t0\n");
}

TEST(Digest, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Manifest, RendersDeterministicallyAndReadsBack) {
  const fs::path dir = temp_dir("manifest");
  const fs::path in = dir / "in.txt", out = dir / "out.txt";
  { std::ofstream(in) << "abc"; }
  { std::ofstream(out) << ""; }
  Manifest m;
  m.command = "translate";
  m.args = {"translate", "--k", "3"};
  m.seed = 7;
  m.config = {{"k", "3"}, {"beam", "1"}};
  m.inputs = {in};
  m.outputs = {out};
  EXPECT_EQ(m.render(), m.render());
  m.write(dir / "m.txt");
  const ManifestRecord r = read_manifest(dir / "m.txt");
  EXPECT_EQ(r.command, "translate");
  EXPECT_EQ(r.args, m.args);
  EXPECT_EQ(r.seed, 7u);
  EXPECT_EQ(r.config, m.config);
  EXPECT_EQ(r.inputs.at(in.generic_string()), sha256_hex("abc"));
  EXPECT_EQ(r.outputs.at(out.generic_string()), sha256_hex(""));
}

TEST(Perturbation, ZeroContextMakesModesAgree) {
  const Dataset d = generate_dataset(small_config(), 2);
  const Vocabulary src = build_vocab(d.train, Side::source), tgt = build_vocab(d.train, Side::target);
  ModelConfig c;
  c.arch = Architecture::sentence;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ffn = 32;
  c.src_vocab = src.size();
  c.tgt_vocab = tgt.size();
  const Model sentence(c, 3);
  c.arch = Architecture::concat_2to2;
  const Model concat(c, 3);
  PerturbationOptions o;
  o.k = 0;
  for (const Model* m : {&sentence, &concat}) {
    const auto rows = perturbation_table(*m, d.test, src, tgt, o);
    ASSERT_EQ(rows.size(), m == &sentence ? 2u : 1u);
    for (const auto& r : rows) {
      EXPECT_EQ(r.bleu.at(ContextMode::correct), r.bleu.at(ContextMode::random));
      EXPECT_EQ(r.cxmi.at(ContextMode::correct), 0.0);
      EXPECT_EQ(r.cxmi.at(ContextMode::random), 0.0);
    }
  }
  const auto rows = perturbation_table(sentence, d.test, src, tgt, o);
  EXPECT_EQ(rows[1].configuration, "sentence*");
  const std::string tsv = perturbation_tsv(rows);
  EXPECT_EQ(tsv.substr(0, tsv.find('\n')),
            "configuration\tbleu.correct\tbleu.random\tbleu.none\tcxmi.correct\tcxmi.random\tcxmi.none");
}

TEST(Perturbation, SentenceModelIgnoresContextModes) {
  const Dataset d = generate_dataset(small_config(), 2);
  const Vocabulary src = build_vocab(d.train, Side::source), tgt = build_vocab(d.train, Side::target);
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ffn = 32;
  c.src_vocab = src.size();
  c.tgt_vocab = tgt.size();
  const Model sentence(c, 3);
  PerturbationOptions o;
  o.k = 3;
  const auto row = perturbation_table(sentence, d.test, src, tgt, o)[0];
  EXPECT_EQ(row.bleu.at(ContextMode::correct), row.bleu.at(ContextMode::none));
  EXPECT_EQ(row.bleu.at(ContextMode::random), row.bleu.at(ContextMode::none));
  EXPECT_EQ(row.cxmi.at(ContextMode::correct), 0.0);
}

// Acceptance run: one PASS/FAIL line per criterion, details indented below it.
#include <CLI11.hpp>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "docmt/attribution.hpp"
#include "docmt/corpus_io.hpp"
#include "docmt/errors.hpp"
#include "docmt/gradcheck.hpp"
#include "docmt/ops.hpp"
#include "docmt/pipeline.hpp"
#include "docmt/training.hpp"
#include "trace_fixture.hpp"

namespace {

using namespace docmt;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  std::string id;
  std::string title;
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& detail) {
    pass = pass && ok;
    details.push_back((ok ? "ok   " : "FAIL ") + detail);
  }
  void note(const std::string& detail) { details.push_back("     " + detail); }
};

std::vector<Outcome> g_outcomes;

void report(const Outcome& o) {
  std::cout << (o.pass ? "PASS " : "FAIL ") << o.id << ' ' << o.title << '\n';
  for (const auto& d : o.details) std::cout << "    " << d << '\n';
  std::cout.flush();
  g_outcomes.push_back(o);
}

// 1 ---------------------------------------------------------------------------

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t = Tensor::zeros(shape, true);
  for (double& v : t.mutable_data()) v = rng.normal();
  return t;
}

Tensor weighted_sum(const Tensor& x, const Tensor& w) { return ops::sum(ops::mul(x, w)); }

Outcome gradient_suite() {
  Outcome o{"1", "gradient suite", true, {}};
  const auto t0 = Clock::now();
  Rng rng(2024);
  const std::size_t trials = 20;
  std::vector<double> worst(19, 0.0);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Rng r = rng.split(trial);
    const std::size_t m = 1 + r.below(4), k = 1 + r.below(4), n = 1 + r.below(4);
    Tensor a = random_tensor({m, k}, r), b = random_tensor({k, n}, r), bt = random_tensor({n, k}, r);
    Tensor c = random_tensor({m, k}, r), row = random_tensor({k}, r);
    Tensor wmn = random_tensor({m, n}, r), wmk = random_tensor({m, k}, r), wkm = random_tensor({k, m}, r);
    Tensor table = random_tensor({5, k}, r), wids = random_tensor({3, k}, r);
    const std::vector<std::int32_t> ids = {static_cast<std::int32_t>(r.below(5)),
                                           static_cast<std::int32_t>(r.below(5)), 0};
    // relu away from its kink
    Tensor away = random_tensor({m, k}, r);
    for (double& v : away.mutable_data()) v += v >= 0 ? 0.1 : -0.1;
    const Rng drop_seed = r.split("dropout");
    const std::vector<std::function<Tensor()>> fns = {
        [&] { return weighted_sum(ops::matmul(a, b), wmn); },
        [&] { return weighted_sum(ops::matmul_nt(a, bt), wmn); },
        [&] { return weighted_sum(ops::transpose(a), wkm); },
        [&] { return weighted_sum(ops::add(a, c), wmk); },
        [&] { return weighted_sum(ops::add(a, row), wmk); },
        [&] { return weighted_sum(ops::sub(a, c), wmk); },
        [&] { return weighted_sum(ops::mul(a, c), wmk); },
        [&] { return weighted_sum(ops::scale(a, -1.7), wmk); },
        [&] { return weighted_sum(ops::softmax(a, 1), wmk); },
        [&] { return weighted_sum(ops::softmax(a, 0), wmk); },
        [&] { return weighted_sum(ops::log_softmax(a), wmk); },
        [&] { return weighted_sum(ops::layer_norm(a, row, ops::scale(row, 0.5)), wmk); },
        [&] { return weighted_sum(ops::embedding(table, ids), wids); },
        [&] { return weighted_sum(ops::slice_cols(ops::concat_cols({a, c}), 1, k + 1), wmk); },
        [&] { return weighted_sum(ops::slice_rows(ops::concat_rows({a, c}), m / 2, m / 2 + m), wmk); },
        [&] { return ops::mean(ops::mul(a, c)); },
        [&] {
          Rng d = drop_seed;
          return weighted_sum(ops::dropout(a, 0.3, d), wmk);
        },
        [&] {
          std::vector<std::int32_t> t(m);
          for (std::size_t i = 0; i < m; ++i) t[i] = static_cast<std::int32_t>(i % k);
          return ops::cross_entropy(a, t, 0.1, -1).loss;
        },
        [&] { return weighted_sum(ops::relu(away), wmk); },
    };
    for (std::size_t i = 0; i < fns.size(); ++i) {
      const auto rep = gradient_check_leaves(fns[i], {a, b, bt, c, row, table, away});
      worst[i] = std::max(worst[i], rep.max_rel_error);
    }
  }
  double worst_op = 0.0;
  for (double w : worst) worst_op = std::max(worst_op, w);
  o.check(worst_op < 1e-4, fmt("%zu ops x %zu random instances: worst relative error %.3e (< 1e-4)", worst.size(),
                               trials, worst_op));

  GenConfig g;
  g.n_docs = 2;
  const ParallelCorpus corpus = generate_corpus(g, 17);
  const Vocabulary src = build_vocab(corpus, Side::source), tgt = build_vocab(corpus, Side::target);
  for (Architecture arch : {Architecture::sentence, Architecture::concat_2to2, Architecture::multi_encoder}) {
    ModelConfig mc;
    mc.arch = arch;
    mc.d_model = 8;
    mc.n_heads = 2;
    mc.d_ffn = 16;
    mc.dropout = 0.0;
    mc.src_vocab = src.size();
    mc.tgt_vocab = tgt.size();
    Model model(mc, 7);
    const Layout l = layout_of(arch);
    const SequenceBatch b1 = build_batch(l, corpus.documents[0], 1, 1, src, tgt);
    const SequenceBatch b2 = build_batch(l, corpus.documents[0], 2, 1, src, tgt);
    auto loss = [&] {
      Tensor l1 = ops::cross_entropy(model.forward(b1), b1.target_out, 0.1, Vocabulary::kPad).loss;
      Tensor l2 = ops::cross_entropy(model.forward(b2), b2.target_out, 0.1, Vocabulary::kPad).loss;
      return ops::scale(ops::add(l1, l2), 0.5);
    };
    std::vector<Tensor> leaves;
    for (auto& p : model.parameters()) leaves.push_back(p.value);
    Rng pick(3);
    // A small step keeps ReLU pre-activations from crossing zero inside the stencil.
    const auto rep = gradient_check_leaves(loss, leaves, 1e-7, 1e-4, 6, &pick);
    o.check(rep.max_rel_error < 1e-4, fmt("%s transformer loss, 2-sentence batch: %zu entries, worst relative error %.3e",
                                          to_string(arch).c_str(), rep.checked, rep.max_rel_error));
  }
  const double secs = seconds_since(t0);
  o.check(secs < 60.0, fmt("runtime %.1f s (< 60 s)", secs));
  return o;
}

// 2 ---------------------------------------------------------------------------

Outcome metric_oracles(const Dataset& data) {
  Outcome o{"2", "metric oracles", true, {}};
  const auto refs = reference_targets(data.test);
  const double self = bleu(refs, refs).score;
  o.check(std::fabs(self - 100.0) < 5e-4, fmt("BLEU(ref, ref) = %.3f", self));
  // Counts 6/6, 4/5, 2/4, 1/3, hypothesis length 6 against 7:
  // exp(1 - 7/6) * (6/6 * 4/5 * 2/4 * 1/3)^(1/4) * 100.
  const double expected = std::exp(1.0 - 7.0 / 6.0) * std::pow(1.0 * 0.8 * 0.5 / 3.0, 0.25) * 100.0;
  const double hand = bleu({split_tokens("the cat sat on mat .")}, {split_tokens("the cat sat on the mat .")}).score;
  o.check(std::fabs(hand - expected) < 1e-3, fmt("hand-counted BLEU %.6f vs %.6f", hand, expected));

  const Vocabulary src = build_vocab(data.train, Side::source), tgt = build_vocab(data.train, Side::target);
  ModelConfig mc;
  mc.arch = Architecture::concat_2to2;
  mc.d_model = 16;
  mc.n_heads = 2;
  mc.d_ffn = 32;
  mc.src_vocab = src.size();
  mc.tgt_vocab = tgt.size();
  const Model model(mc, 5);
  ParallelCorpus few;
  few.documents.assign(data.test.documents.begin(), data.test.documents.begin() + 3);
  BatchBuilder builder = [&](const ParallelDocument& doc, std::size_t i) {
    return build_batch(Layout::concat, doc, i, 3, src, tgt);
  };
  const CxmiResult same = cxmi(model, few, builder, builder);
  o.check(same.mean_delta == 0.0, fmt("CXMI with identical context builders = %g over %zu tokens", same.mean_delta,
                                      same.token_count));

  const F1Score f = tagged_word_f1({{"sie"}}, {{"sie", "es"}});
  o.check(f.precision == 0.5 && f.recall == 1.0 && f.f1 == 2.0 / 3.0,
          fmt("F1 worked example P=%.17g R=%.17g F1=%.17g", f.precision, f.recall, f.f1));
  return o;
}

// 3 ---------------------------------------------------------------------------

Outcome attribution_algebra(const Model& sentence_model, const Dataset& data, const Vocabulary& src,
                            const Vocabulary& tgt) {
  Outcome o{"3", "attribution algebra", true, {}};
  const auto t0 = Clock::now();
  Rng rng(77);
  double worst_sum = 0.0, min_entry = 0.0;
  std::size_t rows = 0, off_block_nonzero = 0, multi = 0;
  for (std::size_t t = 0; t < 1000; ++t) {
    Rng r = rng.split(t);
    const bool three = r.bernoulli(0.5);
    std::vector<std::size_t> blocks;
    if (three) blocks = {r.below(5), 1 + r.below(6), r.below(5)};
    else blocks = {1 + r.below(12)};
    const std::size_t target = 1 + r.below(8), layers = 1 + r.below(3), heads = 1 + r.below(3);
    const ForwardTrace trace = testing::random_trace(r, blocks, target, layers, heads);
    const Matrix c_enc = encoder_contributions(trace);
    const Matrix dist = decoder_rollout(trace, c_enc);
    for (const Matrix* m : {&c_enc, &dist})
      for (std::size_t i = 0; i < m->rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m->cols; ++j) {
          s += (*m)(i, j);
          min_entry = std::min(min_entry, (*m)(i, j));
        }
        worst_sum = std::max(worst_sum, std::fabs(s - 1.0));
        ++rows;
      }
    if (three) {
      ++multi;
      std::size_t begin = 0;
      for (std::size_t b = 0; b < 3; ++b) {
        const std::size_t end = begin + blocks[b];
        for (std::size_t i = begin; i < end; ++i)
          for (std::size_t j = 0; j < c_enc.cols; ++j)
            if ((j < begin || j >= end) && c_enc(i, j) != 0.0) ++off_block_nonzero;
        begin = end;
      }
    }
  }
  o.check(worst_sum <= 1e-6, fmt("1000 random traces, %zu rows: max |row sum - 1| = %.3e", rows, worst_sum));
  o.check(min_entry >= 0.0, fmt("smallest entry %.3e (nonnegative)", min_entry));
  o.check(off_block_nonzero == 0, fmt("%zu multi-encoder compositions: %zu nonzero off-block entries", multi,
                                      off_block_nonzero));

  const auto results = attribute_examples(sentence_model, data.contrastive, 5, src, tgt);
  double max_context = 0.0;
  for (const auto& r : results) max_context = std::max(max_context, r.share.context_pct);
  const AttributionSummary s = summarize(results);
  o.check(max_context == 0.0, fmt("sentence model on %zu contrastive examples: %.2f / %.2f / %.2f", results.size(),
                                  s.mean.antecedent_pct, s.mean.context_pct, s.mean.current_pct));
  const double secs = seconds_since(t0);
  o.check(secs < 60.0, fmt("runtime %.1f s (< 60 s)", secs));
  return o;
}

// 4 ---------------------------------------------------------------------------

struct Trained {
  Model model;
  double seconds = 0;
  TrainResult result;
};

Trained train_model(Architecture arch, const Dataset& data, const Vocabulary& src, const Vocabulary& tgt,
                    std::uint64_t seed, const fs::path& dir) {
  ModelConfig mc;
  mc.arch = arch;
  mc.src_vocab = src.size();
  mc.tgt_vocab = tgt.size();
  TrainConfig tc;
  tc.seed = seed;
  Trained t{Model(mc, seed), 0, {}};
  const auto t0 = Clock::now();
  std::ofstream log(dir / (to_string(arch) + "_train_log.tsv"));
  t.result = train(t.model, data.train, data.valid, src, tgt, tc, &log);
  t.seconds = seconds_since(t0);
  save_checkpoint(dir / (to_string(arch) + ".ckpt"), t.model, src, tgt);
  return t;
}

// 5 ---------------------------------------------------------------------------

int run_cli(const std::string& cli, const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + cli + "' " + args + " > cli.out 2> cli.err";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism(const std::string& cli, const fs::path& work) {
  Outcome o{"5", "determinism", true, {}};
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string tiny =
      "--set model.d_model=16 --set model.d_ffn=32 --set model.n_heads=2 --set model.n_layers=1 "
      "--set train.max_steps=8";
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"gen-data --out data --seed 3", "data/gen-data.manifest.txt"},
      {"train --arch concat --data data --out concat --seed 3 " + tiny, "concat/train.manifest.txt"},
      {"train --arch sentence --data data --out sentence --seed 3 " + tiny, "sentence/train.manifest.txt"},
      {"translate --checkpoint concat/model.ckpt --corpus data/test.tsv --k 3 --context-mode random --out tr",
       "tr/translate.manifest.txt"},
      {"perturb --checkpoint sentence/model.ckpt --corpus data/test.tsv --k 2 --out pt", "pt/perturb.manifest.txt"},
      {"evaluate --checkpoint concat/model.ckpt --data data --k 2 --out results/concat",
       "results/concat/evaluate.manifest.txt"},
      {"attribute --checkpoint concat/model.ckpt --contrastive data/contrastive.tsv --k 5 --out results/concat",
       "results/concat/attribute.manifest.txt"},
      {"report --results results --out report", "report/report.manifest.txt"},
  };
  for (const auto& [args, manifest] : steps) {
    const std::string name = args.substr(0, args.find(' '));
    if (run_cli(cli, dir, args) != 0) {
      o.check(false, name + ": first run failed: " + io::read_file(dir / "cli.err"));
      continue;
    }
    const auto recorded = read_manifest(dir / manifest);
    const int code = run_cli(cli, dir, "replay --manifest " + manifest);
    o.check(code == 0, fmt("%s: replay reproduced %zu output files byte-identically", name.c_str(),
                           recorded.outputs.size()));
  }
  return o;
}

// 6 ---------------------------------------------------------------------------

Outcome round_trips(const Model& model, const Vocabulary& src, const Vocabulary& tgt, const Dataset& data,
                    const fs::path& work) {
  Outcome o{"6", "round-trips", true, {}};
  const fs::path dir = work / "roundtrip";
  fs::create_directories(dir);
  save_checkpoint(dir / "a.ckpt", model, src, tgt);
  const LoadedModel back = load_checkpoint(dir / "a.ckpt");
  bool bits = back.model.config() == model.config() && back.src_vocab == src && back.tgt_vocab == tgt;
  std::size_t values = 0;
  const auto& pa = model.parameters();
  const auto& pb = back.model.parameters();
  bits = bits && pa.size() == pb.size();
  for (std::size_t i = 0; bits && i < pa.size(); ++i) {
    const auto da = pa[i].value.data(), db = pb[i].value.data();
    bits = pa[i].name == pb[i].name && da.size() == db.size();
    for (std::size_t j = 0; bits && j < da.size(); ++j, ++values)
      bits = std::bit_cast<std::uint64_t>(da[j]) == std::bit_cast<std::uint64_t>(db[j]);
  }
  save_checkpoint(dir / "b.ckpt", back.model, back.src_vocab, back.tgt_vocab);
  o.check(bits, fmt("checkpoint: %zu parameter tensors, %zu values bit-identical after load", pa.size(), values));
  o.check(file_sha256(dir / "a.ckpt") == file_sha256(dir / "b.ckpt"), "checkpoint: re-saved file byte-identical");

  save_dataset(dir / "data", data);
  const Dataset d = load_dataset(dir / "data");
  o.check(d.train == data.train && d.valid == data.valid && d.test == data.test && d.sparse == data.sparse &&
              d.contrastive_corpus == data.contrastive_corpus,
          "documents and annotations structurally equal after write/read");
  o.check(d.contrastive == data.contrastive, fmt("%zu contrastive examples equal after write/read", d.contrastive.size()));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance run"};
  std::string cli, work = "acceptance_work";
  std::uint64_t seed = 1;
  app.add_option("--cli", cli, "path of the docmt command-line tool")->required()->check(CLI::ExistingFile);
  app.add_option("--work", work, "scratch directory");
  app.add_option("--seed", seed, "seed for data generation and training");
  CLI11_PARSE(app, argc, argv);
  cli = fs::absolute(cli).string();
  const fs::path dir = fs::absolute(work);
  fs::create_directories(dir);

  try {
    report(gradient_suite());

    const DataConfig data_config = DataConfig::defaults();
    const Dataset data = generate_dataset(data_config, seed);
    const Vocabulary src = build_vocab(data.train, Side::source), tgt = build_vocab(data.train, Side::target);
    report(metric_oracles(data));

    std::cout << "training sentence, concat and multi-encoder models (default configs, seed " << seed << ")\n";
    std::cout.flush();
    const Trained sentence = train_model(Architecture::sentence, data, src, tgt, seed, dir);
    const Trained concat = train_model(Architecture::concat_2to2, data, src, tgt, seed, dir);
    const Trained multi = train_model(Architecture::multi_encoder, data, src, tgt, seed, dir);

    report(attribution_algebra(sentence.model, data, src, tgt));

    Outcome budget{"4", "training budget", true, {}};
    for (const Trained* t : {&sentence, &concat, &multi})
      budget.check(t->seconds < 600.0, fmt("%s: %zu steps, best valid ppl %.4f, %.0f s (< 600 s)",
                                           to_string(t->model.config().arch).c_str(), t->result.steps,
                                           t->result.best_valid_ppl, t->seconds));
    report(budget);

    PerturbationOptions po;
    po.k = 5;
    po.seed = seed;
    const auto concat_rows = perturbation_table(concat.model, data.test, src, tgt, po);
    const auto sentence_rows = perturbation_table(sentence.model, data.test, src, tgt, po);
    const auto multi_rows = perturbation_table(multi.model, data.test, src, tgt, po);
    {
      std::ofstream(dir / "perturbation.tsv") << perturbation_tsv(sentence_rows) << perturbation_tsv(concat_rows)
                                               << perturbation_tsv(multi_rows);
    }
    const auto& cr = concat_rows[0];
    Outcome a{"4a", "concatenation model uses correct context", true, {}};
    const double gap = cr.bleu.at(ContextMode::correct) - cr.bleu.at(ContextMode::random);
    a.check(gap >= 2.0, fmt("BLEU correct %.2f - random %.2f = %.2f (>= 2)", cr.bleu.at(ContextMode::correct),
                            cr.bleu.at(ContextMode::random), gap));
    a.check(cr.cxmi.at(ContextMode::correct) > 0.0 && cr.cxmi.at(ContextMode::random) < 0.0,
            fmt("CXMI correct %+.4f > 0 > random %+.4f", cr.cxmi.at(ContextMode::correct),
                cr.cxmi.at(ContextMode::random)));
    const auto& mr = multi_rows[0];
    a.note(fmt("multi-encoder: BLEU correct %.2f random %.2f none %.2f, CXMI correct %+.4f random %+.4f",
               mr.bleu.at(ContextMode::correct), mr.bleu.at(ContextMode::random), mr.bleu.at(ContextMode::none),
               mr.cxmi.at(ContextMode::correct), mr.cxmi.at(ContextMode::random)));
    report(a);

    Outcome b{"4b", "sentence-level* configuration", true, {}};
    const double sent_bleu = sentence_rows[0].bleu.at(ContextMode::none);
    const double star_bleu = sentence_rows[1].bleu.at(ContextMode::correct);
    b.check(star_bleu <= sent_bleu - 10.0,
            fmt("sentence-level* BLEU %.2f vs sentence-level %.2f (at least 10 below)", star_bleu, sent_bleu));
    report(b);

    Outcome c{"4c", "contrastive accuracy", true, {}};
    const double c5 = 100 * contrastive_accuracy(concat.model, data.contrastive, 5, src, tgt).accuracy;
    const double c0 = 100 * contrastive_accuracy(concat.model, data.contrastive, 0, src, tgt).accuracy;
    const double s0 = 100 * contrastive_accuracy(sentence.model, data.contrastive, 0, src, tgt).accuracy;
    const double m5 = 100 * contrastive_accuracy(multi.model, data.contrastive, 5, src, tgt).accuracy;
    c.check(c5 - c0 >= 10.0, fmt("concatenation k=5 %.2f%% vs k=0 %.2f%% (+%.2f, >= 10)", c5, c0, c5 - c0));
    c.check(c5 > s0, fmt("concatenation k=5 %.2f%% > sentence-level k=0 %.2f%%", c5, s0));
    c.note(fmt("multi-encoder k=5 %.2f%%; %zu examples", m5, data.contrastive.size()));
    report(c);

    Outcome d{"4d", "antecedent attribution", true, {}};
    const auto concat_attr = summarize(attribute_examples(concat.model, data.contrastive, 5, src, tgt));
    const auto multi_attr = summarize(attribute_examples(multi.model, data.contrastive, 5, src, tgt));
    const auto star_attr =
        summarize(attribute_examples(sentence.model, data.contrastive, 5, src, tgt, Layout::concat));
    {
      std::ofstream(dir / "attribution_concat.tsv") << attribution_summary_tsv(concat_attr);
      std::ofstream(dir / "attribution_multi.tsv") << attribution_summary_tsv(multi_attr);
      std::ofstream(dir / "attribution_sentence_star.tsv") << attribution_summary_tsv(star_attr);
    }
    d.check(concat_attr.mean.antecedent_pct >= 5.0 * multi_attr.mean.antecedent_pct,
            fmt("antecedent %%: concatenation %.2f vs multi-encoder %.2f (ratio %.2f, >= 5)",
                concat_attr.mean.antecedent_pct, multi_attr.mean.antecedent_pct,
                concat_attr.mean.antecedent_pct / multi_attr.mean.antecedent_pct));
    d.check(multi_attr.mean.context_pct < 10.0,
            fmt("multi-encoder total context %.2f%% (< 10%%)", multi_attr.mean.context_pct));
    d.note(fmt("concatenation %.2f / %.2f / %.2f; sentence-level* %.2f / %.2f / %.2f (antecedent / context / current)",
               concat_attr.mean.antecedent_pct, concat_attr.mean.context_pct, concat_attr.mean.current_pct,
               star_attr.mean.antecedent_pct, star_attr.mean.context_pct, star_attr.mean.current_pct));
    report(d);

    Outcome e{"4e", "pronoun F1", true, {}};
    TranslateOptions to;
    to.k = 5;
    to.seed = seed;
    auto pronoun_f1 = [&](const Model& m, const ParallelCorpus& corpus, std::optional<Layout> layout = {}) {
      TranslateOptions o = to;
      o.layout = layout;
      return 100 * phenomena_f1(corpus, translate_documents(m, corpus, src, tgt, o), data.lexicon)
                       .at(PhenomenonKind::pronoun)
                       .f1;
    };
    const double fc = pronoun_f1(concat.model, data.contrastive_corpus);
    const double fs_ = pronoun_f1(sentence.model, data.contrastive_corpus);
    const double fm = pronoun_f1(multi.model, data.contrastive_corpus);
    e.check(fc - fs_ >= 3.0, fmt("contrastive-derived corpus: concatenation %.2f vs sentence-level %.2f (+%.2f, >= 3)",
                                 fc, fs_, fc - fs_));
    e.note(fmt("contrastive-derived corpus: multi-encoder %.2f", fm));
    const double sc = pronoun_f1(concat.model, data.sparse);
    const double ss = pronoun_f1(sentence.model, data.sparse);
    const double sm = pronoun_f1(multi.model, data.sparse);
    const double spread = std::max({sc, ss, sm}) - std::min({sc, ss, sm});
    e.check(spread <= 3.0, fmt("phenomena-sparse set: sentence %.2f, concatenation %.2f, multi-encoder %.2f "
                               "(spread %.2f, <= 3)", ss, sc, sm, spread));
    const auto front = pareto({{"sentence", fs_, 0.0},
                               {"sentence*", pronoun_f1(sentence.model, data.contrastive_corpus, Layout::concat),
                                star_attr.mean.antecedent_pct},
                               {"concat", fc, concat_attr.mean.antecedent_pct},
                               {"multi", fm, multi_attr.mean.antecedent_pct}});
    { std::ofstream(dir / "pareto.tsv") << pareto_tsv(front); }
    report(e);

    report(determinism(cli, dir));
    report(round_trips(concat.model, src, tgt, data, dir));
  } catch (const std::exception& ex) {
    std::cout << "FAIL aborted: " << ex.what() << '\n';
    return 1;
  }

  std::size_t failed = 0;
  for (const auto& o : g_outcomes) failed += !o.pass;
  std::cout << (failed ? "FAIL " : "PASS ") << "summary: " << g_outcomes.size() - failed << " of "
            << g_outcomes.size() << " criteria passed\n";
  return failed ? 1 : 0;
}

// Command-line driver for the document-level translation experiments.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "docmt/corpus_io.hpp"
#include "docmt/errors.hpp"
#include "docmt/pipeline.hpp"
#include "docmt/training.hpp"

namespace {

using namespace docmt;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 1;
  std::vector<std::string> config_files;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_config) {
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--out", c.out, "output directory")->required();
  if (with_config) {
    cmd->add_option("--config", c.config_files, "key=value file; later files override earlier ones")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", c.overrides, "key=value override applied after the config files");
  }
}

KeyValues layered_config(const Common& c) {
  KeyValues kv;
  for (const auto& f : c.config_files)
    for (const auto& [k, v] : read_key_values(f)) kv[k] = v;
  for (const auto& o : c.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + o + "'");
    kv[o.substr(0, eq)] = o.substr(eq + 1);
  }
  return kv;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

std::string render_kv(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + '=' + v + '\n';
  return out;
}

void check_keys(const KeyValues& kv, const KeyValues& known, const std::string& prefix) {
  for (const auto& [k, v] : kv)
    if (!known.count(k)) throw ConfigError("unknown config key '" + prefix + k + "'");
}

std::vector<std::string> g_args;

Manifest manifest(const std::string& command, const Common& c) {
  Manifest m;
  m.command = command;
  m.args = g_args;
  m.seed = c.seed;
  return m;
}

// Named after the subcommand so that several subcommands can share a directory.
void finish(Manifest& m, const Common& c) {
  const fs::path path = fs::path(c.out) / (m.command + ".manifest.txt");
  m.write(path);
  std::cout << "wrote " << m.outputs.size() << " files and " << path.string() << '\n';
}

// gen-data ------------------------------------------------------------------

void run_gen_data(const Common& c) {
  const DataConfig config = DataConfig::from_kv(layered_config(c));
  const Dataset data = generate_dataset(config, c.seed);
  Manifest m = manifest("gen-data", c);
  m.config = config.to_kv();
  m.outputs = save_dataset(c.out, data);
  const fs::path cfg = fs::path(c.out) / "data_config.txt";
  write_text(cfg, render_kv(m.config));
  m.outputs.push_back(cfg);
  finish(m, c);
}

// train ----------------------------------------------------------------------

struct TrainArgs {
  std::string arch;
  std::string data;
};

void run_train(const Common& c, const TrainArgs& a) {
  const KeyValues kv = layered_config(c);
  const KeyValues model_kv = [&] {
    KeyValues out;
    for (const auto& [k, v] : kv)
      if (k.rfind("model.", 0) == 0) out[k.substr(6)] = v;
    return out;
  }();
  KeyValues train_kv;
  for (const auto& [k, v] : kv) {
    if (k.rfind("train.", 0) == 0) train_kv[k.substr(6)] = v;
    else if (k.rfind("model.", 0) != 0) throw ConfigError("unknown config key '" + k + "' (expected model.* or train.*)");
  }
  check_keys(model_kv, ModelConfig{}.to_kv(), "model.");
  check_keys(train_kv, TrainConfig{}.to_kv(), "train.");
  if (model_kv.count("arch")) throw UsageError("set the architecture with --arch, not model.arch");
  if (train_kv.count("seed")) throw UsageError("set the seed with --seed, not train.seed");

  const fs::path dir = a.data;
  const ParallelCorpus train_set = load_annotated(dir, "train");
  const ParallelCorpus valid_set = load_annotated(dir, "valid");
  const Vocabulary src = build_vocab(train_set, Side::source);
  const Vocabulary tgt = build_vocab(train_set, Side::target);

  ModelConfig mc = ModelConfig::from_kv(model_kv);
  mc.arch = parse_architecture(a.arch);
  mc.src_vocab = src.size();
  mc.tgt_vocab = tgt.size();
  mc.validate();
  TrainConfig tc = TrainConfig::from_kv(train_kv);
  tc.seed = c.seed;
  tc.validate();

  Model model(mc, c.seed);
  fs::create_directories(c.out);
  const fs::path log_path = fs::path(c.out) / "train_log.tsv";
  std::ofstream log(log_path, std::ios::binary);
  const TrainResult r = train(model, train_set, valid_set, src, tgt, tc, &log);
  log.close();
  const fs::path ckpt = fs::path(c.out) / "model.ckpt";
  save_checkpoint(ckpt, model, src, tgt);
  std::ostringstream summary;
  summary << "steps=" << r.steps << "\nepochs=" << r.epochs << "\nbest_step=" << r.best_step
          << "\nbest_valid_ppl=" << format_fixed(r.best_valid_ppl) << "\nearly_stopped=" << r.early_stopped
          << "\ndiverged=" << r.diverged << '\n';
  for (std::size_t k = 0; k < r.context_histogram.size(); ++k)
    summary << "context_k" << k << '=' << r.context_histogram[k] << '\n';
  if (r.diverged) summary << "diagnostic=" << r.diagnostic << '\n';
  const fs::path summary_path = fs::path(c.out) / "train_summary.txt";
  write_text(summary_path, summary.str());

  Manifest m = manifest("train", c);
  for (const auto& [k, v] : mc.to_kv()) m.config["model." + k] = v;
  for (const auto& [k, v] : tc.to_kv()) m.config["train." + k] = v;
  m.inputs = {dir / "train.tsv", dir / "train.ann.tsv", dir / "valid.tsv", dir / "valid.ann.tsv"};
  m.outputs = {ckpt, log_path, summary_path};
  if (r.diverged) std::cerr << "warning: " << r.diagnostic << '\n';
  finish(m, c);
}

// Shared model-side flags ------------------------------------------------------

struct ModelArgs {
  std::string checkpoint;
  std::size_t k = 5;
  std::size_t beam = 1;
  std::string context_mode = "correct";
  bool concat_inputs = false;
};

void add_model_args(CLI::App* cmd, ModelArgs& a, bool decoding) {
  cmd->add_option("--checkpoint", a.checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
  cmd->add_option("--k", a.k, "number of context sentences");
  cmd->add_flag("--concat-inputs", a.concat_inputs,
                "feed a sentence model concatenated context inputs (sentence-level* evaluation)");
  if (decoding) {
    cmd->add_option("--beam", a.beam, "beam size (1 = greedy)");
    cmd->add_option("--context-mode", a.context_mode, "context: correct, random or none")
        ->check(CLI::IsMember({"correct", "random", "none"}));
  }
}

std::optional<Layout> layout_override(const ModelArgs& a, const Model& model) {
  if (!a.concat_inputs) return std::nullopt;
  if (model.config().arch != Architecture::sentence)
    throw UsageError("--concat-inputs applies to sentence models only");
  return Layout::concat;
}

KeyValues model_args_kv(const ModelArgs& a) {
  return {{"k", std::to_string(a.k)},
          {"beam", std::to_string(a.beam)},
          {"context_mode", a.context_mode},
          {"concat_inputs", a.concat_inputs ? "true" : "false"}};
}

// translate ------------------------------------------------------------------

void run_translate(const Common& c, const ModelArgs& a, const std::string& corpus_path) {
  const LoadedModel lm = load_checkpoint(a.checkpoint);
  TranslateOptions o;
  o.k = a.k;
  o.beam = a.beam;
  o.mode = parse_context_mode(a.context_mode);
  o.seed = c.seed;
  o.layout = layout_override(a, lm.model);
  const ParallelCorpus corpus = io::load_documents(corpus_path);
  fs::create_directories(c.out);
  const fs::path out = fs::path(c.out) / "translations.tsv";
  io::save_translations(out, translate_corpus(lm.model, corpus, lm.src_vocab, lm.tgt_vocab, o));
  Manifest m = manifest("translate", c);
  m.config = model_args_kv(a);
  m.inputs = {a.checkpoint, corpus_path};
  m.outputs = {out};
  finish(m, c);
}

// perturb --------------------------------------------------------------------

void run_perturb(const Common& c, const ModelArgs& a, const std::string& corpus_path) {
  if (a.concat_inputs) throw UsageError("perturb adds the sentence-level* row by itself; drop --concat-inputs");
  const LoadedModel lm = load_checkpoint(a.checkpoint);
  PerturbationOptions o;
  o.k = a.k;
  o.beam = a.beam;
  o.seed = c.seed;
  const ParallelCorpus corpus = io::load_documents(corpus_path);
  if (o.k > lm.model.config().max_context)
    throw ConfigError("context size " + std::to_string(o.k) + " exceeds the model's maximum " +
                      std::to_string(lm.model.config().max_context));
  fs::create_directories(c.out);
  const fs::path out = fs::path(c.out) / "perturbation.tsv";
  write_text(out, perturbation_tsv(perturbation_table(lm.model, corpus, lm.src_vocab, lm.tgt_vocab, o)));
  Manifest m = manifest("perturb", c);
  m.config = {{"k", std::to_string(a.k)}, {"beam", std::to_string(a.beam)}};
  m.inputs = {a.checkpoint, corpus_path};
  m.outputs = {out};
  finish(m, c);
}

// evaluate -------------------------------------------------------------------

void run_evaluate(const Common& c, const ModelArgs& a, const std::string& data_dir) {
  const LoadedModel lm = load_checkpoint(a.checkpoint);
  EvaluationOptions o;
  o.k = a.k;
  o.beam = a.beam;
  o.mode = parse_context_mode(a.context_mode);
  o.seed = c.seed;
  o.layout = layout_override(a, lm.model);
  const Dataset data = load_dataset(data_dir);
  const MetricReport report = evaluate(lm.model, data, lm.src_vocab, lm.tgt_vocab, o);
  fs::create_directories(c.out);
  const fs::path tsv = fs::path(c.out) / "metrics.tsv";
  const fs::path summary = fs::path(c.out) / "metrics_summary.txt";
  write_text(tsv, report.tsv());
  write_text(summary, report.summary());
  Manifest m = manifest("evaluate", c);
  m.config = model_args_kv(a);
  m.inputs = {a.checkpoint};
  for (const auto& p : dataset_file_names()) m.inputs.push_back(fs::path(data_dir) / p);
  m.outputs = {tsv, summary};
  finish(m, c);
}

// attribute ------------------------------------------------------------------

void run_attribute(const Common& c, const ModelArgs& a, const std::string& contrastive_path) {
  const LoadedModel lm = load_checkpoint(a.checkpoint);
  const auto examples = io::load_contrastive(contrastive_path);
  const auto results =
      attribute_examples(lm.model, examples, a.k, lm.src_vocab, lm.tgt_vocab, layout_override(a, lm.model));
  if (results.empty()) throw ValidationError("no contrastive example has its antecedent within k=" + std::to_string(a.k));
  fs::create_directories(c.out);
  const fs::path dump = fs::path(c.out) / "attribution.tsv";
  const fs::path sidecar = fs::path(c.out) / "attribution_rows.tsv";
  const fs::path summary = fs::path(c.out) / "attribution_summary.tsv";
  write_text(dump, attribution_dump(results));
  write_text(sidecar, attribution_sidecar(results));
  write_text(summary, attribution_summary_tsv(summarize(results)));
  Manifest m = manifest("attribute", c);
  m.config = {{"k", std::to_string(a.k)}, {"concat_inputs", a.concat_inputs ? "true" : "false"}};
  m.inputs = {a.checkpoint, contrastive_path};
  m.outputs = {dump, sidecar, summary};
  finish(m, c);
}

// report ---------------------------------------------------------------------

// Value of `metric TAB configuration` in a metrics.tsv file.
std::optional<double> metric_value(const fs::path& path, const std::string& metric, const std::string& configuration) {
  std::istringstream in(io::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto f = io::split_tabs(line);
    if (f.size() == 3 && f[0] == metric && f[1] == configuration) return std::stod(f[2]);
  }
  return std::nullopt;
}

std::optional<double> antecedent_mean(const fs::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto f = io::split_tabs(line);
    if (f.size() == 4 && f[0] == "all") return std::stod(f[1]);
  }
  return std::nullopt;
}

void run_report(const Common& c, const std::string& results_dir) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(results_dir))
    if (e.is_directory() && fs::exists(e.path() / "metrics.tsv") && fs::exists(e.path() / "attribution_summary.tsv"))
      dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty())
    throw ValidationError("no model directory in " + results_dir + " holds both metrics.tsv and attribution_summary.tsv");
  Manifest m = manifest("report", c);
  std::string combined = "model\tmetric\tconfiguration\tvalue\n";
  std::vector<ParetoPoint> points;
  for (const auto& d : dirs) {
    const std::string name = d.filename().string();
    const fs::path metrics = d / "metrics.tsv";
    const fs::path attribution = d / "attribution_summary.tsv";
    m.inputs.push_back(metrics);
    m.inputs.push_back(attribution);
    std::istringstream in(io::read_file(metrics));
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) combined += name + '\t' + line + '\n';
    const auto f1 = metric_value(metrics, "f1.pronoun", "contrastive_corpus");
    const auto ante = antecedent_mean(attribution);
    if (!f1 || !ante) throw ValidationError(name + ": missing f1.pronoun or antecedent share");
    combined += name + "\tattribution.antecedent\tall\t" + format_fixed(*ante) + '\n';
    points.push_back({name, *f1, *ante, false});
  }
  fs::create_directories(c.out);
  const fs::path report = fs::path(c.out) / "report.tsv";
  const fs::path front = fs::path(c.out) / "pareto.tsv";
  write_text(report, combined);
  write_text(front, pareto_tsv(pareto(points)));
  m.outputs = {report, front};
  finish(m, c);
}

// replay ---------------------------------------------------------------------

int run(const std::vector<std::string>& args);

// Re-runs the recorded command and checks every output against its digest.
int run_replay(const std::string& manifest_path) {
  const ManifestRecord rec = read_manifest(manifest_path);
  if (rec.args.empty() || rec.args[0] == "replay") throw ValidationError(manifest_path + ": nothing to replay");
  const int code = run(rec.args);
  if (code != 0) return code;
  std::size_t mismatches = 0;
  for (const auto& [path, digest] : rec.outputs) {
    const bool same = fs::exists(path) && file_sha256(path) == digest;
    if (!same) {
      std::cerr << "mismatch: " << path << '\n';
      ++mismatches;
    }
  }
  if (mismatches) throw ValidationError(std::to_string(mismatches) + " output files differ from the manifest");
  std::cout << "reproduced " << rec.outputs.size() << " files byte-identically\n";
  return 0;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Document-level translation experiments"};
  app.require_subcommand(1);
  Common common;
  ModelArgs margs;
  TrainArgs targs;
  std::string corpus_path, data_dir, contrastive_path, results_dir, manifest_path;

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpora, contrastive set and lexicon");
  add_common(gen, common, true);

  auto* tr = app.add_subcommand("train", "train a model and write a checkpoint and training log");
  add_common(tr, common, true);
  tr->add_option("--arch", targs.arch, "sentence, concat or multi")
      ->required()
      ->check(CLI::IsMember({"sentence", "concat", "multi"}));
  tr->add_option("--data", targs.data, "directory written by gen-data")->required()->check(CLI::ExistingDirectory);

  auto* tl = app.add_subcommand("translate", "translate a document file");
  add_common(tl, common, false);
  add_model_args(tl, margs, true);
  tl->add_option("--corpus", corpus_path, "documents file")->required()->check(CLI::ExistingFile);

  auto* pt = app.add_subcommand("perturb", "BLEU and CXMI with correct, random and no context");
  add_common(pt, common, false);
  pt->add_option("--checkpoint", margs.checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
  pt->add_option("--k", margs.k, "number of context sentences");
  pt->add_option("--beam", margs.beam, "beam size (1 = greedy)");
  pt->add_option("--corpus", corpus_path, "documents file")->required()->check(CLI::ExistingFile);

  auto* at = app.add_subcommand("attribute", "supporting-context attribution on contrastive examples");
  add_common(at, common, false);
  add_model_args(at, margs, false);
  at->add_option("--contrastive", contrastive_path, "contrastive examples file")->required()->check(CLI::ExistingFile);

  auto* ev = app.add_subcommand("evaluate", "BLEU, perplexity, contrastive accuracy and phenomena F1");
  add_common(ev, common, false);
  add_model_args(ev, margs, true);
  ev->add_option("--data", data_dir, "directory written by gen-data")->required()->check(CLI::ExistingDirectory);

  auto* rp = app.add_subcommand("report", "combine evaluate and attribute outputs; Pareto data");
  add_common(rp, common, false);
  rp->add_option("--results", results_dir, "directory with one subdirectory per model")
      ->required()
      ->check(CLI::ExistingDirectory);

  auto* rep = app.add_subcommand("replay", "re-run a manifest and verify its outputs");
  rep->add_option("--manifest", manifest_path, "manifest file of an earlier run")->required()->check(CLI::ExistingFile);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::vector<std::string> saved = g_args;
  g_args = args;
  try {
    if (*gen) run_gen_data(common);
    else if (*tr) run_train(common, targs);
    else if (*tl) run_translate(common, margs, corpus_path);
    else if (*pt) run_perturb(common, margs, corpus_path);
    else if (*at) run_attribute(common, margs, contrastive_path);
    else if (*ev) run_evaluate(common, margs, data_dir);
    else if (*rp) run_report(common, results_dir);
    else if (*rep) return run_replay(manifest_path);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    g_args = saved;
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    g_args = saved;
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    g_args = saved;
    return 1;
  }
  g_args = saved;
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(std::vector<std::string>(argv + 1, argv + argc)); }

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "docmt/attribution.hpp"
#include "docmt/contrastive.hpp"
#include "docmt/decoding.hpp"
#include "docmt/generator.hpp"
#include "docmt/metrics.hpp"
#include "docmt/model.hpp"

// Experiment-level building blocks shared by the command-line tool and the
// acceptance run: dataset bundles, perturbation tables, evaluation reports,
// Pareto data and run manifests.
namespace docmt {

namespace fs = std::filesystem;

using KeyValues = std::map<std::string, std::string>;

KeyValues gen_config_to_kv(const GenConfig& c);
// Unset keys keep the values of `base`. Unknown keys throw ConfigError.
GenConfig gen_config_from_kv(const KeyValues& kv, const GenConfig& base = {});

struct DataConfig {
  GenConfig corpus;       // train / valid / test documents
  std::size_t n_train = 200;
  std::size_t n_valid = 20;
  GenConfig sparse;       // phenomena-sparse test set
  GenConfig contrastive;  // pronoun-rich documents the contrastive set is drawn from
  std::size_t max_context = 5;

  static DataConfig defaults();
  void validate() const;
  // Keys are prefixed with corpus., sparse. and contrastive.; the split sizes
  // are split.train and split.valid.
  KeyValues to_kv() const;
  static DataConfig from_kv(const KeyValues& kv);
};

struct Dataset {
  ParallelCorpus train, valid, test;
  ParallelCorpus sparse;
  std::vector<ContrastiveExample> contrastive;
  ParallelCorpus contrastive_corpus;
  Lexicon lexicon;
};

Dataset generate_dataset(const DataConfig& config, std::uint64_t seed);
// File names of a saved bundle, in a fixed order.
std::vector<std::string> dataset_file_names();
// Writes every part of the bundle; returns the files written, in the same order.
std::vector<fs::path> save_dataset(const fs::path& dir, const Dataset& data);
Dataset load_dataset(const fs::path& dir);
// Document file plus its annotation sidecar (`name.tsv`, `name.ann.tsv`).
ParallelCorpus load_annotated(const fs::path& dir, const std::string& name);

struct PerturbationRow {
  std::string configuration;
  std::map<ContextMode, double> bleu;
  std::map<ContextMode, double> cxmi;
};

struct PerturbationOptions {
  std::size_t k = 5;
  std::size_t beam = 1;
  std::uint64_t seed = 1;
};

// One row for the model's own layout; a sentence model gets a second row
// evaluated with concatenated inputs. CXMI compares the context of each mode
// (generated target context) against no context; the `none` column is 0.
std::vector<PerturbationRow> perturbation_table(const Model& model, const ParallelCorpus& corpus,
                                                const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                                const PerturbationOptions& options);
std::string perturbation_tsv(const std::vector<PerturbationRow>& rows);

// Hypotheses per document, per sentence.
std::vector<std::vector<Tokens>> translate_documents(const Model& model, const ParallelCorpus& corpus,
                                                     const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                                     const TranslateOptions& options);
std::vector<Tokens> flatten(const std::vector<std::vector<Tokens>>& documents);
std::vector<Tokens> reference_targets(const ParallelCorpus& corpus);

struct EvaluationOptions {
  std::size_t k = 5;
  std::size_t beam = 1;
  std::uint64_t seed = 1;
  ContextMode mode = ContextMode::correct;
  std::optional<Layout> layout;  // sentence-level* evaluation uses Layout::concat
};

// bleu.test, perplexity.test, contrastive.accuracy and f1.<kind> rows for the
// test, contrastive_corpus and sparse sets.
MetricReport evaluate(const Model& model, const Dataset& data, const Vocabulary& src_vocab,
                      const Vocabulary& tgt_vocab, const EvaluationOptions& options);

std::vector<ExampleAttribution> attribute_examples(const Model& model,
                                                   const std::vector<ContrastiveExample>& examples,
                                                   std::size_t k, const Vocabulary& src_vocab,
                                                   const Vocabulary& tgt_vocab,
                                                   std::optional<Layout> layout = std::nullopt);
// `scope TAB antecedent_pct TAB context_pct TAB current_pct`; scopes are
// all, class_mean and pronoun:<form>.
std::string attribution_summary_tsv(const AttributionSummary& summary);

struct ParetoPoint {
  std::string model;
  double f1 = 0;
  double antecedent_pct = 0;
  bool dominated = false;
};

// Marks points for which another point is >= in both coordinates and > in one.
std::vector<ParetoPoint> pareto(std::vector<ParetoPoint> points);
std::string pareto_tsv(const std::vector<ParetoPoint>& points);

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const fs::path& path);

// Everything needed to reproduce a subcommand: its arguments, the effective
// configuration and digests of the inputs and outputs.
struct Manifest {
  std::string command;
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  KeyValues config;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;

  std::string render() const;  // deterministic text
  void write(const fs::path& path) const;
};

struct ManifestRecord {
  std::string command;
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  KeyValues config;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
};
ManifestRecord read_manifest(const fs::path& path);

}  // namespace docmt

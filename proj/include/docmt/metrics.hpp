#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "docmt/contrastive.hpp"
#include "docmt/corpus.hpp"
#include "docmt/generator.hpp"
#include "docmt/model.hpp"

namespace docmt {

struct BleuResult {
  double score = 0;                      // 0..100
  std::array<double, 4> precisions{};   // modified n-gram precisions
  double brevity_penalty = 0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
};

// Corpus BLEU over 1-4 grams without smoothing. Throws PairingError when the counts differ.
BleuResult bleu(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references);

struct SentenceDelta {
  double mean_delta;  // nats per token
  std::size_t tokens;
};

struct CxmiResult {
  double mean_delta = 0;  // nats per token
  std::size_t token_count = 0;
  std::vector<SentenceDelta> sentences;
};

// Builds the scoring batch for sentence i of a document; the target is the reference.
using BatchBuilder = std::function<SequenceBatch(const ParallelDocument& doc, std::size_t i)>;

// Mean over current-sentence target tokens of log P(y|x,C) - log P(y|x).
CxmiResult cxmi(const Model& model, const ParallelCorpus& corpus, const BatchBuilder& with_context,
                const BatchBuilder& without_context);

// Scoring batch for a contrastive example with the last k context sentences
// (gold target context) and `candidate` as the current target.
SequenceBatch contrastive_batch(const ContrastiveExample& ex, const Tokens& candidate, Layout layout, std::size_t k,
                                const Vocabulary& src_vocab, const Vocabulary& tgt_vocab);

struct ContrastiveResult {
  double accuracy = 0;  // fraction in [0, 1]
  std::size_t correct = 0;
  std::size_t total = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_class;  // correct pronoun -> (correct, total)
};

// score(example, candidate) -> log-probability; an example counts as correct
// only when the reference scores strictly above every incorrect variant.
using CandidateScorer = std::function<double(const ContrastiveExample&, const Tokens&)>;

ContrastiveResult contrastive_accuracy(const std::vector<ContrastiveExample>& examples, const CandidateScorer& score);
ContrastiveResult contrastive_accuracy(const Model& model, const std::vector<ContrastiveExample>& examples,
                                       std::size_t k, const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                       std::optional<Layout> layout = std::nullopt);

struct F1Score {
  double precision = 0;
  double recall = 0;
  double f1 = 0;  // fractions; 1 when neither side has tagged words
  std::size_t ref_tagged = 0;
  std::size_t hyp_tagged = 0;
  std::size_t matched = 0;
};

// Micro-averaged F1 from per-sentence lists of tagged surface forms, matched as multisets.
F1Score tagged_word_f1(const std::vector<std::vector<std::string>>& ref_tagged,
                       const std::vector<std::vector<std::string>>& hyp_tagged);

// Tags the reference targets and the hypotheses (per document, per sentence) with the
// lexicon rules and scores each phenomenon kind.
std::map<PhenomenonKind, F1Score> phenomena_f1(const ParallelCorpus& reference,
                                               const std::vector<std::vector<Tokens>>& hypotheses,
                                               const Lexicon& lexicon);

// exp(mean negative log-likelihood over current-sentence target tokens and EOS).
double perplexity(const Model& model, const ParallelCorpus& corpus, const Vocabulary& src_vocab,
                  const Vocabulary& tgt_vocab, std::size_t k);

// `metric TAB configuration TAB value` lines plus a key=value summary.
class MetricReport {
 public:
  void add(const std::string& metric, const std::string& configuration, double value);
  const std::vector<std::tuple<std::string, std::string, double>>& rows() const { return rows_; }
  std::string tsv() const;
  std::string summary() const;  // metric.configuration=value

 private:
  std::vector<std::tuple<std::string, std::string, double>> rows_;
};

std::string format_fixed(double value);  // %.6f

// Reads a key=value file; '#' starts a comment line.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

}  // namespace docmt

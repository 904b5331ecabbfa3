#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "docmt/corpus.hpp"
#include "docmt/model.hpp"

namespace docmt {

struct TrainConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  // Peak learning rate is lr_scale / sqrt(warmup).
  double lr_scale = 0.04;
  std::size_t warmup = 400;
  double label_smoothing = 0.1;
  std::size_t batch_tokens = 256;  // target tokens per update
  std::size_t max_epochs = 40;
  std::size_t max_steps = 0;       // 0: no cap
  std::size_t patience = 10;
  double eval_interval = 0.5;      // epochs between validations
  double clip_norm = 1.0;          // 0 disables clipping
  std::uint64_t seed = 1;

  void validate() const;  // ConfigError
  std::map<std::string, std::string> to_kv() const;
  static TrainConfig from_kv(const std::map<std::string, std::string>& kv);
};

// lr = scale · min(step^-1/2, step · warmup^-3/2)
double lr_at(std::size_t step, std::size_t warmup, double scale);

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

// One bias-corrected Adam update of `param` in place. `step` counts from 1.
// Throws NumericError naming `name` on a non-finite gradient.
void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments& moments, std::size_t step,
               double lr, double beta1, double beta2, double eps, const std::string& name = "parameter");

class AdamOptimizer {
 public:
  AdamOptimizer(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  // Applies the accumulated gradients of every parameter, then clears them.
  void step(std::vector<NamedParameter>& params, double lr);
  std::size_t steps() const { return step_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t step_ = 0;
  std::vector<AdamMoments> moments_;
};

// Scales all gradients so their global L2 norm is at most `max_norm`; returns the norm before scaling.
double clip_gradients(std::vector<NamedParameter>& params, double max_norm);

struct TrainExample {
  std::size_t doc;
  std::size_t sentence;
};

// Every (document, sentence) pair of the corpus, in corpus order.
std::vector<TrainExample> training_examples(const ParallelCorpus& corpus);

// Context sizes drawn uniformly from {0..max_context}, one per example.
std::vector<std::size_t> sample_context_sizes(std::size_t n, std::size_t max_context, Rng& rng);

struct TrainLogRecord {
  std::size_t step;
  double lr;
  double train_loss;
  double valid_ppl;
};

std::string format_log_record(const TrainLogRecord& r);
std::vector<TrainLogRecord> parse_training_log(std::istream& in);

struct TrainResult {
  std::vector<TrainLogRecord> log;
  double best_valid_ppl = 0.0;
  std::size_t best_step = 0;
  std::size_t steps = 0;
  std::size_t epochs = 0;
  bool early_stopped = false;
  bool diverged = false;
  std::string diagnostic;
  std::vector<std::size_t> context_histogram;  // sampled k counts over all epochs
};

// Perplexity over current-sentence target tokens (including EOS), no label smoothing.
double validation_perplexity(const Model& model, const ParallelCorpus& corpus, const Vocabulary& src_vocab,
                             const Vocabulary& tgt_vocab, std::size_t k);

// Trains in place. On return the model holds the best-validation parameters,
// also when training diverged (then `diverged` is set with a diagnostic).
// Each log record is also written to `log` when given.
TrainResult train(Model& model, const ParallelCorpus& train_set, const ParallelCorpus& valid_set,
                  const Vocabulary& src_vocab, const Vocabulary& tgt_vocab, const TrainConfig& config,
                  std::ostream* log = nullptr);

}  // namespace docmt

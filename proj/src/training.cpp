#include "docmt/training.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "docmt/errors.hpp"
#include "docmt/ops.hpp"

namespace docmt {

namespace {

template <typename T>
T kv_number(const std::map<std::string, std::string>& kv, const std::string& key, T fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::istringstream ss(it->second);
  T v{};
  if (!(ss >> v) || !ss.eof()) throw ConfigError("train config: bad value for " + key + ": '" + it->second + "'");
  return v;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const Model& model) {
  Snapshot s;
  for (const auto& p : model.parameters()) s.emplace_back(p.value.data().begin(), p.value.data().end());
  return s;
}

void restore(Model& model, const Snapshot& s) {
  auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto d = params[i].value.mutable_data();
    std::copy(s[i].begin(), s[i].end(), d.begin());
    params[i].value.zero_grad();
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) throw ConfigError("train config: betas must lie in (0, 1)");
  if (!(eps > 0)) throw ConfigError("train config: eps must be positive");
  if (!(lr_scale >= 0)) throw ConfigError("train config: lr_scale must be non-negative");
  if (warmup < 1) throw ConfigError("train config: warmup must be at least 1");
  if (patience < 1) throw ConfigError("train config: patience must be at least 1");
  if (!(label_smoothing >= 0 && label_smoothing < 1)) throw ConfigError("train config: label_smoothing must lie in [0, 1)");
  if (batch_tokens == 0) throw ConfigError("train config: batch_tokens must be positive");
  if (max_epochs == 0) throw ConfigError("train config: max_epochs must be positive");
  if (!(eval_interval > 0)) throw ConfigError("train config: eval_interval must be positive");
  if (!(clip_norm >= 0)) throw ConfigError("train config: clip_norm must be non-negative");
}

std::map<std::string, std::string> TrainConfig::to_kv() const {
  return {{"beta1", num(beta1)},
          {"beta2", num(beta2)},
          {"eps", num(eps)},
          {"lr_scale", num(lr_scale)},
          {"warmup", std::to_string(warmup)},
          {"label_smoothing", num(label_smoothing)},
          {"batch_tokens", std::to_string(batch_tokens)},
          {"max_epochs", std::to_string(max_epochs)},
          {"max_steps", std::to_string(max_steps)},
          {"patience", std::to_string(patience)},
          {"eval_interval", num(eval_interval)},
          {"clip_norm", num(clip_norm)},
          {"seed", std::to_string(seed)}};
}

TrainConfig TrainConfig::from_kv(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  c.beta1 = kv_number(kv, "beta1", c.beta1);
  c.beta2 = kv_number(kv, "beta2", c.beta2);
  c.eps = kv_number(kv, "eps", c.eps);
  c.lr_scale = kv_number(kv, "lr_scale", c.lr_scale);
  c.warmup = kv_number(kv, "warmup", c.warmup);
  c.label_smoothing = kv_number(kv, "label_smoothing", c.label_smoothing);
  c.batch_tokens = kv_number(kv, "batch_tokens", c.batch_tokens);
  c.max_epochs = kv_number(kv, "max_epochs", c.max_epochs);
  c.max_steps = kv_number(kv, "max_steps", c.max_steps);
  c.patience = kv_number(kv, "patience", c.patience);
  c.eval_interval = kv_number(kv, "eval_interval", c.eval_interval);
  c.clip_norm = kv_number(kv, "clip_norm", c.clip_norm);
  c.seed = kv_number(kv, "seed", c.seed);
  return c;
}

double lr_at(std::size_t step, std::size_t warmup, double scale) {
  if (step < 1) throw ConfigError("lr_at: step must be at least 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return scale * std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
}

void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments& moments, std::size_t step,
               double lr, double beta1, double beta2, double eps, const std::string& name) {
  if (grad.size() != param.size())
    throw DimensionError("adam_step: " + name + " has " + std::to_string(param.size()) + " values but " +
                         std::to_string(grad.size()) + " gradients");
  if (step < 1) throw ConfigError("adam_step: step must be at least 1");
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw NumericError("non-finite gradient in " + name + " at index " + std::to_string(i));
  if (moments.m.size() != param.size()) {
    moments.m.assign(param.size(), 0.0);
    moments.v.assign(param.size(), 0.0);
  }
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    moments.m[i] = beta1 * moments.m[i] + (1.0 - beta1) * grad[i];
    moments.v[i] = beta2 * moments.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double m_hat = moments.m[i] / c1;
    const double v_hat = moments.v[i] / c2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

void AdamOptimizer::step(std::vector<NamedParameter>& params, double lr) {
  ++step_;
  moments_.resize(params.size());
  std::vector<double> zeros;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& t = params[i].value;
    std::span<const double> g;
    if (t.has_grad()) {
      g = t.grad();
    } else {
      zeros.assign(t.size(), 0.0);
      g = zeros;
    }
    adam_step(t.mutable_data(), g, moments_[i], step_, lr, beta1_, beta2_, eps_, params[i].name);
    t.zero_grad();
  }
}

double clip_gradients(std::vector<NamedParameter>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.value.has_grad())
      for (double g : p.value.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params)
      if (p.value.has_grad())
        for (double& g : p.value.mutable_grad()) g *= s;
  }
  return norm;
}

std::vector<TrainExample> training_examples(const ParallelCorpus& corpus) {
  std::vector<TrainExample> out;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d)
    for (std::size_t s = 0; s < corpus.documents[d].sentences.size(); ++s) out.push_back({d, s});
  return out;
}

std::vector<std::size_t> sample_context_sizes(std::size_t n, std::size_t max_context, Rng& rng) {
  std::vector<std::size_t> k(n);
  for (auto& v : k) v = static_cast<std::size_t>(rng.below(max_context + 1));
  return k;
}

std::string format_log_record(const TrainLogRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu\t%.6e\t%.6f\t%.6f", r.step, r.lr, r.train_loss, r.valid_ppl);
  return buf;
}

std::vector<TrainLogRecord> parse_training_log(std::istream& in) {
  std::vector<TrainLogRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    TrainLogRecord r{};
    std::string ppl;
    if (!(ss >> r.step >> r.lr >> r.train_loss >> ppl))
      throw ParseError("training log line " + std::to_string(lineno) + ": expected 4 fields");
    r.valid_ppl = std::stod(ppl);
    out.push_back(r);
  }
  return out;
}

double validation_perplexity(const Model& model, const ParallelCorpus& corpus, const Vocabulary& src_vocab,
                             const Vocabulary& tgt_vocab, std::size_t k) {
  NoGradGuard no_grad;
  const Layout layout = layout_of(model.config().arch);
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& doc : corpus.documents)
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      SequenceBatch b = build_batch(layout, doc, i, k, src_vocab, tgt_vocab);
      auto ce = ops::cross_entropy(model.forward(b), b.target_out, 0.0, Vocabulary::kPad);
      for (std::size_t t = b.score_begin; t < ce.token_logprobs.size(); ++t) {
        if (std::isnan(ce.token_logprobs[t])) continue;
        nll -= ce.token_logprobs[t];
        ++tokens;
      }
    }
  if (tokens == 0) return std::numeric_limits<double>::quiet_NaN();
  return std::exp(nll / static_cast<double>(tokens));
}

TrainResult train(Model& model, const ParallelCorpus& train_set, const ParallelCorpus& valid_set,
                  const Vocabulary& src_vocab, const Vocabulary& tgt_vocab, const TrainConfig& config,
                  std::ostream* log) {
  config.validate();
  const auto examples = training_examples(train_set);
  if (examples.empty()) throw ValidationError("training corpus has no sentences");
  if (valid_set.sentence_count() == 0) throw ValidationError("validation corpus has no sentences");

  const Layout layout = layout_of(model.config().arch);
  const std::size_t max_k = layout == Layout::sentence ? 0 : model.config().max_context;
  const Rng root(config.seed);
  AdamOptimizer adam(config.beta1, config.beta2, config.eps);
  auto& params = model.parameters();
  for (auto& p : params) p.value.zero_grad();

  TrainResult result;
  result.context_histogram.assign(max_k + 1, 0);
  result.best_valid_ppl = std::numeric_limits<double>::infinity();
  Snapshot best = snapshot(model);
  std::size_t stale = 0;
  std::size_t step = 0;
  double loss_sum = 0.0;
  std::size_t loss_tokens = 0;

  auto evaluate = [&](double lr) {
    const double ppl = validation_perplexity(model, valid_set, src_vocab, tgt_vocab, max_k);
    TrainLogRecord rec{step, lr, loss_tokens ? loss_sum / static_cast<double>(loss_tokens) : 0.0, ppl};
    result.log.push_back(rec);
    if (log) *log << format_log_record(rec) << '\n' << std::flush;
    loss_sum = 0.0;
    loss_tokens = 0;
    if (!std::isfinite(ppl)) {
      result.diverged = true;
      result.diagnostic = "validation perplexity became non-finite at step " + std::to_string(step);
      return false;
    }
    if (ppl < result.best_valid_ppl) {
      result.best_valid_ppl = ppl;
      result.best_step = step;
      best = snapshot(model);
      stale = 0;
    } else if (++stale >= config.patience) {
      result.early_stopped = true;
      return false;
    }
    return true;
  };

  bool running = true;
  for (std::size_t epoch = 0; running && epoch < config.max_epochs; ++epoch) {
    Rng epoch_rng = root.split("epoch").split(epoch);
    auto order = examples;
    epoch_rng.shuffle(order);
    const auto ks = sample_context_sizes(order.size(), max_k, epoch_rng);

    std::vector<SequenceBatch> batches;
    batches.reserve(order.size());
    for (std::size_t e = 0; e < order.size(); ++e) {
      ++result.context_histogram[ks[e]];
      batches.push_back(build_batch(layout, train_set.documents[order[e].doc], order[e].sentence, ks[e], src_vocab,
                                    tgt_vocab));
    }
    // Group consecutive examples into updates of about batch_tokens target tokens.
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t b = 0; b < batches.size();) {
      std::size_t tokens = 0, e = b;
      while (e < batches.size() && (e == b || tokens + batches[e].target_out.size() <= config.batch_tokens))
        tokens += batches[e++].target_out.size();
      groups.emplace_back(b, e);
      b = e;
    }
    const std::size_t eval_every =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(config.eval_interval * groups.size())));

    for (std::size_t g = 0; g < groups.size(); ++g) {
      ++step;
      const double lr = lr_at(step, config.warmup, config.lr_scale);
      std::size_t total = 0;
      for (std::size_t e = groups[g].first; e < groups[g].second; ++e) total += batches[e].target_out.size();
      Rng drop_rng = root.split("dropout").split(step);
      for (std::size_t e = groups[g].first; e < groups[g].second; ++e) {
        const SequenceBatch& b = batches[e];
        auto ce = ops::cross_entropy(model.forward(b, nullptr, &drop_rng), b.target_out, config.label_smoothing,
                                     Vocabulary::kPad);
        const double weight = static_cast<double>(ce.token_count) / static_cast<double>(total);
        loss_sum += ce.loss.item() * static_cast<double>(ce.token_count);
        loss_tokens += ce.token_count;
        ops::scale(ce.loss, weight).backward();
      }
      try {
        clip_gradients(params, config.clip_norm);
        adam.step(params, lr);
      } catch (const NumericError& e) {
        result.diverged = true;
        result.diagnostic = std::string(e.what()) + " at step " + std::to_string(step);
        running = false;
        break;
      }
      const bool last = g + 1 == groups.size();
      if (((g + 1) % eval_every == 0 || last) && !evaluate(lr)) {
        running = false;
        break;
      }
      if (config.max_steps && step >= config.max_steps) {
        if (!((g + 1) % eval_every == 0 || last)) evaluate(lr);
        running = false;
        break;
      }
    }
    result.epochs = epoch + 1;
  }
  result.steps = step;
  restore(model, best);
  return result;
}

}  // namespace docmt

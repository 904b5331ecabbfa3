#include "docmt/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "docmt/errors.hpp"
#include "docmt/ops.hpp"

namespace docmt {

namespace {

// Log-probabilities of the next token after `prefix`.
std::vector<double> next_logprobs(const Model& model, const EncoderMemory& memory, const TokenIds& prefix) {
  Tensor logits = model.decode(memory, prefix);
  const std::size_t v = logits.cols();
  const auto row = logits.data().subspan((logits.rows() - 1) * v, v);
  const double mx = *std::max_element(row.begin(), row.end());
  double z = 0.0;
  for (double x : row) z += std::exp(x - mx);
  const double lz = mx + std::log(z);
  std::vector<double> out(v);
  for (std::size_t i = 0; i < v; ++i) out[i] = row[i] - lz;
  // Padding and BOS are never generated.
  out[Vocabulary::kPad] = out[Vocabulary::kBos] = -std::numeric_limits<double>::infinity();
  return out;
}

bool better(const Hypothesis& a, const Hypothesis& b, bool normalize) {
  const double sa = normalize ? a.normalized() : a.logprob;
  const double sb = normalize ? b.normalized() : b.logprob;
  if (sa != sb) return sa > sb;
  return a.tokens < b.tokens;
}

}  // namespace

std::string to_string(ContextMode mode) {
  switch (mode) {
    case ContextMode::correct: return "correct";
    case ContextMode::random: return "random";
    case ContextMode::none: return "none";
  }
  return "?";
}

ContextMode parse_context_mode(std::string_view name) {
  if (name == "correct") return ContextMode::correct;
  if (name == "random") return ContextMode::random;
  if (name == "none") return ContextMode::none;
  throw ConfigError("unknown context mode '" + std::string(name) + "' (expected correct, random or none)");
}

void randomize_context(std::vector<TokenIds>& sentences, const Vocabulary& vocab, Rng& rng) {
  const std::size_t choices = vocab.size() - Vocabulary::kReserved;
  if (choices == 0) throw VocabularyError("vocabulary has no tokens to sample random context from");
  for (auto& s : sentences)
    for (auto& t : s) t = static_cast<std::int32_t>(Vocabulary::kReserved + rng.below(choices));
}

SentenceContext gather_context(const ParallelDocument& doc, std::size_t i, std::size_t k, const Vocabulary& src_vocab,
                               const Vocabulary& tgt_vocab, ContextMode mode, TargetContextSource target_source,
                               const TranslationCache* cache, std::uint64_t seed) {
  SentenceContext ctx;
  if (mode == ContextMode::none || k == 0) return ctx;
  const std::size_t first = i >= k ? i - k : 0;
  for (std::size_t j = first; j < i; ++j) {
    ctx.source.push_back(src_vocab.encode(doc.sentences[j].source));
    if (target_source == TargetContextSource::gold) {
      ctx.target.push_back(tgt_vocab.encode(doc.sentences[j].target));
    } else {
      auto it = cache ? cache->find(j) : TranslationCache::const_iterator{};
      if (!cache || it == cache->end())
        throw ContextError("no generated translation for context sentence " + std::to_string(j) + " of " + doc.id);
      ctx.target.push_back(tgt_vocab.encode(it->second));
    }
  }
  if (mode == ContextMode::random) {
    Rng rng = Rng(seed).split("random-context").split(doc.id).split(i);
    randomize_context(ctx.source, src_vocab, rng);
    randomize_context(ctx.target, tgt_vocab, rng);
  }
  return ctx;
}

std::size_t max_decode_length(std::size_t source_length) { return 2 * source_length + 8; }

Hypothesis greedy_decode(const Model& model, const SequenceBatch& batch, std::size_t max_len) {
  NoGradGuard no_grad;
  const EncoderMemory memory = model.encode(batch);
  TokenIds prefix(batch.target_in.begin(), batch.target_in.begin() + batch.target_length());
  Hypothesis h;
  while (h.tokens.size() < max_len) {
    const auto lp = next_logprobs(model, memory, prefix);
    // max_element returns the first maximum, i.e. the lowest id on ties.
    const auto best = static_cast<std::int32_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    h.logprob += lp[best];
    ++h.length;
    if (best == Vocabulary::kEos) {
      h.finished = true;
      break;
    }
    h.tokens.push_back(best);
    prefix.push_back(best);
  }
  return h;
}

Hypothesis beam_decode(const Model& model, const SequenceBatch& batch, std::size_t beam, std::size_t max_len) {
  if (beam < 1) throw ConfigError("beam size must be at least 1");
  NoGradGuard no_grad;
  const EncoderMemory memory = model.encode(batch);
  const TokenIds base(batch.target_in.begin(), batch.target_in.begin() + batch.target_length());
  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> done;
  for (std::size_t t = 0; t < max_len && !live.empty() && done.size() < beam; ++t) {
    std::vector<Hypothesis> candidates;
    for (const auto& h : live) {
      TokenIds prefix = base;
      prefix.insert(prefix.end(), h.tokens.begin(), h.tokens.end());
      const auto lp = next_logprobs(model, memory, prefix);
      std::vector<std::int32_t> ids(lp.size());
      for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int32_t>(i);
      const std::size_t take = std::min(beam, ids.size());
      std::partial_sort(ids.begin(), ids.begin() + take, ids.end(), [&](std::int32_t a, std::int32_t b) {
        return lp[a] != lp[b] ? lp[a] > lp[b] : a < b;
      });
      for (std::size_t c = 0; c < take; ++c) {
        Hypothesis n = h;
        n.logprob += lp[ids[c]];
        ++n.length;
        if (ids[c] == Vocabulary::kEos)
          n.finished = true;
        else
          n.tokens.push_back(ids[c]);
        candidates.push_back(std::move(n));
      }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Hypothesis& a, const Hypothesis& b) { return better(a, b, false); });
    live.clear();
    for (auto& c : candidates) {
      if (live.size() + done.size() >= beam) break;
      (c.finished ? done : live).push_back(std::move(c));
    }
  }
  for (auto& h : live) done.push_back(std::move(h));
  return *std::min_element(done.begin(), done.end(),
                           [](const Hypothesis& a, const Hypothesis& b) { return better(a, b, true); });
}

TokenIds extract_current(const TokenIds& prefix_without_bos, const TokenIds& generated) {
  TokenIds all = prefix_without_bos;
  all.insert(all.end(), generated.begin(), generated.end());
  auto last = std::find(all.rbegin(), all.rend(), Vocabulary::kSep);
  return TokenIds(last.base(), all.end());
}

DocumentTranslation translate_document(const Model& model, const ParallelDocument& doc, const Vocabulary& src_vocab,
                                       const Vocabulary& tgt_vocab, const TranslateOptions& options) {
  if (options.beam < 1) throw ConfigError("beam size must be at least 1");
  if (options.k > model.config().max_context)
    throw ConfigError("context size " + std::to_string(options.k) + " exceeds the model's maximum " +
                      std::to_string(model.config().max_context));
  const Layout layout = options.layout.value_or(layout_of(model.config().arch));
  DocumentTranslation out;
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    const SentenceContext ctx = gather_context(doc, i, options.k, src_vocab, tgt_vocab, options.mode,
                                               TargetContextSource::generated, &out.cache, options.seed);
    const TokenIds source = src_vocab.encode(doc.sentences[i].source);
    const SequenceBatch batch = assemble_batch(layout, ctx.source, source, ctx.target, {});
    const std::size_t max_len = max_decode_length(source.size());
    const Hypothesis h =
        options.beam == 1 ? greedy_decode(model, batch, max_len) : beam_decode(model, batch, options.beam, max_len);
    const TokenIds forced(batch.target_in.begin() + 1, batch.target_in.end());
    const TokenIds current = layout == Layout::concat ? extract_current(forced, h.tokens) : h.tokens;
    Tokens words = tgt_vocab.decode(current);
    out.cache[i] = words;
    out.sentences.push_back(std::move(words));
  }
  return out;
}

std::vector<io::TranslationRecord> translate_corpus(const Model& model, const ParallelCorpus& corpus,
                                                    const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                                    const TranslateOptions& options) {
  std::vector<io::TranslationRecord> records;
  for (const auto& doc : corpus.documents) {
    auto t = translate_document(model, doc, src_vocab, tgt_vocab, options);
    for (std::size_t i = 0; i < t.sentences.size(); ++i) records.push_back({doc.id, i, std::move(t.sentences[i])});
  }
  return records;
}

ForcedScore force_score(const Model& model, const SequenceBatch& batch, ForwardTrace* trace) {
  NoGradGuard no_grad;
  auto ce = ops::cross_entropy(model.forward(batch, trace), batch.target_out, 0.0, Vocabulary::kPad);
  ForcedScore s;
  for (std::size_t t = batch.score_begin; t < ce.token_logprobs.size(); ++t) {
    if (std::isnan(ce.token_logprobs[t])) continue;
    s.token_logprobs.push_back(ce.token_logprobs[t]);
    s.total += ce.token_logprobs[t];
  }
  return s;
}

}  // namespace docmt

#include "docmt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "docmt/decoding.hpp"
#include "docmt/errors.hpp"
#include "docmt/tagger.hpp"
#include "docmt/training.hpp"

namespace docmt {

namespace {

using NGramCounts = std::map<std::vector<std::string>, std::size_t>;

NGramCounts ngrams(const Tokens& t, std::size_t n) {
  NGramCounts out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[std::vector<std::string>(t.begin() + i, t.begin() + i + n)];
  return out;
}

}  // namespace

BleuResult bleu(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references) {
  if (hypotheses.size() != references.size())
    throw PairingError("BLEU needs one reference per hypothesis (" + std::to_string(hypotheses.size()) +
                       " hypotheses, " + std::to_string(references.size()) + " references)");
  std::array<std::size_t, 4> matched{}, total{};
  BleuResult r;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    r.hyp_length += hypotheses[s].size();
    r.ref_length += references[s].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto hyp = ngrams(hypotheses[s], n);
      const auto ref = ngrams(references[s], n);
      for (const auto& [g, c] : hyp) {
        total[n - 1] += c;
        auto it = ref.find(g);
        if (it != ref.end()) matched[n - 1] += std::min(c, it->second);
      }
    }
  }
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    r.precisions[n] = total[n] ? static_cast<double>(matched[n]) / static_cast<double>(total[n]) : 0.0;
    if (matched[n] == 0) zero = true;
    else log_sum += std::log(r.precisions[n]);
  }
  if (r.hyp_length == 0) {
    r.brevity_penalty = 0.0;
    return r;
  }
  r.brevity_penalty =
      std::exp(std::min(0.0, 1.0 - static_cast<double>(r.ref_length) / static_cast<double>(r.hyp_length)));
  r.score = zero ? 0.0 : 100.0 * r.brevity_penalty * std::exp(log_sum / 4.0);
  return r;
}

CxmiResult cxmi(const Model& model, const ParallelCorpus& corpus, const BatchBuilder& with_context,
                const BatchBuilder& without_context) {
  CxmiResult r;
  long double sum = 0.0L;
  for (const auto& doc : corpus.documents)
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      const ForcedScore with = force_score(model, with_context(doc, i));
      const ForcedScore without = force_score(model, without_context(doc, i));
      if (with.token_logprobs.size() != without.token_logprobs.size())
        throw PairingError("context builders disagree on target length for " + doc.id + " sentence " +
                           std::to_string(i));
      long double s = 0.0L;
      for (std::size_t t = 0; t < with.token_logprobs.size(); ++t)
        s += static_cast<long double>(with.token_logprobs[t]) - without.token_logprobs[t];
      const std::size_t n = with.token_logprobs.size();
      r.sentences.push_back({n ? static_cast<double>(s / n) : 0.0, n});
      sum += s;
      r.token_count += n;
    }
  r.mean_delta = r.token_count ? static_cast<double>(sum / r.token_count) : 0.0;
  return r;
}

SequenceBatch contrastive_batch(const ContrastiveExample& ex, const Tokens& candidate, Layout layout, std::size_t k,
                                const Vocabulary& src_vocab, const Vocabulary& tgt_vocab) {
  std::vector<TokenIds> sc, tc;
  const std::size_t n = std::min(k, ex.source_context.size());
  for (std::size_t j = ex.source_context.size() - n; j < ex.source_context.size(); ++j) {
    sc.push_back(src_vocab.encode(ex.source_context[j]));
    tc.push_back(tgt_vocab.encode(ex.target_context[j]));
  }
  return assemble_batch(layout, sc, src_vocab.encode(ex.source), tc, tgt_vocab.encode(candidate));
}

ContrastiveResult contrastive_accuracy(const std::vector<ContrastiveExample>& examples, const CandidateScorer& score) {
  if (examples.empty()) throw ValidationError("contrastive accuracy needs at least one example");
  ContrastiveResult r;
  for (const auto& ex : examples) {
    const double good = score(ex, ex.correct);
    bool ok = true;
    for (const auto& wrong : ex.incorrect) ok = ok && good > score(ex, wrong);
    auto& cls = r.per_class[ex.correct.at(ex.pronoun_index)];
    ++cls.second;
    ++r.total;
    if (ok) {
      ++cls.first;
      ++r.correct;
    }
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

ContrastiveResult contrastive_accuracy(const Model& model, const std::vector<ContrastiveExample>& examples,
                                       std::size_t k, const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                       std::optional<Layout> layout) {
  const Layout l = layout.value_or(layout_of(model.config().arch));
  return contrastive_accuracy(examples, [&](const ContrastiveExample& ex, const Tokens& candidate) {
    return force_score(model, contrastive_batch(ex, candidate, l, k, src_vocab, tgt_vocab)).total;
  });
}

F1Score tagged_word_f1(const std::vector<std::vector<std::string>>& ref_tagged,
                       const std::vector<std::vector<std::string>>& hyp_tagged) {
  if (ref_tagged.size() != hyp_tagged.size())
    throw PairingError("F1 needs one hypothesis sentence per reference sentence");
  F1Score f;
  for (std::size_t s = 0; s < ref_tagged.size(); ++s) {
    std::map<std::string, std::size_t> ref;
    for (const auto& w : ref_tagged[s]) ++ref[w];
    for (const auto& w : hyp_tagged[s]) {
      auto it = ref.find(w);
      if (it != ref.end() && it->second > 0) {
        --it->second;
        ++f.matched;
      }
    }
    f.ref_tagged += ref_tagged[s].size();
    f.hyp_tagged += hyp_tagged[s].size();
  }
  if (f.ref_tagged == 0 && f.hyp_tagged == 0) {
    f.precision = f.recall = f.f1 = 1.0;
    return f;
  }
  f.precision = f.hyp_tagged ? static_cast<double>(f.matched) / static_cast<double>(f.hyp_tagged) : 0.0;
  f.recall = f.ref_tagged ? static_cast<double>(f.matched) / static_cast<double>(f.ref_tagged) : 0.0;
  f.f1 = f.precision + f.recall > 0 ? 2.0 * f.precision * f.recall / (f.precision + f.recall) : 0.0;
  return f;
}

std::map<PhenomenonKind, F1Score> phenomena_f1(const ParallelCorpus& reference,
                                               const std::vector<std::vector<Tokens>>& hypotheses,
                                               const Lexicon& lexicon) {
  if (hypotheses.size() != reference.documents.size())
    throw PairingError("phenomena F1 needs one hypothesis document per reference document (" +
                       std::to_string(hypotheses.size()) + " vs " + std::to_string(reference.documents.size()) + ")");
  std::map<PhenomenonKind, std::vector<std::vector<std::string>>> ref_words, hyp_words;
  for (std::size_t d = 0; d < hypotheses.size(); ++d) {
    const auto& doc = reference.documents[d];
    if (hypotheses[d].size() != doc.sentences.size())
      throw PairingError("document " + doc.id + " has " + std::to_string(doc.sentences.size()) +
                         " sentences but " + std::to_string(hypotheses[d].size()) + " hypotheses");
    std::vector<Tokens> refs;
    for (const auto& s : doc.sentences) refs.push_back(s.target);
    const auto rt = tag_document(refs, Side::target, lexicon);
    const auto ht = tag_document(hypotheses[d], Side::target, lexicon);
    for (PhenomenonKind k : kAllKinds) {
      auto& rw = ref_words[k];
      auto& hw = hyp_words[k];
      const std::size_t base = rw.size();
      rw.resize(base + refs.size());
      hw.resize(base + refs.size());
      for (const auto& t : rt)
        if (t.kind == k) rw[base + t.sentence].push_back(refs[t.sentence][t.token]);
      for (const auto& t : ht)
        if (t.kind == k) hw[base + t.sentence].push_back(hypotheses[d][t.sentence][t.token]);
    }
  }
  std::map<PhenomenonKind, F1Score> out;
  for (PhenomenonKind k : kAllKinds) out[k] = tagged_word_f1(ref_words[k], hyp_words[k]);
  return out;
}

double perplexity(const Model& model, const ParallelCorpus& corpus, const Vocabulary& src_vocab,
                  const Vocabulary& tgt_vocab, std::size_t k) {
  return validation_perplexity(model, corpus, src_vocab, tgt_vocab, k);
}

std::string format_fixed(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

void MetricReport::add(const std::string& metric, const std::string& configuration, double value) {
  rows_.emplace_back(metric, configuration, value);
}

std::string MetricReport::tsv() const {
  std::string out;
  for (const auto& [m, c, v] : rows_) out += m + '\t' + c + '\t' + format_fixed(v) + '\n';
  return out;
}

std::string MetricReport::summary() const {
  std::string out;
  for (const auto& [m, c, v] : rows_) out += m + '.' + c + '=' + format_fixed(v) + '\n';
  return out;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace docmt

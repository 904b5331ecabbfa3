#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "docmt/corpus.hpp"
#include "docmt/corpus_io.hpp"
#include "docmt/model.hpp"

namespace docmt {

enum class ContextMode { correct, random, none };

std::string to_string(ContextMode mode);
ContextMode parse_context_mode(std::string_view name);

// Context sentences for one current sentence, oldest first.
struct SentenceContext {
  std::vector<TokenIds> source;
  std::vector<TokenIds> target;
};

// Replaces every token by a uniform draw from the non-reserved part of
// `vocab`, keeping each sentence's length.
void randomize_context(std::vector<TokenIds>& sentences, const Vocabulary& vocab, Rng& rng);

// Context of sentence i: up to k previous sentences. Target context comes from
// the gold document or from `cache`. In random mode the correct context is
// built first and then randomized with a stream derived from (seed, doc, i).
SentenceContext gather_context(const ParallelDocument& doc, std::size_t i, std::size_t k, const Vocabulary& src_vocab,
                               const Vocabulary& tgt_vocab, ContextMode mode, TargetContextSource target_source,
                               const TranslationCache* cache, std::uint64_t seed);

struct Hypothesis {
  TokenIds tokens;      // generated tokens, EOS excluded
  double logprob = 0;   // sum over generated tokens including EOS when finished
  std::size_t length = 0;  // scored tokens
  bool finished = false;

  double normalized() const { return length ? logprob / static_cast<double>(length) : 0.0; }
};

// Decodes after the batch's decoder input (BOS plus any forced prefix).
Hypothesis greedy_decode(const Model& model, const SequenceBatch& batch, std::size_t max_len);
// Beam search ranked by length-normalized log-probability; ties go to the
// lexicographically smaller token sequence.
Hypothesis beam_decode(const Model& model, const SequenceBatch& batch, std::size_t beam, std::size_t max_len);

// Tokens after the last SEP of (forced prefix + generated).
TokenIds extract_current(const TokenIds& prefix_without_bos, const TokenIds& generated);

std::size_t max_decode_length(std::size_t source_length);

struct TranslateOptions {
  std::size_t k = 0;
  std::size_t beam = 1;
  ContextMode mode = ContextMode::correct;
  std::uint64_t seed = 0;
  std::optional<Layout> layout;  // defaults to the model's own layout
};

struct DocumentTranslation {
  std::vector<Tokens> sentences;
  TranslationCache cache;  // the model's own outputs, used as target context
};

DocumentTranslation translate_document(const Model& model, const ParallelDocument& doc, const Vocabulary& src_vocab,
                                       const Vocabulary& tgt_vocab, const TranslateOptions& options);

std::vector<io::TranslationRecord> translate_corpus(const Model& model, const ParallelCorpus& corpus,
                                                    const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                                    const TranslateOptions& options);

struct ForcedScore {
  double total = 0;                    // sum over current-sentence tokens and EOS
  std::vector<double> token_logprobs;  // the summed terms, in order
};

// Teacher-forced score of the batch's target. Context-target tokens of the
// concat layout are excluded.
ForcedScore force_score(const Model& model, const SequenceBatch& batch, ForwardTrace* trace = nullptr);

}  // namespace docmt

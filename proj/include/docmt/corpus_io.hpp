#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "docmt/contrastive.hpp"
#include "docmt/corpus.hpp"
#include "docmt/generator.hpp"

// Line-oriented, tab-separated file formats. Tokens inside a field are
// separated by single spaces.
namespace docmt::io {

namespace fs = std::filesystem;

// doc_id TAB sent_idx TAB src_tokens TAB tgt_tokens
void save_documents(const fs::path& path, const ParallelCorpus& corpus);
ParallelCorpus load_documents(const fs::path& path);

// doc_id TAB sent_idx TAB tok_idx TAB kind TAB side TAB ante_sent TAB ante_start TAB ante_end
// (antecedent fields are '-' when absent).
void save_annotations(const fs::path& path, const ParallelCorpus& corpus);
// Replaces the annotations of `corpus` with the records of `path`.
ParallelCorpus load_annotations(const fs::path& path, ParallelCorpus corpus);

// id TAB doc_id TAB sent_idx TAB src_ctx TAB tgt_ctx TAB source TAB correct TAB
// incorrect TAB pronoun_idx TAB antecedent. Context sentences are joined with
// " ||| ", incorrect targets with " || ", and the antecedent reference reads
// distance:src_start-src_end:tgt_start-tgt_end.
void save_contrastive(const fs::path& path, const std::vector<ContrastiveExample>& examples);
std::vector<ContrastiveExample> load_contrastive(const fs::path& path);

// category TAB fields... (noun, article, pronoun, cue, formal, informal,
// past_verb, source_pronoun, source_article)
void save_lexicon(const fs::path& path, const Lexicon& lexicon);
Lexicon load_lexicon(const fs::path& path);

// doc_id TAB sent_idx TAB tokens
struct TranslationRecord {
  std::string doc_id;
  std::size_t sentence = 0;
  Tokens tokens;
  bool operator==(const TranslationRecord&) const = default;
};
void save_translations(const fs::path& path, const std::vector<TranslationRecord>& records);
std::vector<TranslationRecord> load_translations(const fs::path& path);

std::vector<std::string> split_tabs(const std::string& line);
std::string read_file(const fs::path& path);

}  // namespace docmt::io

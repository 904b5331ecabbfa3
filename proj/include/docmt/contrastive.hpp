#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "docmt/corpus.hpp"
#include "docmt/generator.hpp"

namespace docmt {

// A pronoun in context with its correct translation and one variant per wrong
// gender. Context sentences are oldest first; the antecedent lives in context
// sentence `context.size() - distance` on both sides.
struct ContrastiveExample {
  std::string id;
  std::string doc_id;
  std::size_t sentence = 0;
  std::vector<Tokens> source_context;
  std::vector<Tokens> target_context;
  Tokens source;
  Tokens correct;
  std::vector<Tokens> incorrect;
  std::size_t pronoun_index = 0;  // position in the target sentence
  std::size_t distance = 0;
  std::size_t src_begin = 0, src_end = 0;  // antecedent span, source side
  std::size_t tgt_begin = 0, tgt_end = 0;  // antecedent span, target side

  bool operator==(const ContrastiveExample&) const = default;
};

struct ContrastiveSet {
  std::vector<ContrastiveExample> examples;
  std::string warning;  // set when no pronoun was eligible
};

// Pronouns with antecedent distance 1..max_context become examples; classes
// are balanced by downsampling every pronoun type to the rarest one.
ContrastiveSet make_contrastive_set(const ParallelCorpus& corpus, std::uint64_t seed,
                                    std::size_t max_context = 5,
                                    const Lexicon& lexicon = Lexicon::standard());

// One document per example: its context sentences followed by the example
// sentence with the correct target. Pronoun annotations are carried over.
ParallelCorpus contrastive_to_corpus(const std::vector<ContrastiveExample>& examples,
                                     const Lexicon& lexicon = Lexicon::standard());

}  // namespace docmt

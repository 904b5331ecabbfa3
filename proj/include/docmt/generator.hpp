#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "docmt/corpus.hpp"

namespace docmt {

enum class Gender { masculine = 0, feminine = 1, neuter = 2 };
inline constexpr std::size_t kGenderCount = 3;

std::string_view to_string(Gender g);
Gender parse_gender(std::string_view text);

// Closed word lists of the two synthetic languages. Emitted next to every
// generated corpus so taggers and tests can work from the same lists.
struct Lexicon {
  struct Noun {
    std::string source, target;
    Gender gender;
  };
  std::vector<Noun> nouns;
  std::array<std::string, kGenderCount> articles;          // target "the"
  std::array<std::string, kGenderCount> pronouns;          // target "it"
  std::string source_pronoun = "it";
  std::string source_article = "the";
  std::array<std::vector<std::string>, kGenderCount> cue_adjectives;  // source side
  std::string informal_you, formal_you;                    // target second person
  std::vector<std::string> past_verb_forms;                // suffix-marked target verbs

  static const Lexicon& standard();

  // Gender of a target noun, if it is one.
  std::optional<Gender> target_noun_gender(std::string_view token) const;
  std::optional<Gender> pronoun_gender(std::string_view token) const;
  bool is_target_noun(std::string_view token) const;
  bool is_source_noun(std::string_view token) const;
  bool is_past_verb(std::string_view token) const;
};

struct GenConfig {
  std::size_t n_docs = 240;
  std::size_t sents_per_doc = 8;
  // Probability that a noun mention is followed by a pronoun referring to it.
  double pronoun_rate = 0.35;
  // Probability that a pronoun sentence uses a predicate selective for the
  // antecedent's gender, which reveals the gender without context.
  double pronoun_cue_rate = 0.5;
  // Weights over antecedent distances 0..5; must sum to 1.
  std::array<double, 6> distance_weights = {0.0, 0.2, 0.2, 0.2, 0.2, 0.2};
  std::array<double, kGenderCount> gender_weights = {1.0, 1.0, 1.0};
  std::size_t max_entities_per_doc = 1;
  std::size_t context_window = 5;  // register/tense markers recur within this window
  bool cohesion = true;
  bool formality = false;
  bool verb_form = false;
};

// Deterministic in (config, seed). Throws ValidationError for configs that
// cannot yield a pronoun although pronoun_rate > 0.
ParallelCorpus generate_corpus(const GenConfig& config, std::uint64_t seed);

}  // namespace docmt

#include "docmt/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "docmt/errors.hpp"
#include "docmt/rng.hpp"

namespace docmt {

std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::masculine: return "m";
    case Gender::feminine: return "f";
    case Gender::neuter: return "n";
  }
  return "?";
}

Gender parse_gender(std::string_view text) {
  if (text == "m") return Gender::masculine;
  if (text == "f") return Gender::feminine;
  if (text == "n") return Gender::neuter;
  throw ParseError("unknown gender '" + std::string(text) + "'");
}

namespace {

struct WordPair {
  const char* source;
  const char* target;
};

constexpr WordPair kNeutralAdjectives[] = {{"big", "gross"}, {"small", "klein"}, {"old", "alt"},
                                           {"new", "neu"},   {"red", "rot"},     {"green", "gruen"}};
constexpr WordPair kCueAdjectives[3][2] = {{{"loud", "laut"}, {"strong", "stark"}},
                                           {{"bright", "hell"}, {"narrow", "schmal"}},
                                           {{"empty", "leer"}, {"cheap", "billig"}}};
constexpr WordPair kAdverbs[] = {{"home", "heim"}, {"now", "jetzt"}, {"today", "heute"},
                                 {"slowly", "langsam"}};
struct Verb {
  const char* source;
  const char* stem;
};
constexpr Verb kVerbs[] = {{"walk", "geh"}, {"sing", "sing"}, {"wait", "wart"},
                           {"work", "arbeit"}, {"read", "les"}};

std::string target_verb(const Verb& v, bool plural, bool past) {
  std::string s = v.stem;
  if (past) return s + (plural ? "ten" : "te");
  return s + (plural ? "en" : "e");
}

Lexicon make_standard() {
  Lexicon lex;
  lex.nouns = {
      {"dog", "hund", Gender::masculine},     {"tree", "baum", Gender::masculine},
      {"chair", "stuhl", Gender::masculine},  {"garden", "garten", Gender::masculine},
      {"cat", "katze", Gender::feminine},     {"lamp", "lampe", Gender::feminine},
      {"door", "tuer", Gender::feminine},     {"street", "strasse", Gender::feminine},
      {"house", "haus", Gender::neuter},      {"book", "buch", Gender::neuter},
      {"car", "auto", Gender::neuter},        {"window", "fenster", Gender::neuter},
  };
  lex.articles = {"der", "die", "das"};
  lex.pronouns = {"er", "sie", "es"};
  for (std::size_t g = 0; g < kGenderCount; ++g)
    for (const auto& a : kCueAdjectives[g]) lex.cue_adjectives[g].push_back(a.source);
  lex.informal_you = "du";
  lex.formal_you = "Sie";
  for (const Verb& v : kVerbs) {
    lex.past_verb_forms.push_back(target_verb(v, false, true));
    lex.past_verb_forms.push_back(target_verb(v, true, true));
  }
  return lex;
}

// One generated sentence plus the positions the annotator needs.
struct Built {
  SentencePair pair;
  std::size_t src_noun = 0, tgt_noun = 0;        // noun positions (article precedes)
  std::size_t src_pronoun = 0, tgt_pronoun = 0;  // pronoun positions
  std::vector<std::size_t> tgt_marked;           // formality / verb-form tokens
};

class DocumentBuilder {
 public:
  DocumentBuilder(const GenConfig& cfg, const Lexicon& lex, Rng rng, std::string id)
      : cfg_(cfg), lex_(lex), rng_(rng) {
    doc_.id = std::move(id);
    if (cfg_.formality) formal_ = rng_.bernoulli(0.5);
    if (cfg_.verb_form) past_ = rng_.bernoulli(0.5);
  }

  ParallelDocument build(std::size_t& pronoun_count) {
    const std::size_t n = cfg_.sents_per_doc;
    while (doc_.size() < n) {
      if (entities_.empty() || rng_.bernoulli(0.6)) {
        mention_step(pronoun_count);
      } else {
        filler();
      }
    }
    doc_.sentences.resize(n);
    std::erase_if(doc_.annotations, [n](const Annotation& a) { return a.sentence >= n; });
    return std::move(doc_);
  }

 private:
  std::size_t next() const { return doc_.size(); }

  template <typename T, std::size_t N>
  const T& pick(const T (&arr)[N]) {
    return arr[rng_.below(N)];
  }

  void push(Built b) {
    const std::size_t i = next();
    if (cfg_.formality || cfg_.verb_form) {
      for (std::size_t pos : b.tgt_marked) {
        const auto& tok = b.pair.target[pos];
        PhenomenonKind kind = lex_.is_past_verb(tok) ? PhenomenonKind::verb_form
                                                     : PhenomenonKind::formality;
        doc_.annotations.push_back({kind, Side::target, i, pos, std::nullopt});
      }
    }
    doc_.sentences.push_back(std::move(b.pair));
  }

  // Chooses the entity of the next mention. Returns npos when no noun is left.
  std::size_t choose_entity() {
    const bool can_add = cfg_.cohesion ? entities_.size() < std::max<std::size_t>(1, cfg_.max_entities_per_doc)
                                       : entities_.size() < lex_.nouns.size();
    if (can_add && (entities_.empty() || !cfg_.cohesion || rng_.bernoulli(0.5))) {
      std::vector<double> w(cfg_.gender_weights.begin(), cfg_.gender_weights.end());
      for (std::size_t g = 0; g < kGenderCount; ++g) {
        bool available = false;
        for (std::size_t k = 0; k < lex_.nouns.size(); ++k)
          available = available || (static_cast<std::size_t>(lex_.nouns[k].gender) == g &&
                                     std::find(entities_.begin(), entities_.end(), k) == entities_.end());
        if (!available) w[g] = 0.0;
      }
      if (std::accumulate(w.begin(), w.end(), 0.0) > 0.0) {
        const std::size_t g = rng_.categorical(w);
        std::vector<std::size_t> candidates;
        for (std::size_t k = 0; k < lex_.nouns.size(); ++k)
          if (static_cast<std::size_t>(lex_.nouns[k].gender) == g &&
              std::find(entities_.begin(), entities_.end(), k) == entities_.end())
            candidates.push_back(k);
        const std::size_t noun = candidates[rng_.below(candidates.size())];
        entities_.push_back(noun);
        return noun;
      }
    }
    if (!cfg_.cohesion || entities_.empty()) return static_cast<std::size_t>(-1);
    return entities_[rng_.below(entities_.size())];
  }

  Built mention_sentence(const Lexicon::Noun& noun) {
    const std::string& art = lex_.articles[static_cast<std::size_t>(noun.gender)];
    Built b;
    switch (rng_.below(4)) {
      case 0:
      case 1: {
        const bool plural = rng_.bernoulli(0.5);
        const bool like = rng_.bernoulli(0.5);
        b.pair.source = {plural ? "we" : "i", like ? "like" : "see", "the", noun.source, "."};
        b.pair.target = {plural ? "wir" : "ich",
                         like ? (plural ? "moegen" : "mag") : (plural ? "sehen" : "sehe"), art,
                         noun.target, "."};
        b.src_noun = 3;
        b.tgt_noun = 3;
        break;
      }
      case 2: {
        const auto& adj = pick(kNeutralAdjectives);
        b.pair.source = {"the", noun.source, "is", adj.source, "."};
        b.pair.target = {art, noun.target, "ist", adj.target, "."};
        b.src_noun = b.tgt_noun = 1;
        break;
      }
      default:
        b.pair.source = {"the", noun.source, "is", "here", "."};
        b.pair.target = {art, noun.target, "ist", "hier", "."};
        b.src_noun = b.tgt_noun = 1;
        break;
    }
    return b;
  }

  Built pronoun_sentence(const Lexicon::Noun& noun) {
    const std::size_t g = static_cast<std::size_t>(noun.gender);
    Built b;
    const std::string& pron = lex_.pronouns[g];
    if (rng_.bernoulli(cfg_.pronoun_cue_rate)) {
      const auto& adj = kCueAdjectives[g][rng_.below(2)];
      b.pair.source = {"it", "is", adj.source, "."};
      b.pair.target = {pron, "ist", adj.target, "."};
    } else if (rng_.bernoulli(0.5)) {
      const auto& adj = pick(kNeutralAdjectives);
      b.pair.source = {"it", "is", adj.source, "."};
      b.pair.target = {pron, "ist", adj.target, "."};
    } else {
      b.pair.source = {"it", "stays", "here", "."};
      b.pair.target = {pron, "bleibt", "hier", "."};
    }
    return b;
  }

  void annotate_mention(std::size_t sent, const Built& b, std::size_t noun) {
    if (!cfg_.cohesion) return;
    if (mentioned_.size() <= noun) mentioned_.resize(lex_.nouns.size(), false);
    if (mentioned_[noun]) {
      doc_.annotations.push_back({PhenomenonKind::cohesion, Side::target, sent, b.tgt_noun, std::nullopt});
    }
    mentioned_[noun] = true;
  }

  void annotate_pronoun(std::size_t sent, const Built& pron, std::size_t ante_sent,
                        const Built& ante) {
    doc_.annotations.push_back({PhenomenonKind::pronoun, Side::source, sent, pron.src_pronoun,
                                AntecedentSpan{ante_sent, ante.src_noun - 1, ante.src_noun + 1}});
    doc_.annotations.push_back({PhenomenonKind::pronoun, Side::target, sent, pron.tgt_pronoun,
                                AntecedentSpan{ante_sent, ante.tgt_noun - 1, ante.tgt_noun + 1}});
  }

  void mention_step(std::size_t& pronoun_count) {
    const std::size_t noun_idx = choose_entity();
    if (noun_idx == static_cast<std::size_t>(-1)) {
      filler();
      return;
    }
    const auto& noun = lex_.nouns[noun_idx];
    const std::size_t remaining = cfg_.sents_per_doc - next();
    std::optional<std::size_t> distance;
    if (rng_.bernoulli(cfg_.pronoun_rate)) {
      std::vector<double> w(cfg_.distance_weights.begin(), cfg_.distance_weights.end());
      const std::size_t d = rng_.categorical(w);
      if (d < remaining) distance = d;
    }

    if (distance && *distance == 0) {
      // Antecedent and pronoun in one sentence.
      const std::string& art = lex_.articles[static_cast<std::size_t>(noun.gender)];
      const auto& adj = pick(kNeutralAdjectives);
      Built b;
      b.pair.source = {"the", noun.source, "is", adj.source, "and", "it", "stays", "here", "."};
      b.pair.target = {art, noun.target, "ist", adj.target, "und",
                       lex_.pronouns[static_cast<std::size_t>(noun.gender)], "bleibt", "hier", "."};
      b.src_noun = b.tgt_noun = 1;
      b.src_pronoun = b.tgt_pronoun = 5;
      const std::size_t i = next();
      annotate_mention(i, b, noun_idx);
      annotate_pronoun(i, b, i, b);
      push(std::move(b));
      ++pronoun_count;
      return;
    }

    Built m = mention_sentence(noun);
    const std::size_t mention_at = next();
    annotate_mention(mention_at, m, noun_idx);
    push(m);
    if (!distance) return;
    for (std::size_t k = 1; k < *distance; ++k) filler();
    Built p = pronoun_sentence(noun);
    annotate_pronoun(next(), p, mention_at, m);
    push(std::move(p));
    ++pronoun_count;
  }

  // Noun-free sentence; may carry formality or tense marking.
  void filler() {
    const std::size_t i = next();
    if (cfg_.formality && rng_.bernoulli(0.35)) {
      if (!last_greeting_ || i - *last_greeting_ >= cfg_.context_window) {
        Built b;
        b.pair.source = {"hello", formal_ ? "sir" : "friend", "."};
        b.pair.target = {"hallo", formal_ ? "herr" : "freund", "."};
        last_greeting_ = i;
        push(std::move(b));
        return;
      }
      const auto& adj = pick(kNeutralAdjectives);
      Built b;
      b.pair.source = {"you", "are", adj.source, "."};
      b.pair.target = {formal_ ? lex_.formal_you : lex_.informal_you, formal_ ? "sind" : "bist",
                       adj.target, "."};
      b.tgt_marked = {0};
      push(std::move(b));
      return;
    }
    if (cfg_.verb_form && past_ && (!last_marker_ || i - *last_marker_ >= cfg_.context_window)) {
      Built b;
      b.pair.source = {"back", "then", "."};
      b.pair.target = {"damals", "."};
      last_marker_ = i;
      push(std::move(b));
      return;
    }
    const bool plural = rng_.bernoulli(0.5);
    const Verb& v = pick(kVerbs);
    const auto& adv = pick(kAdverbs);
    Built b;
    b.pair.source = {plural ? "we" : "i", v.source, adv.source, "."};
    b.pair.target = {plural ? "wir" : "ich", target_verb(v, plural, past_), adv.target, "."};
    if (past_) b.tgt_marked = {1};
    push(std::move(b));
  }

  const GenConfig& cfg_;
  const Lexicon& lex_;
  Rng rng_;
  ParallelDocument doc_;
  std::vector<std::size_t> entities_;
  std::vector<bool> mentioned_;
  bool formal_ = false;
  bool past_ = false;
  std::optional<std::size_t> last_greeting_;
  std::optional<std::size_t> last_marker_;
};

void validate(const GenConfig& cfg) {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (cfg.sents_per_doc == 0) throw ValidationError("sents_per_doc must be positive");
  if (!in_unit(cfg.pronoun_rate)) throw ValidationError("pronoun_rate must lie in [0, 1]");
  if (!in_unit(cfg.pronoun_cue_rate)) throw ValidationError("pronoun_cue_rate must lie in [0, 1]");
  double total = 0.0;
  for (double w : cfg.distance_weights) {
    if (w < 0.0) throw ValidationError("distance weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("distance distribution sums to " + std::to_string(total) + ", not 1");
  }
  double gtotal = 0.0;
  for (double w : cfg.gender_weights) {
    if (w < 0.0) throw ValidationError("gender weights must be nonnegative");
    gtotal += w;
  }
  if (!(gtotal > 0.0)) throw ValidationError("gender weights sum to zero");
  if (cfg.pronoun_rate > 0.0 && cfg.n_docs > 0) {
    std::size_t min_d = 0;
    while (min_d < cfg.distance_weights.size() && cfg.distance_weights[min_d] == 0.0) ++min_d;
    if (min_d >= cfg.sents_per_doc) {
      throw ValidationError("no antecedent distance fits in documents of " +
                            std::to_string(cfg.sents_per_doc) + " sentences");
    }
  }
}

}  // namespace

const Lexicon& Lexicon::standard() {
  static const Lexicon lex = make_standard();
  return lex;
}

std::optional<Gender> Lexicon::target_noun_gender(std::string_view token) const {
  for (const auto& n : nouns)
    if (n.target == token) return n.gender;
  return std::nullopt;
}

std::optional<Gender> Lexicon::pronoun_gender(std::string_view token) const {
  for (std::size_t g = 0; g < kGenderCount; ++g)
    if (pronouns[g] == token) return static_cast<Gender>(g);
  return std::nullopt;
}

bool Lexicon::is_target_noun(std::string_view token) const {
  return target_noun_gender(token).has_value();
}

bool Lexicon::is_source_noun(std::string_view token) const {
  for (const auto& n : nouns)
    if (n.source == token) return true;
  return false;
}

bool Lexicon::is_past_verb(std::string_view token) const {
  return std::find(past_verb_forms.begin(), past_verb_forms.end(), token) != past_verb_forms.end();
}

ParallelCorpus generate_corpus(const GenConfig& config, std::uint64_t seed) {
  validate(config);
  const Lexicon& lex = Lexicon::standard();
  const Rng root = Rng(seed).split("corpus");
  ParallelCorpus corpus;
  std::size_t pronouns = 0;
  for (std::size_t d = 0; d < config.n_docs; ++d) {
    DocumentBuilder builder(config, lex, root.split(d), "doc" + std::to_string(d));
    corpus.documents.push_back(builder.build(pronouns));
  }
  if (config.pronoun_rate > 0.0 && config.n_docs > 0 && pronouns == 0) {
    throw ValidationError("generation config yields no pronoun instances");
  }
  return corpus;
}

}  // namespace docmt

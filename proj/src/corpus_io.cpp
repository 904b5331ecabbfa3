#include "docmt/corpus_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "docmt/errors.hpp"

namespace docmt::io {

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return in;
}

[[noreturn]] void parse_fail(const fs::path& path, std::size_t line, const std::string& why) {
  throw ParseError(path.string() + ":" + std::to_string(line) + ": " + why);
}

std::size_t parse_index(const std::string& field, const fs::path& path, std::size_t line,
                        const char* what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    parse_fail(path, line, std::string("bad ") + what + " '" + field + "'");
  }
  return v;
}

std::vector<std::string> split_on(const std::string& text, const std::string& delim) {
  std::vector<std::string> parts;
  if (text.empty()) return parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = text.find(delim, start);
    if (pos == std::string::npos) {
      parts.push_back(text.substr(start));
      break;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + delim.size();
  }
  return parts;
}

std::string join_sentences(const std::vector<Tokens>& sents, const std::string& delim) {
  std::string out;
  for (std::size_t i = 0; i < sents.size(); ++i) {
    if (i) out += delim;
    out += join_tokens(sents[i]);
  }
  return out;
}

template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(line, lineno);
  }
}

}  // namespace

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string read_file(const fs::path& path) {
  auto in = open_in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void save_documents(const fs::path& path, const ParallelCorpus& corpus) {
  auto out = open_out(path);
  for (const auto& doc : corpus.documents)
    for (std::size_t i = 0; i < doc.size(); ++i)
      out << doc.id << '\t' << i << '\t' << join_tokens(doc.sentences[i].source) << '\t'
          << join_tokens(doc.sentences[i].target) << '\n';
}

ParallelCorpus load_documents(const fs::path& path) {
  ParallelCorpus corpus;
  std::map<std::string, bool> seen;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    auto f = split_tabs(line);
    if (f.size() != 4) parse_fail(path, lineno, "expected 4 tab-separated fields, got " + std::to_string(f.size()));
    const std::size_t idx = parse_index(f[1], path, lineno, "sentence index");
    if (corpus.documents.empty() || corpus.documents.back().id != f[0]) {
      if (seen.count(f[0])) parse_fail(path, lineno, "document '" + f[0] + "' is not contiguous");
      seen[f[0]] = true;
      corpus.documents.push_back({f[0], {}, {}});
    }
    auto& doc = corpus.documents.back();
    if (idx != doc.size()) {
      parse_fail(path, lineno, "sentence index " + f[1] + " out of order (expected " +
                                   std::to_string(doc.size()) + ")");
    }
    doc.sentences.push_back({split_tokens(f[2]), split_tokens(f[3])});
  });
  return corpus;
}

void save_annotations(const fs::path& path, const ParallelCorpus& corpus) {
  auto out = open_out(path);
  for (const auto& doc : corpus.documents) {
    for (const auto& a : doc.annotations) {
      out << doc.id << '\t' << a.sentence << '\t' << a.token << '\t' << to_string(a.kind) << '\t'
          << to_string(a.side) << '\t';
      if (a.antecedent) {
        out << a.antecedent->sentence << '\t' << a.antecedent->begin << '\t' << a.antecedent->end;
      } else {
        out << "-\t-\t-";
      }
      out << '\n';
    }
  }
}

ParallelCorpus load_annotations(const fs::path& path, ParallelCorpus corpus) {
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    by_id[corpus.documents[i].id] = i;
    corpus.documents[i].annotations.clear();
  }
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    auto f = split_tabs(line);
    if (f.size() != 8) parse_fail(path, lineno, "expected 8 tab-separated fields, got " + std::to_string(f.size()));
    auto it = by_id.find(f[0]);
    const std::string record = path.string() + ":" + std::to_string(lineno) + " (doc " + f[0] +
                               ", sentence " + f[1] + ")";
    if (it == by_id.end()) throw AnnotationError("annotation " + record + ": unknown document");
    Annotation a;
    a.sentence = parse_index(f[1], path, lineno, "sentence index");
    a.token = parse_index(f[2], path, lineno, "token index");
    try {
      a.kind = parse_kind(f[3]);
      a.side = parse_side(f[4]);
    } catch (const ConfigError& e) {
      parse_fail(path, lineno, e.what());
    }
    const bool none = f[5] == "-" && f[6] == "-" && f[7] == "-";
    if (!none) {
      a.antecedent = AntecedentSpan{parse_index(f[5], path, lineno, "antecedent sentence"),
                                    parse_index(f[6], path, lineno, "antecedent start"),
                                    parse_index(f[7], path, lineno, "antecedent end")};
    }
    ParallelDocument& doc = corpus.documents[it->second];
    if (auto why = annotation_problem(doc, a)) throw AnnotationError("annotation " + record + ": " + *why);
    doc.annotations.push_back(a);
  });
  return corpus;
}

void save_contrastive(const fs::path& path, const std::vector<ContrastiveExample>& examples) {
  auto out = open_out(path);
  for (const auto& ex : examples) {
    out << ex.id << '\t' << ex.doc_id << '\t' << ex.sentence << '\t'
        << join_sentences(ex.source_context, " ||| ") << '\t'
        << join_sentences(ex.target_context, " ||| ") << '\t' << join_tokens(ex.source) << '\t'
        << join_tokens(ex.correct) << '\t' << join_sentences(ex.incorrect, " || ") << '\t'
        << ex.pronoun_index << '\t' << ex.distance << ':' << ex.src_begin << '-' << ex.src_end
        << ':' << ex.tgt_begin << '-' << ex.tgt_end << '\n';
  }
}

std::vector<ContrastiveExample> load_contrastive(const fs::path& path) {
  std::vector<ContrastiveExample> out;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    auto f = split_tabs(line);
    if (f.size() != 10) parse_fail(path, lineno, "expected 10 tab-separated fields, got " + std::to_string(f.size()));
    ContrastiveExample ex;
    ex.id = f[0];
    ex.doc_id = f[1];
    ex.sentence = parse_index(f[2], path, lineno, "sentence index");
    for (const auto& s : split_on(f[3], " ||| ")) ex.source_context.push_back(split_tokens(s));
    for (const auto& s : split_on(f[4], " ||| ")) ex.target_context.push_back(split_tokens(s));
    if (ex.source_context.size() != ex.target_context.size())
      parse_fail(path, lineno, "source and target context sizes differ");
    ex.source = split_tokens(f[5]);
    ex.correct = split_tokens(f[6]);
    for (const auto& s : split_on(f[7], " || ")) ex.incorrect.push_back(split_tokens(s));
    ex.pronoun_index = parse_index(f[8], path, lineno, "pronoun index");
    auto parts = split_on(f[9], ":");
    if (parts.size() != 3) parse_fail(path, lineno, "bad antecedent reference '" + f[9] + "'");
    ex.distance = parse_index(parts[0], path, lineno, "distance");
    auto src = split_on(parts[1], "-");
    auto tgt = split_on(parts[2], "-");
    if (src.size() != 2 || tgt.size() != 2)
      parse_fail(path, lineno, "bad antecedent reference '" + f[9] + "'");
    ex.src_begin = parse_index(src[0], path, lineno, "span");
    ex.src_end = parse_index(src[1], path, lineno, "span");
    ex.tgt_begin = parse_index(tgt[0], path, lineno, "span");
    ex.tgt_end = parse_index(tgt[1], path, lineno, "span");
    if (ex.pronoun_index >= ex.correct.size())
      parse_fail(path, lineno, "pronoun index outside the correct target");
    if (ex.distance < 1 || ex.distance > ex.source_context.size())
      parse_fail(path, lineno, "antecedent distance outside the context");
    const std::size_t ante = ex.source_context.size() - ex.distance;
    if (ex.src_begin >= ex.src_end || ex.src_end > ex.source_context[ante].size() ||
        ex.tgt_begin >= ex.tgt_end || ex.tgt_end > ex.target_context[ante].size())
      parse_fail(path, lineno, "antecedent span outside its context sentence");
    out.push_back(std::move(ex));
  });
  return out;
}

void save_lexicon(const fs::path& path, const Lexicon& lex) {
  auto out = open_out(path);
  for (const auto& n : lex.nouns)
    out << "noun\t" << n.source << '\t' << n.target << '\t' << to_string(n.gender) << '\n';
  for (std::size_t g = 0; g < kGenderCount; ++g) {
    const auto gs = to_string(static_cast<Gender>(g));
    out << "article\t" << gs << '\t' << lex.articles[g] << '\n';
    out << "pronoun\t" << gs << '\t' << lex.pronouns[g] << '\n';
    for (const auto& c : lex.cue_adjectives[g]) out << "cue\t" << gs << '\t' << c << '\n';
  }
  out << "informal\t" << lex.informal_you << '\n';
  out << "formal\t" << lex.formal_you << '\n';
  for (const auto& v : lex.past_verb_forms) out << "past_verb\t" << v << '\n';
  out << "source_pronoun\t" << lex.source_pronoun << '\n';
  out << "source_article\t" << lex.source_article << '\n';
}

Lexicon load_lexicon(const fs::path& path) {
  Lexicon lex;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    auto f = split_tabs(line);
    auto need = [&](std::size_t n) {
      if (f.size() != n) parse_fail(path, lineno, "wrong field count for '" + f[0] + "'");
    };
    try {
      if (f[0] == "noun") {
        need(4);
        lex.nouns.push_back({f[1], f[2], parse_gender(f[3])});
      } else if (f[0] == "article") {
        need(3);
        lex.articles[static_cast<std::size_t>(parse_gender(f[1]))] = f[2];
      } else if (f[0] == "pronoun") {
        need(3);
        lex.pronouns[static_cast<std::size_t>(parse_gender(f[1]))] = f[2];
      } else if (f[0] == "cue") {
        need(3);
        lex.cue_adjectives[static_cast<std::size_t>(parse_gender(f[1]))].push_back(f[2]);
      } else if (f[0] == "informal") {
        need(2);
        lex.informal_you = f[1];
      } else if (f[0] == "formal") {
        need(2);
        lex.formal_you = f[1];
      } else if (f[0] == "past_verb") {
        need(2);
        lex.past_verb_forms.push_back(f[1]);
      } else if (f[0] == "source_pronoun") {
        need(2);
        lex.source_pronoun = f[1];
      } else if (f[0] == "source_article") {
        need(2);
        lex.source_article = f[1];
      } else {
        parse_fail(path, lineno, "unknown lexicon category '" + f[0] + "'");
      }
    } catch (const ParseError& e) {
      if (std::string(e.what()).rfind(path.string(), 0) == 0) throw;
      parse_fail(path, lineno, e.what());
    }
  });
  return lex;
}

void save_translations(const fs::path& path, const std::vector<TranslationRecord>& records) {
  auto out = open_out(path);
  for (const auto& r : records)
    out << r.doc_id << '\t' << r.sentence << '\t' << join_tokens(r.tokens) << '\n';
}

std::vector<TranslationRecord> load_translations(const fs::path& path) {
  std::vector<TranslationRecord> out;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    auto f = split_tabs(line);
    if (f.size() != 3) parse_fail(path, lineno, "expected 3 tab-separated fields");
    out.push_back({f[0], parse_index(f[1], path, lineno, "sentence index"), split_tokens(f[2])});
  });
  return out;
}

}  // namespace docmt::io

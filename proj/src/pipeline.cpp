#include "docmt/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "docmt/corpus_io.hpp"
#include "docmt/errors.hpp"
#include "docmt/rng.hpp"
#include "docmt/tagger.hpp"

namespace docmt {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream ss(text);
  T v{};
  if (!(ss >> v) || !ss.eof()) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("bad value for " + key + ": '" + text + "' (expected true or false)");
}

template <std::size_t N>
std::string join_numbers(const std::array<double, N>& a) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) out += (i ? "," : "") + num(a[i]);
  return out;
}

template <std::size_t N>
std::array<double, N> parse_numbers(const std::string& key, const std::string& text) {
  std::array<double, N> out{};
  std::stringstream ss(text);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i == N) throw ConfigError(key + " expects " + std::to_string(N) + " comma-separated values");
    out[i++] = parse_number<double>(key, item);
  }
  if (i != N) throw ConfigError(key + " expects " + std::to_string(N) + " comma-separated values");
  return out;
}

KeyValues with_prefix(const std::string& prefix, const KeyValues& kv) {
  KeyValues out;
  for (const auto& [k, v] : kv) out[prefix + k] = v;
  return out;
}

KeyValues strip_prefix(const std::string& prefix, const KeyValues& kv) {
  KeyValues out;
  for (const auto& [k, v] : kv)
    if (k.rfind(prefix, 0) == 0) out[k.substr(prefix.size())] = v;
  return out;
}

double cxmi_for(const Model& model, const ParallelCorpus& corpus, const Vocabulary& src_vocab,
                const Vocabulary& tgt_vocab, Layout layout, ContextMode mode, const PerturbationOptions& o,
                const std::map<std::string, TranslationCache>& caches) {
  if (mode == ContextMode::none || o.k == 0) return 0.0;
  BatchBuilder with = [&](const ParallelDocument& doc, std::size_t i) {
    const auto ctx = gather_context(doc, i, o.k, src_vocab, tgt_vocab, mode, TargetContextSource::generated,
                                    &caches.at(doc.id), o.seed);
    return assemble_batch(layout, ctx.source, src_vocab.encode(doc.sentences[i].source), ctx.target,
                          tgt_vocab.encode(doc.sentences[i].target));
  };
  BatchBuilder without = [&](const ParallelDocument& doc, std::size_t i) {
    return assemble_batch(layout, {}, src_vocab.encode(doc.sentences[i].source), {},
                          tgt_vocab.encode(doc.sentences[i].target));
  };
  return cxmi(model, corpus, with, without).mean_delta;
}

PerturbationRow perturbation_row(const std::string& name, const Model& model, const ParallelCorpus& corpus,
                                 const Vocabulary& src_vocab, const Vocabulary& tgt_vocab, Layout layout,
                                 const PerturbationOptions& o) {
  PerturbationRow row{name, {}, {}};
  const auto refs = reference_targets(corpus);
  std::map<std::string, TranslationCache> caches;
  for (ContextMode mode : {ContextMode::correct, ContextMode::random, ContextMode::none}) {
    TranslateOptions t;
    t.k = o.k;
    t.beam = o.beam;
    t.mode = mode;
    t.seed = o.seed;
    t.layout = layout;
    std::vector<Tokens> hyps;
    for (const auto& doc : corpus.documents) {
      auto tr = translate_document(model, doc, src_vocab, tgt_vocab, t);
      if (mode == ContextMode::correct) caches[doc.id] = tr.cache;
      for (auto& s : tr.sentences) hyps.push_back(std::move(s));
    }
    row.bleu[mode] = bleu(hyps, refs).score;
  }
  for (ContextMode mode : {ContextMode::correct, ContextMode::random, ContextMode::none})
    row.cxmi[mode] = cxmi_for(model, corpus, src_vocab, tgt_vocab, layout, mode, o, caches);
  return row;
}

constexpr ContextMode kModes[] = {ContextMode::correct, ContextMode::random, ContextMode::none};

}  // namespace

KeyValues gen_config_to_kv(const GenConfig& c) {
  return {{"n_docs", std::to_string(c.n_docs)},
          {"sents_per_doc", std::to_string(c.sents_per_doc)},
          {"pronoun_rate", num(c.pronoun_rate)},
          {"pronoun_cue_rate", num(c.pronoun_cue_rate)},
          {"distance_weights", join_numbers(c.distance_weights)},
          {"gender_weights", join_numbers(c.gender_weights)},
          {"max_entities_per_doc", std::to_string(c.max_entities_per_doc)},
          {"context_window", std::to_string(c.context_window)},
          {"cohesion", c.cohesion ? "true" : "false"},
          {"formality", c.formality ? "true" : "false"},
          {"verb_form", c.verb_form ? "true" : "false"}};
}

GenConfig gen_config_from_kv(const KeyValues& kv, const GenConfig& base) {
  GenConfig c = base;
  for (const auto& [k, v] : kv) {
    if (k == "n_docs") c.n_docs = parse_number<std::size_t>(k, v);
    else if (k == "sents_per_doc") c.sents_per_doc = parse_number<std::size_t>(k, v);
    else if (k == "pronoun_rate") c.pronoun_rate = parse_number<double>(k, v);
    else if (k == "pronoun_cue_rate") c.pronoun_cue_rate = parse_number<double>(k, v);
    else if (k == "distance_weights") c.distance_weights = parse_numbers<6>(k, v);
    else if (k == "gender_weights") c.gender_weights = parse_numbers<kGenderCount>(k, v);
    else if (k == "max_entities_per_doc") c.max_entities_per_doc = parse_number<std::size_t>(k, v);
    else if (k == "context_window") c.context_window = parse_number<std::size_t>(k, v);
    else if (k == "cohesion") c.cohesion = parse_bool(k, v);
    else if (k == "formality") c.formality = parse_bool(k, v);
    else if (k == "verb_form") c.verb_form = parse_bool(k, v);
    else throw ConfigError("unknown generator key '" + k + "'");
  }
  return c;
}

DataConfig DataConfig::defaults() {
  DataConfig d;
  d.sparse.n_docs = 300;
  d.sparse.pronoun_rate = 0.15;
  d.sparse.pronoun_cue_rate = 0.99;
  d.contrastive.n_docs = 150;
  d.contrastive.pronoun_rate = 0.8;
  d.contrastive.pronoun_cue_rate = 0.0;
  return d;
}

void DataConfig::validate() const {
  if (n_train == 0 || n_valid == 0) throw ConfigError("split sizes must be positive");
  if (n_train + n_valid >= corpus.n_docs)
    throw ConfigError("split.train + split.valid (" + std::to_string(n_train + n_valid) +
                      ") leaves no test documents out of " + std::to_string(corpus.n_docs));
  if (max_context == 0) throw ConfigError("max_context must be positive");
}

KeyValues DataConfig::to_kv() const {
  KeyValues kv = with_prefix("corpus.", gen_config_to_kv(corpus));
  kv.merge(with_prefix("sparse.", gen_config_to_kv(sparse)));
  kv.merge(with_prefix("contrastive.", gen_config_to_kv(contrastive)));
  kv["split.train"] = std::to_string(n_train);
  kv["split.valid"] = std::to_string(n_valid);
  kv["max_context"] = std::to_string(max_context);
  return kv;
}

DataConfig DataConfig::from_kv(const KeyValues& kv) {
  DataConfig d = defaults();
  for (const auto& [k, v] : kv) {
    const bool known = k.rfind("corpus.", 0) == 0 || k.rfind("sparse.", 0) == 0 ||
                       k.rfind("contrastive.", 0) == 0 || k == "split.train" || k == "split.valid" ||
                       k == "max_context";
    if (!known) throw ConfigError("unknown data config key '" + k + "'");
  }
  d.corpus = gen_config_from_kv(strip_prefix("corpus.", kv), d.corpus);
  d.sparse = gen_config_from_kv(strip_prefix("sparse.", kv), d.sparse);
  d.contrastive = gen_config_from_kv(strip_prefix("contrastive.", kv), d.contrastive);
  if (auto it = kv.find("split.train"); it != kv.end()) d.n_train = parse_number<std::size_t>(it->first, it->second);
  if (auto it = kv.find("split.valid"); it != kv.end()) d.n_valid = parse_number<std::size_t>(it->first, it->second);
  if (auto it = kv.find("max_context"); it != kv.end())
    d.max_context = parse_number<std::size_t>(it->first, it->second);
  return d;
}

Dataset generate_dataset(const DataConfig& config, std::uint64_t seed) {
  config.validate();
  const Rng root(seed);
  Dataset d;
  auto split = split_documents(generate_corpus(config.corpus, root.split("corpus").next_u64()), config.n_train,
                               config.n_valid);
  d.train = std::move(split.train);
  d.valid = std::move(split.valid);
  d.test = std::move(split.test);
  d.sparse = generate_corpus(config.sparse, root.split("sparse").next_u64());
  auto set = make_contrastive_set(generate_corpus(config.contrastive, root.split("contrastive").next_u64()),
                                  root.split("contrastive-sample").next_u64(), config.max_context);
  if (set.examples.empty()) throw ValidationError("contrastive set is empty: " + set.warning);
  d.contrastive = std::move(set.examples);
  d.contrastive_corpus = contrastive_to_corpus(d.contrastive);
  d.lexicon = Lexicon::standard();
  return d;
}

std::vector<std::string> dataset_file_names() {
  std::vector<std::string> out;
  for (const char* name : {"train", "valid", "test", "sparse", "contrastive_corpus"}) {
    out.push_back(std::string(name) + ".tsv");
    out.push_back(std::string(name) + ".ann.tsv");
  }
  out.push_back("contrastive.tsv");
  out.push_back("lexicon.tsv");
  return out;
}

std::vector<fs::path> save_dataset(const fs::path& dir, const Dataset& data) {
  fs::create_directories(dir);
  std::vector<fs::path> out;
  auto corpus = [&](const std::string& name, const ParallelCorpus& c) {
    io::save_documents(dir / (name + ".tsv"), c);
    io::save_annotations(dir / (name + ".ann.tsv"), c);
    out.push_back(dir / (name + ".tsv"));
    out.push_back(dir / (name + ".ann.tsv"));
  };
  corpus("train", data.train);
  corpus("valid", data.valid);
  corpus("test", data.test);
  corpus("sparse", data.sparse);
  corpus("contrastive_corpus", data.contrastive_corpus);
  io::save_contrastive(dir / "contrastive.tsv", data.contrastive);
  out.push_back(dir / "contrastive.tsv");
  io::save_lexicon(dir / "lexicon.tsv", data.lexicon);
  out.push_back(dir / "lexicon.tsv");
  return out;
}

ParallelCorpus load_annotated(const fs::path& dir, const std::string& name) {
  return io::load_annotations(dir / (name + ".ann.tsv"), io::load_documents(dir / (name + ".tsv")));
}

Dataset load_dataset(const fs::path& dir) {
  Dataset d;
  d.train = load_annotated(dir, "train");
  d.valid = load_annotated(dir, "valid");
  d.test = load_annotated(dir, "test");
  d.sparse = load_annotated(dir, "sparse");
  d.contrastive_corpus = load_annotated(dir, "contrastive_corpus");
  d.contrastive = io::load_contrastive(dir / "contrastive.tsv");
  d.lexicon = io::load_lexicon(dir / "lexicon.tsv");
  return d;
}

std::vector<PerturbationRow> perturbation_table(const Model& model, const ParallelCorpus& corpus,
                                                const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                                const PerturbationOptions& options) {
  const Architecture arch = model.config().arch;
  std::vector<PerturbationRow> rows;
  rows.push_back(
      perturbation_row(to_string(arch), model, corpus, src_vocab, tgt_vocab, layout_of(arch), options));
  if (arch == Architecture::sentence)
    rows.push_back(perturbation_row("sentence*", model, corpus, src_vocab, tgt_vocab, Layout::concat, options));
  return rows;
}

std::string perturbation_tsv(const std::vector<PerturbationRow>& rows) {
  std::string out = "configuration";
  for (const char* metric : {"bleu", "cxmi"})
    for (ContextMode m : kModes) out += std::string("\t") + metric + "." + to_string(m);
  out += '\n';
  for (const auto& r : rows) {
    out += r.configuration;
    for (ContextMode m : kModes) out += '\t' + format_fixed(r.bleu.at(m));
    for (ContextMode m : kModes) out += '\t' + format_fixed(r.cxmi.at(m));
    out += '\n';
  }
  return out;
}

std::vector<std::vector<Tokens>> translate_documents(const Model& model, const ParallelCorpus& corpus,
                                                     const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                                     const TranslateOptions& options) {
  std::vector<std::vector<Tokens>> out;
  for (const auto& doc : corpus.documents)
    out.push_back(translate_document(model, doc, src_vocab, tgt_vocab, options).sentences);
  return out;
}

std::vector<Tokens> flatten(const std::vector<std::vector<Tokens>>& documents) {
  std::vector<Tokens> out;
  for (const auto& d : documents) out.insert(out.end(), d.begin(), d.end());
  return out;
}

std::vector<Tokens> reference_targets(const ParallelCorpus& corpus) {
  std::vector<Tokens> out;
  for (const auto& d : corpus.documents)
    for (const auto& s : d.sentences) out.push_back(s.target);
  return out;
}

MetricReport evaluate(const Model& model, const Dataset& data, const Vocabulary& src_vocab,
                      const Vocabulary& tgt_vocab, const EvaluationOptions& options) {
  TranslateOptions t;
  t.k = options.k;
  t.beam = options.beam;
  t.mode = options.mode;
  t.seed = options.seed;
  t.layout = options.layout;
  MetricReport r;
  const std::pair<const char*, const ParallelCorpus*> sets[] = {
      {"test", &data.test}, {"contrastive_corpus", &data.contrastive_corpus}, {"sparse", &data.sparse}};
  for (const auto& [name, corpus] : sets) {
    const auto hyps = translate_documents(model, *corpus, src_vocab, tgt_vocab, t);
    r.add("bleu", name, bleu(flatten(hyps), reference_targets(*corpus)).score);
    for (const auto& [kind, f] : phenomena_f1(*corpus, hyps, data.lexicon))
      r.add("f1." + std::string(to_string(kind)), name, 100.0 * f.f1);
  }
  if (!options.layout || *options.layout == layout_of(model.config().arch))
    r.add("perplexity", "test", perplexity(model, data.test, src_vocab, tgt_vocab, options.k));
  r.add("contrastive.accuracy", "k=" + std::to_string(options.k),
        100.0 * contrastive_accuracy(model, data.contrastive, options.k, src_vocab, tgt_vocab, options.layout)
                    .accuracy);
  return r;
}

std::vector<ExampleAttribution> attribute_examples(const Model& model,
                                                   const std::vector<ContrastiveExample>& examples,
                                                   std::size_t k, const Vocabulary& src_vocab,
                                                   const Vocabulary& tgt_vocab, std::optional<Layout> layout) {
  std::vector<ExampleAttribution> out;
  for (const auto& ex : examples) {
    if (ex.distance > k) continue;
    out.push_back(attribute_example(model, ex, k, src_vocab, tgt_vocab, layout));
  }
  return out;
}

std::string attribution_summary_tsv(const AttributionSummary& s) {
  auto line = [](const std::string& scope, const SupportShare& x) {
    return scope + '\t' + format_fixed(x.antecedent_pct) + '\t' + format_fixed(x.context_pct) + '\t' +
           format_fixed(x.current_pct) + '\n';
  };
  std::string out = "scope\tantecedent_pct\tcontext_pct\tcurrent_pct\n";
  out += line("all", s.mean);
  out += line("class_mean", s.class_mean);
  for (const auto& [pronoun, x] : s.per_class) out += line("pronoun:" + pronoun, x);
  return out;
}

std::vector<ParetoPoint> pareto(std::vector<ParetoPoint> points) {
  for (auto& p : points) {
    p.dominated = false;
    for (const auto& q : points) {
      const bool geq = q.f1 >= p.f1 && q.antecedent_pct >= p.antecedent_pct;
      const bool gt = q.f1 > p.f1 || q.antecedent_pct > p.antecedent_pct;
      if (geq && gt) p.dominated = true;
    }
  }
  return points;
}

std::string pareto_tsv(const std::vector<ParetoPoint>& points) {
  std::string out = "model\tf1_pronoun\tantecedent_pct\tdominated\n";
  for (const auto& p : points)
    out += p.model + '\t' + format_fixed(p.f1) + '\t' + format_fixed(p.antecedent_pct) + '\t' +
           (p.dominated ? "1" : "0") + '\n';
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string file_sha256(const fs::path& path) { return sha256_hex(io::read_file(path)); }

std::string Manifest::render() const {
  std::string out = "command=" + command + '\n';
  for (std::size_t i = 0; i < args.size(); ++i) out += "arg." + std::to_string(i) + '=' + args[i] + '\n';
  out += "seed=" + std::to_string(seed) + '\n';
  std::string cfg;
  for (const auto& [k, v] : config) cfg += k + '=' + v + '\n';
  for (const auto& [k, v] : config) out += "config." + k + '=' + v + '\n';
  out += "config_sha256=" + sha256_hex(cfg) + '\n';
  for (const auto& p : inputs) out += "input." + p.generic_string() + '=' + file_sha256(p) + '\n';
  for (const auto& p : outputs) out += "output." + p.generic_string() + '=' + file_sha256(p) + '\n';
  return out;
}

void Manifest::write(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << render();
}

ManifestRecord read_manifest(const fs::path& path) {
  ManifestRecord m;
  std::map<std::size_t, std::string> args;
  for (const auto& [k, v] : read_key_values(path)) {
    if (k == "command") m.command = v;
    else if (k == "seed") m.seed = parse_number<std::uint64_t>(k, v);
    else if (k.rfind("arg.", 0) == 0) args[parse_number<std::size_t>(k, k.substr(4))] = v;
    else if (k.rfind("config.", 0) == 0) m.config[k.substr(7)] = v;
    else if (k.rfind("input.", 0) == 0) m.inputs[k.substr(6)] = v;
    else if (k.rfind("output.", 0) == 0) m.outputs[k.substr(7)] = v;
  }
  if (m.command.empty()) throw ParseError(path.string() + ": manifest has no command");
  for (auto& [i, a] : args) m.args.push_back(std::move(a));
  return m;
}

}  // namespace docmt

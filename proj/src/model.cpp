#include "docmt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "docmt/errors.hpp"
#include "docmt/ops.hpp"

namespace docmt {

namespace {

constexpr double kMasked = -1e9;

std::size_t to_size(const std::map<std::string, std::string>& kv, const std::string& key, std::size_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    unsigned long long v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("model config: " + key + " is not a non-negative integer: '" + it->second + "'");
  }
}

double to_double(const std::map<std::string, std::string>& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("model config: " + key + " is not a number: '" + it->second + "'");
  }
}

bool to_bool(const std::map<std::string, std::string>& kv, const std::string& key, bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("model config: " + key + " is not a boolean: '" + it->second + "'");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t unpadded(const TokenIds& ids) {
  std::size_t n = ids.size();
  while (n > 0 && ids[n - 1] == Vocabulary::kPad) --n;
  return n;
}

std::vector<bool> pad_mask(const TokenIds& ids) {
  std::vector<bool> mask(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) mask[i] = ids[i] == Vocabulary::kPad;
  return mask;
}

TokenIds join_with_sep(const std::vector<TokenIds>& parts) {
  TokenIds out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out.push_back(Vocabulary::kSep);
    out.insert(out.end(), parts[i].begin(), parts[i].end());
  }
  return out;
}

void push_segment(std::vector<SegmentRange>& segs, Segment kind, std::size_t begin, std::size_t end) {
  if (end > begin) segs.push_back({kind, begin, end});
}

}  // namespace

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::sentence: return "sentence";
    case Architecture::concat_2to2: return "concat_2to2";
    case Architecture::multi_encoder: return "multi_encoder";
  }
  return "?";
}

Architecture parse_architecture(std::string_view name) {
  if (name == "sentence") return Architecture::sentence;
  if (name == "concat" || name == "concat_2to2") return Architecture::concat_2to2;
  if (name == "multi" || name == "multi_encoder") return Architecture::multi_encoder;
  throw ConfigError("unknown architecture '" + std::string(name) + "' (expected sentence, concat or multi)");
}

std::string to_string(Segment s) {
  switch (s) {
    case Segment::source_context: return "source_context";
    case Segment::source: return "source";
    case Segment::target_context: return "target_context";
    case Segment::target_prefix: return "target_prefix";
    case Segment::pad: return "pad";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (n_layers == 0) throw ConfigError("model config: n_layers must be positive");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
    throw ConfigError("model config: d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                      std::to_string(n_heads));
  if (d_ffn == 0) throw ConfigError("model config: d_ffn must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model config: dropout must lie in [0, 1)");
  if (src_vocab <= static_cast<std::size_t>(Vocabulary::kReserved) ||
      tgt_vocab <= static_cast<std::size_t>(Vocabulary::kReserved))
    throw ConfigError("model config: vocabularies must contain tokens beyond the reserved ones");
  if (max_positions == 0) throw ConfigError("model config: max_positions must be positive");
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
  return {
      {"arch", to_string(arch)},
      {"n_layers", std::to_string(n_layers)},
      {"d_model", std::to_string(d_model)},
      {"n_heads", std::to_string(n_heads)},
      {"d_ffn", std::to_string(d_ffn)},
      {"dropout", format_double(dropout)},
      {"src_vocab", std::to_string(src_vocab)},
      {"tgt_vocab", std::to_string(tgt_vocab)},
      {"max_positions", std::to_string(max_positions)},
      {"max_context", std::to_string(max_context)},
      {"pre_norm", pre_norm ? "true" : "false"},
      {"share_context_embeddings", share_context_embeddings ? "true" : "false"},
  };
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  if (auto it = kv.find("arch"); it != kv.end()) c.arch = parse_architecture(it->second);
  c.n_layers = to_size(kv, "n_layers", c.n_layers);
  c.d_model = to_size(kv, "d_model", c.d_model);
  c.n_heads = to_size(kv, "n_heads", c.n_heads);
  c.d_ffn = to_size(kv, "d_ffn", c.d_ffn);
  c.dropout = to_double(kv, "dropout", c.dropout);
  c.src_vocab = to_size(kv, "src_vocab", c.src_vocab);
  c.tgt_vocab = to_size(kv, "tgt_vocab", c.tgt_vocab);
  c.max_positions = to_size(kv, "max_positions", c.max_positions);
  c.max_context = to_size(kv, "max_context", c.max_context);
  c.pre_norm = to_bool(kv, "pre_norm", c.pre_norm);
  c.share_context_embeddings = to_bool(kv, "share_context_embeddings", c.share_context_embeddings);
  return c;
}

std::size_t SequenceBatch::source_length() const { return unpadded(source); }
std::size_t SequenceBatch::target_length() const { return unpadded(target_in); }

Layout layout_of(Architecture arch) {
  switch (arch) {
    case Architecture::sentence: return Layout::sentence;
    case Architecture::concat_2to2: return Layout::concat;
    case Architecture::multi_encoder: return Layout::multi;
  }
  return Layout::sentence;
}

SequenceBatch assemble_batch(Layout layout, const std::vector<TokenIds>& source_context, const TokenIds& source,
                             const std::vector<TokenIds>& target_context, const TokenIds& target) {
  SequenceBatch b;
  TokenIds tgt;
  switch (layout) {
    case Layout::sentence:
      b.source = source;
      tgt = target;
      break;
    case Layout::concat: {
      if (source_context.size() != target_context.size())
        throw ContextError("concat layout needs as many target context sentences as source ones (" +
                           std::to_string(target_context.size()) + " vs " + std::to_string(source_context.size()) +
                           ")");
      b.k = source_context.size();
      b.source = join_with_sep(source_context);
      if (b.k > 0) b.source.push_back(Vocabulary::kSep);
      b.source_context_len = b.source.size();
      b.source.insert(b.source.end(), source.begin(), source.end());
      tgt = join_with_sep(target_context);
      if (b.k > 0) tgt.push_back(Vocabulary::kSep);
      b.target_context_len = tgt.size();
      b.score_begin = tgt.size();
      tgt.insert(tgt.end(), target.begin(), target.end());
      break;
    }
    case Layout::multi:
      b.multi = true;
      b.k = std::max(source_context.size(), target_context.size());
      b.source = source;
      b.source_context = join_with_sep(source_context);
      b.target_context = join_with_sep(target_context);
      tgt = target;
      break;
  }
  b.target_in.reserve(tgt.size() + 1);
  b.target_in.push_back(Vocabulary::kBos);
  b.target_in.insert(b.target_in.end(), tgt.begin(), tgt.end());
  b.target_out = tgt;
  b.target_out.push_back(Vocabulary::kEos);
  return b;
}

SequenceBatch build_batch(Layout layout, const ParallelDocument& doc, std::size_t i, std::size_t k,
                          const Vocabulary& src_vocab, const Vocabulary& tgt_vocab, TargetContextSource target_source,
                          const TranslationCache* cache) {
  if (i >= doc.sentences.size())
    throw ContextError("sentence " + std::to_string(i) + " outside document " + doc.id + " with " +
                       std::to_string(doc.sentences.size()) + " sentences");
  if (layout == Layout::sentence) k = 0;
  const std::size_t first = i >= k ? i - k : 0;
  std::vector<TokenIds> src_ctx, tgt_ctx;
  for (std::size_t j = first; j < i; ++j) {
    src_ctx.push_back(src_vocab.encode(doc.sentences[j].source));
    if (target_source == TargetContextSource::gold) {
      tgt_ctx.push_back(tgt_vocab.encode(doc.sentences[j].target));
    } else {
      const Tokens* generated = nullptr;
      if (cache) {
        auto it = cache->find(j);
        if (it != cache->end()) generated = &it->second;
      }
      if (!generated)
        throw ContextError("no generated translation for context sentence " + std::to_string(j) + " of " + doc.id);
      tgt_ctx.push_back(tgt_vocab.encode(*generated));
    }
  }
  return assemble_batch(layout, src_ctx, src_vocab.encode(doc.sentences[i].source), tgt_ctx,
                        tgt_vocab.encode(doc.sentences[i].target));
}

void pad_batch(SequenceBatch& batch, std::size_t source_len, std::size_t target_len) {
  if (batch.source.size() < source_len) batch.source.resize(source_len, Vocabulary::kPad);
  if (batch.target_in.size() < target_len) {
    batch.target_in.resize(target_len, Vocabulary::kPad);
    batch.target_out.resize(target_len, Vocabulary::kPad);
  }
}

Tensor positional_encoding(std::size_t n, std::size_t d_model) {
  std::vector<double> pe(n * d_model);
  for (std::size_t pos = 0; pos < n; ++pos)
    for (std::size_t i = 0; i < d_model; i += 2) {
      const double angle = static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / d_model);
      pe[pos * d_model + i] = std::sin(angle);
      if (i + 1 < d_model) pe[pos * d_model + i + 1] = std::cos(angle);
    }
  return Tensor::from({n, d_model}, std::move(pe));
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const std::size_t d = config_.d_model;
  const std::size_t f = config_.d_ffn;
  const Rng root = Rng(seed).split("init");

  auto add = [&](const std::string& name, Shape shape, auto init) {
    Rng rng = root.split(name);
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = init(rng);
    index_[name] = params_.size();
    params_.push_back({name, Tensor::from(std::move(shape), std::move(data), true)});
  };
  auto zeros = [](Rng&) { return 0.0; };
  auto ones = [](Rng&) { return 1.0; };
  auto linear = [&](const std::string& name, std::size_t in, std::size_t out) {
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    add(name + ".w", {in, out}, [a](Rng& r) { return (2.0 * r.uniform() - 1.0) * a; });
    add(name + ".b", {out}, zeros);
  };
  auto layer_norm = [&](const std::string& name) {
    add(name + ".g", {d}, ones);
    add(name + ".b", {d}, zeros);
  };
  auto attention = [&](const std::string& name) {
    for (const char* p : {".q", ".k", ".v", ".o"}) linear(name + p, d, d);
  };
  auto embedding = [&](const std::string& name, std::size_t vocab) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(d));
    add(name, {vocab, d}, [sd](Rng& r) { return r.normal() * sd; });
  };
  auto encoder = [&](const std::string& name) {
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
      const std::string p = name + "." + std::to_string(l);
      attention(p + ".self");
      layer_norm(p + ".ln1");
      linear(p + ".ffn1", d, f);
      linear(p + ".ffn2", f, d);
      layer_norm(p + ".ln2");
    }
    if (config_.pre_norm) layer_norm(name + ".ln");
  };

  embedding("src.embed", config_.src_vocab);
  embedding("tgt.embed", config_.tgt_vocab);
  encoder("enc");
  if (config_.arch == Architecture::multi_encoder) {
    if (!config_.share_context_embeddings) {
      embedding("ctx_src.embed", config_.src_vocab);
      embedding("ctx_tgt.embed", config_.tgt_vocab);
    }
    encoder("enc_sc");
    encoder("enc_tc");
  }
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string p = "dec." + std::to_string(l);
    attention(p + ".self");
    layer_norm(p + ".ln1");
    attention(p + ".cross");
    layer_norm(p + ".ln2");
    linear(p + ".ffn1", d, f);
    linear(p + ".ffn2", f, d);
    layer_norm(p + ".ln3");
  }
  if (config_.pre_norm) layer_norm("dec.ln");
  linear("out", d, config_.tgt_vocab);
}

const Tensor& Model::parameter(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw CheckpointError("no parameter named '" + std::string(name) + "'");
  return params_[it->second].value;
}

void Model::check_length(std::size_t n) const {
  if (n > config_.max_positions)
    throw LengthError("sequence of length " + std::to_string(n) + " exceeds max_positions " +
                      std::to_string(config_.max_positions));
}

Tensor Model::embed(const std::string& table, const TokenIds& ids, Rng* rng) const {
  check_length(ids.size());
  Tensor x = ops::scale(ops::embedding(parameter(table), ids), std::sqrt(static_cast<double>(config_.d_model)));
  x = ops::add(x, positional_encoding(ids.size(), config_.d_model));
  if (rng) x = ops::dropout(x, config_.dropout, *rng);
  return x;
}

Tensor Model::norm(const std::string& prefix, const Tensor& x) const {
  return ops::layer_norm(x, parameter(prefix + ".g"), parameter(prefix + ".b"));
}

Tensor Model::ffn(const std::string& prefix, const Tensor& x) const {
  Tensor h = ops::relu(ops::add(ops::matmul(x, parameter(prefix + ".ffn1.w")), parameter(prefix + ".ffn1.b")));
  return ops::add(ops::matmul(h, parameter(prefix + ".ffn2.w")), parameter(prefix + ".ffn2.b"));
}

Tensor Model::attention(const std::string& prefix, const Tensor& query_in, const Tensor& key_in,
                        const std::vector<bool>& key_pad, bool causal, AttentionTrace* trace) const {
  const std::size_t d = config_.d_model;
  const std::size_t heads = config_.n_heads;
  const std::size_t dh = d / heads;
  const std::size_t tq = query_in.rows();
  const std::size_t tk = key_in.rows();
  auto project = [&](const Tensor& x, const char* which) {
    return ops::add(ops::matmul(x, parameter(prefix + which + std::string(".w"))),
                    parameter(prefix + which + std::string(".b")));
  };
  const Tensor q = project(query_in, ".q");
  const Tensor k = project(key_in, ".k");
  const Tensor v = project(key_in, ".v");

  bool any_mask = false;
  std::vector<double> mask(tq * tk, 0.0);
  for (std::size_t i = 0; i < tq; ++i)
    for (std::size_t j = 0; j < tk; ++j)
      if (key_pad[j] || (causal && j > i)) {
        mask[i * tk + j] = kMasked;
        any_mask = true;
      }
  const Tensor mask_t = any_mask ? Tensor::from({tq, tk}, std::move(mask)) : Tensor();

  const Tensor& wo = parameter(prefix + ".o.w");
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  if (trace) {
    trace->weights.clear();
    trace->value_norms.clear();
  }
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = ops::slice_cols(q, h * dh, (h + 1) * dh);
    const Tensor kh = ops::slice_cols(k, h * dh, (h + 1) * dh);
    const Tensor vh = ops::slice_cols(v, h * dh, (h + 1) * dh);
    Tensor scores = ops::scale(ops::matmul_nt(qh, kh), inv);
    if (any_mask) scores = ops::add(scores, mask_t);
    const Tensor p = ops::softmax(scores, 1);
    outs.push_back(ops::matmul(p, vh));
    if (trace) {
      Matrix w(tq, tk);
      std::copy(p.data().begin(), p.data().end(), w.data.begin());
      trace->weights.push_back(std::move(w));
      // Norm of each key's value vector after the head's slice of the output projection.
      std::vector<double> norms(tk, 0.0);
      const auto vd = vh.data();
      const auto od = wo.data();
      std::vector<double> row(d);
      for (std::size_t j = 0; j < tk; ++j) {
        std::fill(row.begin(), row.end(), 0.0);
        for (std::size_t a = 0; a < dh; ++a) {
          const double x = vd[j * dh + a];
          const double* w_row = &od[(h * dh + a) * d];
          for (std::size_t c = 0; c < d; ++c) row[c] += x * w_row[c];
        }
        double s = 0.0;
        for (double r : row) s += r * r;
        norms[j] = std::sqrt(s);
      }
      trace->value_norms.push_back(std::move(norms));
    }
  }
  return ops::add(ops::matmul(ops::concat_cols(outs), wo), parameter(prefix + ".o.b"));
}

namespace {

std::vector<double> row_norms(const Tensor& x) {
  std::vector<double> out(x.rows());
  const auto d = x.data();
  const std::size_t c = x.cols();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += d[i * c + j] * d[i * c + j];
    out[i] = std::sqrt(s);
  }
  return out;
}

}  // namespace

Tensor Model::encoder_stack(const std::string& prefix, const std::string& table, const TokenIds& ids,
                            std::vector<AttentionTrace>* trace, Rng* rng) const {
  const std::vector<bool> pad = pad_mask(ids);
  Tensor x = embed(table, ids, rng);
  auto drop = [&](const Tensor& t) { return rng ? ops::dropout(t, config_.dropout, *rng) : t; };
  if (trace) trace->assign(config_.n_layers, {});
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string p = prefix + "." + std::to_string(l);
    AttentionTrace* at = trace ? &(*trace)[l] : nullptr;
    if (at) at->residual_norms = row_norms(x);
    if (config_.pre_norm) {
      const Tensor h = norm(p + ".ln1", x);
      x = ops::add(x, drop(attention(p + ".self", h, h, pad, false, at)));
      x = ops::add(x, drop(ffn(p, norm(p + ".ln2", x))));
    } else {
      x = norm(p + ".ln1", ops::add(x, drop(attention(p + ".self", x, x, pad, false, at))));
      x = norm(p + ".ln2", ops::add(x, drop(ffn(p, x))));
    }
  }
  if (config_.pre_norm) x = norm(prefix + ".ln", x);
  return x;
}

EncoderMemory Model::encode(const SequenceBatch& batch, ForwardTrace* trace, Rng* dropout_rng) const {
  const bool multi = config_.arch == Architecture::multi_encoder;
  if (batch.multi != multi)
    throw ArchitectureError(multi ? "multi_encoder model needs a batch with separate context sequences"
                                  : to_string(config_.arch) + " model cannot take separate context sequences");
  if (multi) return encode_multi(batch.source_context, batch.source, batch.target_context, trace, dropout_rng);
  if (batch.source.empty()) throw ArchitectureError("empty source sequence");
  EncoderMemory m;
  std::vector<AttentionTrace>* layers = nullptr;
  if (trace) {
    trace->encoders.assign(1, {});
    layers = &trace->encoders[0];
  }
  m.states = encoder_stack("enc", "src.embed", batch.source, layers, dropout_rng);
  m.key_pad = pad_mask(batch.source);
  m.block_sizes = {batch.source.size()};
  if (trace) {
    trace->block_sizes = m.block_sizes;
    trace->encoder_positions = batch.source.size();
  }
  return m;
}

EncoderMemory Model::encode_multi(const TokenIds& source_context, const TokenIds& source,
                                  const TokenIds& target_context, ForwardTrace* trace, Rng* dropout_rng) const {
  if (config_.arch != Architecture::multi_encoder)
    throw ArchitectureError(to_string(config_.arch) + " model has no context encoders");
  if (source.empty()) throw ArchitectureError("empty source sequence");
  const bool shared = config_.share_context_embeddings;
  struct Block {
    const char* prefix;
    const char* table;
    const TokenIds* ids;
  };
  const Block blocks[3] = {{"enc_sc", shared ? "src.embed" : "ctx_src.embed", &source_context},
                           {"enc", "src.embed", &source},
                           {"enc_tc", shared ? "tgt.embed" : "ctx_tgt.embed", &target_context}};
  EncoderMemory m;
  std::vector<Tensor> parts;
  if (trace) trace->encoders.assign(3, {});
  for (std::size_t b = 0; b < 3; ++b) {
    const TokenIds& ids = *blocks[b].ids;
    m.block_sizes.push_back(ids.size());
    if (ids.empty()) continue;
    parts.push_back(encoder_stack(blocks[b].prefix, blocks[b].table, ids, trace ? &trace->encoders[b] : nullptr,
                                  dropout_rng));
    const auto pad = pad_mask(ids);
    m.key_pad.insert(m.key_pad.end(), pad.begin(), pad.end());
  }
  m.states = parts.size() == 1 ? parts[0] : ops::concat_rows(parts);
  if (trace) {
    trace->block_sizes = m.block_sizes;
    trace->encoder_positions = m.key_pad.size();
  }
  return m;
}

Tensor Model::decode(const EncoderMemory& memory, const TokenIds& target_in, ForwardTrace* trace,
                     Rng* dropout_rng) const {
  if (target_in.empty()) throw ArchitectureError("empty decoder input");
  const std::vector<bool> pad = pad_mask(target_in);
  Tensor x = embed("tgt.embed", target_in, dropout_rng);
  auto drop = [&](const Tensor& t) { return dropout_rng ? ops::dropout(t, config_.dropout, *dropout_rng) : t; };
  if (trace) {
    trace->decoder.assign(config_.n_layers, {});
    trace->decoder_positions = target_in.size();
  }
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string p = "dec." + std::to_string(l);
    AttentionTrace* self_t = trace ? &trace->decoder[l].self : nullptr;
    AttentionTrace* cross_t = trace ? &trace->decoder[l].cross : nullptr;
    if (self_t) self_t->residual_norms = row_norms(x);
    if (config_.pre_norm) {
      const Tensor h = norm(p + ".ln1", x);
      x = ops::add(x, drop(attention(p + ".self", h, h, pad, true, self_t)));
      if (cross_t) cross_t->residual_norms = row_norms(x);
      x = ops::add(x, drop(attention(p + ".cross", norm(p + ".ln2", x), memory.states, memory.key_pad, false, cross_t)));
      x = ops::add(x, drop(ffn(p, norm(p + ".ln3", x))));
    } else {
      x = norm(p + ".ln1", ops::add(x, drop(attention(p + ".self", x, x, pad, true, self_t))));
      if (cross_t) cross_t->residual_norms = row_norms(x);
      x = norm(p + ".ln2", ops::add(x, drop(attention(p + ".cross", x, memory.states, memory.key_pad, false, cross_t))));
      x = norm(p + ".ln3", ops::add(x, drop(ffn(p, x))));
    }
  }
  if (config_.pre_norm) x = norm("dec.ln", x);
  return ops::add(ops::matmul(x, parameter("out.w")), parameter("out.b"));
}

Tensor Model::forward(const SequenceBatch& batch, ForwardTrace* trace, Rng* dropout_rng) const {
  if (batch.target_in.size() != batch.target_out.size())
    throw ArchitectureError("decoder input and output lengths differ");
  const EncoderMemory memory = encode(batch, trace, dropout_rng);
  Tensor logits = decode(memory, batch.target_in, trace, dropout_rng);
  if (trace) {
    auto& segs = trace->segments;
    segs.clear();
    std::size_t pos = 0;
    if (batch.multi) {
      const TokenIds* blocks[3] = {&batch.source_context, &batch.source, &batch.target_context};
      const Segment kinds[3] = {Segment::source_context, Segment::source, Segment::target_context};
      for (std::size_t b = 0; b < 3; ++b) {
        const std::size_t real = unpadded(*blocks[b]);
        push_segment(segs, kinds[b], pos, pos + real);
        push_segment(segs, Segment::pad, pos + real, pos + blocks[b]->size());
        pos += blocks[b]->size();
      }
    } else {
      const std::size_t real = batch.source_length();
      push_segment(segs, Segment::source_context, 0, batch.source_context_len);
      push_segment(segs, Segment::source, batch.source_context_len, real);
      push_segment(segs, Segment::pad, real, batch.source.size());
      pos = batch.source.size();
    }
    const std::size_t real = batch.target_length();
    push_segment(segs, Segment::target_prefix, pos, pos + 1);
    push_segment(segs, Segment::target_context, pos + 1, pos + 1 + batch.target_context_len);
    push_segment(segs, Segment::target_prefix, pos + 1 + batch.target_context_len, pos + real);
    push_segment(segs, Segment::pad, pos + real, pos + batch.target_in.size());
  }
  return logits;
}

void assign_parameters(Model& model, const std::vector<NamedParameter>& values) {
  auto& params = model.parameters();
  if (params.size() != values.size())
    throw CheckpointError("checkpoint has " + std::to_string(values.size()) + " parameters, model expects " +
                          std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != values[i].name)
      throw CheckpointError("parameter " + std::to_string(i) + " is '" + values[i].name + "', model expects '" +
                            params[i].name + "'");
    if (params[i].value.shape() != values[i].value.shape())
      throw CheckpointError("parameter '" + params[i].name + "' has shape " + shape_str(values[i].value.shape()) +
                            ", model expects " + shape_str(params[i].value.shape()));
    auto dst = params[i].value.mutable_data();
    auto src = values[i].value.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace docmt

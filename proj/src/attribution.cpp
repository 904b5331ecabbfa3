#include "docmt/attribution.hpp"

#include <numeric>
#include <sstream>

#include "docmt/errors.hpp"
#include "docmt/metrics.hpp"

namespace docmt {

namespace {

void check_heads(const AttentionTrace& at, std::size_t rows, std::size_t cols, const std::string& what) {
  if (at.weights.empty() || at.weights.size() != at.value_norms.size())
    throw TraceError(what + ": " + std::to_string(at.weights.size()) + " attention heads but " +
                     std::to_string(at.value_norms.size()) + " value-norm vectors");
  for (std::size_t h = 0; h < at.weights.size(); ++h) {
    if (at.weights[h].rows != rows || at.weights[h].cols != cols || at.value_norms[h].size() != cols)
      throw TraceError(what + ": head " + std::to_string(h) + " is " + std::to_string(at.weights[h].rows) + "x" +
                       std::to_string(at.weights[h].cols) + ", expected " + std::to_string(rows) + "x" +
                       std::to_string(cols));
  }
  if (at.residual_norms.size() != rows)
    throw TraceError(what + ": " + std::to_string(at.residual_norms.size()) + " residual norms for " +
                     std::to_string(rows) + " positions");
}

// Unnormalized sum_h attn_h[i,j] * norm_h[j].
Matrix weighted_attention(const AttentionTrace& at) {
  const Matrix& first = at.weights.front();
  Matrix c(first.rows, first.cols);
  for (std::size_t h = 0; h < at.weights.size(); ++h)
    for (std::size_t i = 0; i < c.rows; ++i)
      for (std::size_t j = 0; j < c.cols; ++j) c(i, j) += at.weights[h](i, j) * at.value_norms[h][j];
  return c;
}

std::string span_text(const char* side, std::size_t distance, std::size_t begin, std::size_t end) {
  return std::string(side) + " span [" + std::to_string(begin) + ", " + std::to_string(end) + ") at distance " +
         std::to_string(distance);
}

}  // namespace

Matrix layer_contribution(const std::vector<Matrix>& attention, const std::vector<std::vector<double>>& value_norms,
                          const std::vector<double>& residual_norms) {
  AttentionTrace at{attention, value_norms, residual_norms};
  const std::size_t n = residual_norms.size();
  check_heads(at, n, n, "layer_contribution");
  Matrix c = weighted_attention(at);
  for (std::size_t i = 0; i < n; ++i) {
    c(i, i) += residual_norms[i];
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += c(i, j);
    if (!(s > 0.0)) throw NumericError("layer_contribution: row " + std::to_string(i) + " has no mass");
    for (std::size_t j = 0; j < n; ++j) c(i, j) /= s;
  }
  return c;
}

Matrix encoder_rollout(const std::vector<AttentionTrace>& layers) {
  if (layers.empty()) throw TraceError("encoder_rollout: trace has no layers");
  const std::size_t n = layers.front().residual_norms.size();
  Matrix acc = Matrix::identity(n);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].residual_norms.size() != n)
      throw TraceError("encoder_rollout: layer " + std::to_string(l) + " covers " +
                       std::to_string(layers[l].residual_norms.size()) + " positions, layer 0 covers " +
                       std::to_string(n));
    if (n == 0) continue;
    acc = multiply(layer_contribution(layers[l].weights, layers[l].value_norms, layers[l].residual_norms), acc);
  }
  return acc;
}

Matrix compose_multi_encoder(const Matrix& c_sc, const Matrix& c_s, const Matrix& c_tc) {
  for (const Matrix* m : {&c_sc, &c_s, &c_tc})
    if (m->rows != m->cols)
      throw DimensionError("compose_multi_encoder: block is " + std::to_string(m->rows) + "x" +
                           std::to_string(m->cols) + ", expected square");
  const std::size_t n = c_sc.rows + c_s.rows + c_tc.rows;
  Matrix out(n, n);
  std::size_t off = 0;
  for (const Matrix* m : {&c_sc, &c_s, &c_tc}) {
    for (std::size_t i = 0; i < m->rows; ++i)
      for (std::size_t j = 0; j < m->cols; ++j) out(off + i, off + j) = (*m)(i, j);
    off += m->rows;
  }
  return out;
}

Matrix encoder_contributions(const ForwardTrace& trace) {
  if (trace.encoders.size() != trace.block_sizes.size())
    throw TraceError("trace has " + std::to_string(trace.encoders.size()) + " encoder traces for " +
                     std::to_string(trace.block_sizes.size()) + " blocks");
  std::vector<Matrix> blocks;
  for (std::size_t b = 0; b < trace.encoders.size(); ++b)
    blocks.push_back(trace.block_sizes[b] == 0 ? Matrix(0, 0) : encoder_rollout(trace.encoders[b]));
  if (blocks.size() == 1) return blocks[0];
  if (blocks.size() == 3) return compose_multi_encoder(blocks[0], blocks[1], blocks[2]);
  throw TraceError("trace has " + std::to_string(blocks.size()) + " encoder blocks (expected 1 or 3)");
}

Matrix decoder_rollout(const ForwardTrace& trace, const Matrix& c_enc) {
  const std::size_t n = c_enc.rows;
  const std::size_t t = trace.decoder_positions;
  if (c_enc.cols != n || n != trace.encoder_positions)
    throw TraceError("decoder_rollout: encoder matrix is " + std::to_string(c_enc.rows) + "x" +
                     std::to_string(c_enc.cols) + " for " + std::to_string(trace.encoder_positions) +
                     " encoder positions");
  if (trace.decoder.empty()) throw TraceError("decoder_rollout: trace has no decoder layers");
  Matrix r(t, n + t);
  for (std::size_t i = 0; i < t; ++i) r(i, n + i) = 1.0;
  for (std::size_t l = 0; l < trace.decoder.size(); ++l) {
    const auto& layer = trace.decoder[l];
    const std::string where = "decoder layer " + std::to_string(l);
    check_heads(layer.self, t, t, where + " self-attention");
    check_heads(layer.cross, t, n, where + " cross-attention");
    r = multiply(layer_contribution(layer.self.weights, layer.self.value_norms, layer.self.residual_norms), r);
    const Matrix cross = weighted_attention(layer.cross);
    Matrix next(t, n + t);
    for (std::size_t i = 0; i < t; ++i) {
      const double res = layer.cross.residual_norms[i];
      double total = res;
      for (std::size_t j = 0; j < n; ++j) total += cross(i, j);
      if (!(total > 0.0)) throw NumericError(where + ": cross-attention row " + std::to_string(i) + " has no mass");
      for (std::size_t c = 0; c < n + t; ++c) next(i, c) = r(i, c) * (res / total);
      for (std::size_t j = 0; j < n; ++j) {
        const double w = cross(i, j) / total;
        if (w == 0.0) continue;
        for (std::size_t c = 0; c < n; ++c) next(i, c) += w * c_enc(j, c);
      }
    }
    r = std::move(next);
  }
  return r;
}

double AttributionReport::mass(std::size_t step, Segment kind) const {
  double s = 0.0;
  for (const auto& seg : segments)
    if (seg.kind == kind)
      for (std::size_t j = seg.begin; j < seg.end; ++j) s += distribution(step, j);
  return s;
}

double AttributionReport::context_share(std::size_t step) const {
  return mass(step, Segment::source_context) + mass(step, Segment::target_context);
}

double AttributionReport::current_share(std::size_t step) const {
  return mass(step, Segment::source) + mass(step, Segment::target_prefix);
}

AttributionReport attribution_report(const ForwardTrace& trace) {
  AttributionReport r;
  r.distribution = decoder_rollout(trace, encoder_contributions(trace));
  r.segments = trace.segments;
  return r;
}

AttributionReport attribute(const Model& model, const SequenceBatch& batch) {
  NoGradGuard no_grad;
  ForwardTrace trace;
  model.forward(batch, &trace);
  return attribution_report(trace);
}

SupportShare supporting_context_share(const AttributionReport& report, std::size_t step,
                                      const std::vector<std::size_t>& antecedent_positions) {
  if (step >= report.distribution.rows)
    throw TraceError("step " + std::to_string(step) + " outside a report with " +
                     std::to_string(report.distribution.rows) + " steps");
  SupportShare s;
  for (std::size_t p : antecedent_positions) {
    if (p >= report.distribution.cols) throw CoverageError("antecedent position " + std::to_string(p) + " outside the input");
    s.antecedent_pct += report.distribution(step, p);
  }
  s.antecedent_pct *= 100.0;
  s.context_pct = 100.0 * report.context_share(step);
  s.current_pct = 100.0 * report.current_share(step);
  return s;
}

ExampleAttribution attribute_example(const Model& model, const ContrastiveExample& ex, std::size_t k,
                                     const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                     std::optional<Layout> layout) {
  const Layout l = layout.value_or(layout_of(model.config().arch));
  const SequenceBatch batch = contrastive_batch(ex, ex.correct, l, k, src_vocab, tgt_vocab);
  const AttributionReport report = attribute(model, batch);

  const std::size_t step = batch.score_begin + ex.pronoun_index;
  if (step >= batch.target_out.size() || batch.target_out[step] != tgt_vocab.id(ex.correct[ex.pronoun_index]))
    throw TraceError("example " + ex.id + ": pronoun step " + std::to_string(step) + " not found in forced decode");

  std::vector<std::size_t> positions;
  if (l != Layout::sentence) {
    const std::size_t n = std::min(k, ex.source_context.size());
    if (ex.distance == 0 || ex.distance > n)
      throw CoverageError("example " + ex.id + ": antecedent " + span_text("source", ex.distance, ex.src_begin, ex.src_end) +
                          " and " + span_text("target", ex.distance, ex.tgt_begin, ex.tgt_end) +
                          " fall outside the " + std::to_string(n) + " included context sentences");
    const std::size_t first = ex.source_context.size() - n;
    const std::size_t sentence = ex.source_context.size() - ex.distance;
    std::size_t src_off = 0, tgt_off = 0;
    for (std::size_t j = first; j < sentence; ++j) {
      src_off += ex.source_context[j].size() + 1;
      tgt_off += ex.target_context[j].size() + 1;
    }
    const std::size_t tgt_base = l == Layout::concat ? batch.source.size() + 1
                                                     : batch.source_context.size() + batch.source.size();
    for (std::size_t p = ex.src_begin; p < ex.src_end; ++p) positions.push_back(src_off + p);
    for (std::size_t p = ex.tgt_begin; p < ex.tgt_end; ++p) positions.push_back(tgt_base + tgt_off + p);
  }
  ExampleAttribution out;
  out.id = ex.id;
  out.pronoun = ex.correct[ex.pronoun_index];
  out.share = supporting_context_share(report, step, positions);
  out.distribution.assign(report.distribution.data.begin() + step * report.distribution.cols,
                          report.distribution.data.begin() + (step + 1) * report.distribution.cols);
  out.segments = report.segments;
  return out;
}

AttributionSummary summarize(const std::vector<ExampleAttribution>& results) {
  AttributionSummary s;
  std::map<std::string, std::size_t> counts;
  for (const auto& r : results) {
    ++s.count;
    s.mean.antecedent_pct += r.share.antecedent_pct;
    s.mean.context_pct += r.share.context_pct;
    s.mean.current_pct += r.share.current_pct;
    auto& c = s.per_class[r.pronoun];
    c.antecedent_pct += r.share.antecedent_pct;
    c.context_pct += r.share.context_pct;
    c.current_pct += r.share.current_pct;
    ++counts[r.pronoun];
  }
  auto divide = [](SupportShare& x, double n) {
    if (n == 0) return;
    x.antecedent_pct /= n;
    x.context_pct /= n;
    x.current_pct /= n;
  };
  divide(s.mean, static_cast<double>(s.count));
  for (auto& [cls, share] : s.per_class) {
    divide(share, static_cast<double>(counts[cls]));
    s.class_mean.antecedent_pct += share.antecedent_pct;
    s.class_mean.context_pct += share.context_pct;
    s.class_mean.current_pct += share.current_pct;
  }
  divide(s.class_mean, static_cast<double>(s.per_class.size()));
  return s;
}

std::string attribution_dump(const std::vector<ExampleAttribution>& results) {
  std::string out;
  for (const auto& r : results)
    out += r.id + '\t' + format_fixed(r.share.antecedent_pct) + '\t' + format_fixed(r.share.context_pct) + '\t' +
           format_fixed(r.share.current_pct) + '\n';
  return out;
}

std::string attribution_sidecar(const std::vector<ExampleAttribution>& results) {
  std::ostringstream out;
  for (const auto& r : results) {
    out << r.id;
    for (const auto& seg : r.segments) out << '\t' << to_string(seg.kind) << ':' << seg.begin << '-' << seg.end;
    out << "\n\t";
    for (std::size_t j = 0; j < r.distribution.size(); ++j) out << (j ? " " : "") << format_fixed(r.distribution[j]);
    out << '\n';
  }
  return out.str();
}

}  // namespace docmt

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "docmt/contrastive.hpp"
#include "docmt/matrix.hpp"
#include "docmt/model.hpp"

namespace docmt {

// Row-stochastic token-to-token contributions of one attention sublayer with
// queries == keys: sum_h attn_h[i,j] * |v_h(j)| plus the residual norm on the
// diagonal, renormalized per row. Throws NumericError on an all-zero row.
Matrix layer_contribution(const std::vector<Matrix>& attention, const std::vector<std::vector<double>>& value_norms,
                          const std::vector<double>& residual_norms);

// Product of the per-layer matrices, first layer rightmost.
Matrix encoder_rollout(const std::vector<AttentionTrace>& layers);

// Block-diagonal [c_sc, c_s, c_tc]; off-block entries are exactly zero.
Matrix compose_multi_encoder(const Matrix& c_sc, const Matrix& c_s, const Matrix& c_tc);

// Encoder contribution matrix of a trace (composed when it has three blocks).
Matrix encoder_contributions(const ForwardTrace& trace);

// Distribution of every decoder step over all input positions (encoder
// positions, then decoder inputs). Self-attention propagates through earlier
// decoder positions; cross-attention mixes the residual row with C_enc.
Matrix decoder_rollout(const ForwardTrace& trace, const Matrix& c_enc);

struct AttributionReport {
  Matrix distribution;  // decoder steps x input positions
  std::vector<SegmentRange> segments;

  double mass(std::size_t step, Segment kind) const;
  double context_share(std::size_t step) const;  // source + target context
  double current_share(std::size_t step) const;  // current source + target prefix
};

AttributionReport attribution_report(const ForwardTrace& trace);
AttributionReport attribute(const Model& model, const SequenceBatch& batch);

struct SupportShare {
  double antecedent_pct = 0;
  double context_pct = 0;
  double current_pct = 0;
};

// Percentages for one decoder step; `antecedent_positions` are input positions.
SupportShare supporting_context_share(const AttributionReport& report, std::size_t step,
                                      const std::vector<std::size_t>& antecedent_positions);

struct ExampleAttribution {
  std::string id;
  std::string pronoun;
  SupportShare share;
  std::vector<double> distribution;  // the pronoun step's row
  std::vector<SegmentRange> segments;
};

// Forces the reference of a contrastive example with the last k context
// sentences (gold target context), takes the step emitting the pronoun and
// measures the annotated antecedent span on both sides. Throws CoverageError
// when the span lies outside the included context; the sentence layout has
// no context positions and reports 0 / 0 / 100.
ExampleAttribution attribute_example(const Model& model, const ContrastiveExample& ex, std::size_t k,
                                     const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                     std::optional<Layout> layout = std::nullopt);

struct AttributionSummary {
  std::size_t count = 0;
  SupportShare mean;                                  // over examples
  std::map<std::string, SupportShare> per_class;      // over examples of each pronoun
  SupportShare class_mean;                            // mean of the per-class means
};

AttributionSummary summarize(const std::vector<ExampleAttribution>& results);

// `example_id TAB antecedent_pct TAB context_pct TAB current_pct`
std::string attribution_dump(const std::vector<ExampleAttribution>& results);
// Per example: id, segments and the pronoun-step distribution, one line each.
std::string attribution_sidecar(const std::vector<ExampleAttribution>& results);

}  // namespace docmt

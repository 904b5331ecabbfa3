#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "docmt/corpus.hpp"
#include "docmt/matrix.hpp"
#include "docmt/rng.hpp"
#include "docmt/tensor.hpp"

namespace docmt {

enum class Architecture { sentence, concat_2to2, multi_encoder };

std::string to_string(Architecture arch);
// Accepts the long names and the short CLI spellings "concat" and "multi".
Architecture parse_architecture(std::string_view name);

struct ModelConfig {
  Architecture arch = Architecture::sentence;
  std::size_t n_layers = 2;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t d_ffn = 128;
  double dropout = 0.1;
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  std::size_t max_positions = 256;
  std::size_t max_context = 5;
  bool pre_norm = true;
  // Multi-encoder only: context encoders reuse the token embeddings of their side.
  bool share_context_embeddings = true;

  void validate() const;  // ConfigError
  std::map<std::string, std::string> to_kv() const;
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv);

  bool operator==(const ModelConfig&) const = default;
};

enum class Segment { source_context, source, target_context, target_prefix, pad };

std::string to_string(Segment s);

struct SegmentRange {
  Segment kind;
  std::size_t begin;
  std::size_t end;
  bool operator==(const SegmentRange&) const = default;
};

// One example. For the concat layout `source` and `target_in` hold the
// SEP-joined context followed by the current sentence; for the multi-encoder
// layout the contexts live in their own sequences. Padding is suffix-only.
struct SequenceBatch {
  TokenIds source;
  TokenIds target_in;   // BOS followed by the target
  TokenIds target_out;  // target followed by EOS
  TokenIds source_context;
  TokenIds target_context;
  bool multi = false;
  std::size_t k = 0;
  std::size_t source_context_len = 0;  // leading context positions of `source`
  std::size_t target_context_len = 0;  // context positions of `target_in`, starting at 1
  std::size_t score_begin = 0;         // first position of `target_out` in the current sentence

  std::size_t source_length() const;  // without padding
  std::size_t target_length() const;
};

enum class Layout { sentence, concat, multi };

Layout layout_of(Architecture arch);

// Assembles a batch from already-encoded sentences (context oldest first).
// `target` may be empty when decoding.
SequenceBatch assemble_batch(Layout layout, const std::vector<TokenIds>& source_context, const TokenIds& source,
                             const std::vector<TokenIds>& target_context, const TokenIds& target);

// Generated target sentences of one document, keyed by sentence index.
using TranslationCache = std::map<std::size_t, Tokens>;

enum class TargetContextSource { gold, generated };

SequenceBatch build_batch(Layout layout, const ParallelDocument& doc, std::size_t i, std::size_t k,
                          const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                          TargetContextSource target_source = TargetContextSource::gold,
                          const TranslationCache* cache = nullptr);

// Appends pad tokens so the sequences reach the given lengths.
void pad_batch(SequenceBatch& batch, std::size_t source_len, std::size_t target_len);

struct AttentionTrace {
  std::vector<Matrix> weights;                   // per head, queries x keys
  std::vector<std::vector<double>> value_norms;  // per head, per key: |W_o,h (W_v,h x_j + b)|
  std::vector<double> residual_norms;            // per query: |x_i| on the residual stream
};

struct DecoderLayerTrace {
  AttentionTrace self;
  AttentionTrace cross;
};

// Input positions are the encoder positions (blocks in order) followed by the
// decoder input positions.
struct ForwardTrace {
  std::vector<std::vector<AttentionTrace>> encoders;  // per encoder block, per layer
  std::vector<std::size_t> block_sizes;               // encoder positions per block
  std::vector<DecoderLayerTrace> decoder;
  std::vector<SegmentRange> segments;
  std::size_t encoder_positions = 0;
  std::size_t decoder_positions = 0;
};

struct NamedParameter {
  std::string name;
  Tensor value;
};

struct EncoderMemory {
  Tensor states;                       // [N x d]
  std::vector<bool> key_pad;           // true at pad positions
  std::vector<std::size_t> block_sizes;
};

class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::vector<NamedParameter>& parameters() { return params_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  const Tensor& parameter(std::string_view name) const;

  // Teacher-forced logits [T x V_tgt]. Dropout is applied only when
  // `dropout_rng` is given.
  Tensor forward(const SequenceBatch& batch, ForwardTrace* trace = nullptr, Rng* dropout_rng = nullptr) const;

  EncoderMemory encode(const SequenceBatch& batch, ForwardTrace* trace = nullptr, Rng* dropout_rng = nullptr) const;
  // Multi-encoder states [e_sc, e_s, e_tc] with block boundaries.
  EncoderMemory encode_multi(const TokenIds& source_context, const TokenIds& source, const TokenIds& target_context,
                             ForwardTrace* trace = nullptr, Rng* dropout_rng = nullptr) const;
  Tensor decode(const EncoderMemory& memory, const TokenIds& target_in, ForwardTrace* trace = nullptr,
                Rng* dropout_rng = nullptr) const;

 private:
  Tensor encoder_stack(const std::string& prefix, const std::string& embed, const TokenIds& ids,
                       std::vector<AttentionTrace>* trace, Rng* rng) const;
  Tensor attention(const std::string& prefix, const Tensor& query_in, const Tensor& key_in,
                   const std::vector<bool>& key_pad, bool causal, AttentionTrace* trace) const;
  Tensor ffn(const std::string& prefix, const Tensor& x) const;
  Tensor norm(const std::string& prefix, const Tensor& x) const;
  Tensor embed(const std::string& table, const TokenIds& ids, Rng* rng) const;
  void check_length(std::size_t n) const;

  ModelConfig config_;
  std::vector<NamedParameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Sinusoidal position encodings for positions [0, n).
Tensor positional_encoding(std::size_t n, std::size_t d_model);

struct Checkpoint {
  ModelConfig config;
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
  std::vector<NamedParameter> parameters;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Vocabulary& src_vocab,
                     const Vocabulary& tgt_vocab);
Checkpoint load_checkpoint_data(const std::filesystem::path& path);

struct LoadedModel {
  Model model;
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
};
LoadedModel load_checkpoint(const std::filesystem::path& path);

// Copies parameter values by name; throws CheckpointError on mismatch.
void assign_parameters(Model& model, const std::vector<NamedParameter>& values);

}  // namespace docmt

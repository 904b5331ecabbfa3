#pragma once

#include <cmath>

#include "docmt/model.hpp"
#include "docmt/rng.hpp"

namespace docmt::testing {

inline Matrix random_attention(Rng& rng, std::size_t rows, std::size_t cols, bool causal) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    const std::size_t limit = causal ? std::min(cols, i + 1) : cols;
    for (std::size_t j = 0; j < limit; ++j) s += m(i, j) = std::exp(3.0 * rng.normal());
    for (std::size_t j = 0; j < limit; ++j) m(i, j) /= s;
  }
  return m;
}

inline AttentionTrace random_layer(Rng& rng, std::size_t rows, std::size_t cols, std::size_t heads, bool causal) {
  AttentionTrace at;
  for (std::size_t h = 0; h < heads; ++h) {
    at.weights.push_back(random_attention(rng, rows, cols, causal));
    std::vector<double> norms(cols);
    for (double& v : norms) v = 0.01 + 5.0 * rng.uniform();
    at.value_norms.push_back(std::move(norms));
  }
  at.residual_norms.resize(rows);
  for (double& v : at.residual_norms) v = 0.01 + 5.0 * rng.uniform();
  return at;
}

// Blocks of size 0 are allowed; one block means a single encoder.
inline ForwardTrace random_trace(Rng& rng, const std::vector<std::size_t>& blocks, std::size_t target,
                                 std::size_t layers, std::size_t heads) {
  ForwardTrace t;
  t.block_sizes = blocks;
  for (std::size_t n : blocks) {
    t.encoders.emplace_back();
    for (std::size_t l = 0; l < layers; ++l) t.encoders.back().push_back(random_layer(rng, n, n, heads, false));
    t.encoder_positions += n;
  }
  t.decoder_positions = target;
  for (std::size_t l = 0; l < layers; ++l)
    t.decoder.push_back({random_layer(rng, target, target, heads, true),
                         random_layer(rng, target, t.encoder_positions, heads, false)});
  return t;
}

}  // namespace docmt::testing

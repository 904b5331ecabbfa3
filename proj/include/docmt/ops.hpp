#pragma once

#include <cstdint>
#include <vector>

#include "docmt/rng.hpp"
#include "docmt/tensor.hpp"

// Differentiable operations on rank-1/rank-2 tensors. Every op records its
// backward rule when grad mode is on and any input requires a gradient.
namespace docmt::ops {

Tensor matmul(const Tensor& a, const Tensor& b);
// a · bᵀ
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise; `b` may also be a bias row ([n] or [1 x n]) broadcast over rows of `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);

// axis 0 normalizes columns, axis 1 (or -1) rows; rank-1 tensors use axis 0.
Tensor softmax(const Tensor& x, int axis = -1);
Tensor log_softmax(const Tensor& x);

// Normalizes each row over the last axis, then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Rows of `table` selected by `ids`.
Tensor embedding(const Tensor& table, const std::vector<std::int32_t>& ids);

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Inverted dropout. Identity when p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng);

struct CrossEntropy {
  Tensor loss;                      // scalar mean over non-pad targets
  std::vector<double> token_logprobs;  // log P(target_t), NaN at pad positions
  std::size_t token_count = 0;
};

// Label-smoothed token cross-entropy. With smoothing ε the per-token loss is
// (1-ε)·(-log p_y) + ε·mean_v(-log p_v). Positions whose target equals
// `pad_id` are excluded.
CrossEntropy cross_entropy(const Tensor& logits, const std::vector<std::int32_t>& targets,
                           double label_smoothing, std::int32_t pad_id);

}  // namespace docmt::ops

#include "docmt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "docmt/errors.hpp"

namespace docmt::ops {

namespace {

// C[M×N] += A[M×K] · B[K×N]
void gemm_nn(std::size_t M, std::size_t K, std::size_t N, const double* A, const double* B,
             double* C) {
  for (std::size_t i = 0; i < M; ++i) {
    double* c = C + i * N;
    const double* a = A + i * K;
    for (std::size_t k = 0; k < K; ++k) {
      const double av = a[k];
      if (av == 0.0) continue;
      const double* b = B + k * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C[M×N] += A[M×K] · B[N×K]ᵀ
void gemm_nt(std::size_t M, std::size_t K, std::size_t N, const double* A, const double* B,
             double* C) {
  for (std::size_t i = 0; i < M; ++i) {
    const double* a = A + i * K;
    double* c = C + i * N;
    for (std::size_t j = 0; j < N; ++j) {
      const double* b = B + j * K;
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) acc += a[k] * b[k];
      c[j] += acc;
    }
  }
}

// C[K×N] += A[M×K]ᵀ · D[M×N]
void gemm_tn(std::size_t M, std::size_t K, std::size_t N, const double* A, const double* D,
             double* C) {
  for (std::size_t i = 0; i < M; ++i) {
    const double* a = A + i * K;
    const double* d = D + i * N;
    for (std::size_t k = 0; k < K; ++k) {
      const double av = a[k];
      if (av == 0.0) continue;
      double* c = C + k * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += av * d[j];
    }
  }
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_str(t.shape()));
  }
}

// Bias broadcast: b is [n] or [1 x n] while a is [m x n] with m != 1 or shapes differ.
bool is_row_broadcast(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return false;
  if (a.rank() != 2) return false;
  const std::size_t n = a.shape()[1];
  if (b.rank() == 1 && b.shape()[0] == n) return true;
  if (b.rank() == 2 && b.shape()[0] == 1 && b.shape()[1] == n) return true;
  return false;
}

Tensor binary(const Tensor& a, const Tensor& b, int kind, const char* name) {
  const bool bcast = is_row_broadcast(a, b);
  if (!bcast && a.shape() != b.shape()) {
    throw DimensionError(std::string(name) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  const std::size_t n = a.size();
  const std::size_t width = bcast ? b.size() : n;
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double bv = bd[bcast ? i % width : i];
    switch (kind) {
      case 0: out[i] = ad[i] + bv; break;
      case 1: out[i] = ad[i] - bv; break;
      default: out[i] = ad[i] * bv; break;
    }
  }
  return Tensor::make_result(a.shape(), std::move(out), {a, b},
                             [kind, bcast, width](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    const auto& g = self.grad;
    const std::size_t n = g.size();
    if (pa.requires_grad) {
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        ga[i] += kind == 2 ? g[i] * pb.data[bcast ? i % width : i] : g[i];
      }
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = bcast ? i % width : i;
        switch (kind) {
          case 0: gb[j] += g[i]; break;
          case 1: gb[j] -= g[i]; break;
          default: gb[j] += g[i] * pa.data[i]; break;
        }
      }
    }
  });
}

struct AxisLayout {
  std::size_t groups, length, stride, group_step, inner;
};

AxisLayout axis_layout(const Tensor& x, int axis) {
  if (x.rank() == 1 || x.rank() == 0) {
    if (axis != 0 && axis != -1) throw DimensionError("softmax: invalid axis for vector");
    return {1, x.size(), 1, 0, 1};
  }
  require_rank2(x, "softmax");
  const std::size_t R = x.shape()[0], C = x.shape()[1];
  if (axis == 1 || axis == -1) return {R, C, 1, C, 1};
  if (axis == 0) return {C, R, C, 1, 1};
  throw DimensionError("softmax: invalid axis " + std::to_string(axis));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t M = a.shape()[0], K = a.shape()[1], N = b.shape()[1];
  if (b.shape()[0] != K) {
    throw DimensionError("matmul: inner dimensions differ: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(M * N, 0.0);
  gemm_nn(M, K, N, a.data().data(), b.data().data(), out.data());
  return Tensor::make_result({M, N}, std::move(out), {a, b}, [M, K, N](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    if (pa.requires_grad) gemm_nt(M, N, K, self.grad.data(), pb.data.data(), pa.grad_buffer().data());
    if (pb.requires_grad) gemm_tn(M, K, N, pa.data.data(), self.grad.data(), pb.grad_buffer().data());
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  const std::size_t M = a.shape()[0], K = a.shape()[1], N = b.shape()[0];
  if (b.shape()[1] != K) {
    throw DimensionError("matmul_nt: inner dimensions differ: " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()) + "^T");
  }
  std::vector<double> out(M * N, 0.0);
  gemm_nt(M, K, N, a.data().data(), b.data().data(), out.data());
  return Tensor::make_result({M, N}, std::move(out), {a, b}, [M, K, N](detail::Node& self) {
    detail::Node& pa = *self.parents[0];
    detail::Node& pb = *self.parents[1];
    if (pa.requires_grad) gemm_nn(M, N, K, self.grad.data(), pb.data.data(), pa.grad_buffer().data());
    if (pb.requires_grad) gemm_tn(M, N, K, self.grad.data(), pa.data.data(), pb.grad_buffer().data());
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t R = a.shape()[0], C = a.shape()[1];
  std::vector<double> out(R * C);
  auto d = a.data();
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) out[j * R + i] = d[i * C + j];
  return Tensor::make_result({C, R}, std::move(out), {a}, [R, C](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) g[i * C + j] += self.grad[j * R + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, 0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, 1, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, 2, "mul"); }

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= s;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [s](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [](detail::Node& self) {
    detail::Node& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (p.data[i] > 0.0) g[i] += self.grad[i];
  });
}

Tensor softmax(const Tensor& x, int axis) {
  const AxisLayout L = axis_layout(x, axis);
  auto d = x.data();
  std::vector<double> out(x.size());
  for (std::size_t gi = 0; gi < L.groups; ++gi) {
    const std::size_t base = gi * L.group_step;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < L.length; ++k) mx = std::max(mx, d[base + k * L.stride]);
    double total = 0.0;
    for (std::size_t k = 0; k < L.length; ++k) {
      const std::size_t idx = base + k * L.stride;
      out[idx] = std::exp(d[idx] - mx);
      total += out[idx];
    }
    for (std::size_t k = 0; k < L.length; ++k) out[base + k * L.stride] /= total;
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [L](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    const auto& y = self.data;
    const auto& dy = self.grad;
    for (std::size_t gi = 0; gi < L.groups; ++gi) {
      const std::size_t base = gi * L.group_step;
      double dot = 0.0;
      for (std::size_t k = 0; k < L.length; ++k) {
        const std::size_t idx = base + k * L.stride;
        dot += dy[idx] * y[idx];
      }
      for (std::size_t k = 0; k < L.length; ++k) {
        const std::size_t idx = base + k * L.stride;
        g[idx] += y[idx] * (dy[idx] - dot);
      }
    }
  });
}

Tensor log_softmax(const Tensor& x) {
  const AxisLayout L = axis_layout(x, -1);
  auto d = x.data();
  std::vector<double> out(x.size());
  for (std::size_t gi = 0; gi < L.groups; ++gi) {
    const std::size_t base = gi * L.group_step;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < L.length; ++k) mx = std::max(mx, d[base + k]);
    double total = 0.0;
    for (std::size_t k = 0; k < L.length; ++k) total += std::exp(d[base + k] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t k = 0; k < L.length; ++k) out[base + k] = d[base + k] - lse;
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [L](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t gi = 0; gi < L.groups; ++gi) {
      const std::size_t base = gi * L.group_step;
      double total = 0.0;
      for (std::size_t k = 0; k < L.length; ++k) total += self.grad[base + k];
      for (std::size_t k = 0; k < L.length; ++k) {
        g[base + k] += self.grad[base + k] - std::exp(self.data[base + k]) * total;
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t n = x.cols();
  if (n == 0) throw DimensionError("layer_norm: empty last axis");
  if (gain.size() != n || bias.size() != n) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match width " + std::to_string(n));
  }
  const std::size_t rows = x.size() / n;
  auto d = x.data();
  auto gd = gain.data();
  auto bd = bias.data();
  std::vector<double> out(x.size());
  // Saved normalized values and reciprocal std per row.
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = d.data() + r * n;
    double mu = 0.0;
    for (std::size_t k = 0; k < n; ++k) mu += row[k];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t k = 0; k < n; ++k) var += (row[k] - mu) * (row[k] - mu);
    var /= static_cast<double>(n);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t k = 0; k < n; ++k) {
      const double h = (row[k] - mu) * rs;
      (*xhat)[r * n + k] = h;
      out[r * n + k] = gd[k] * h + bd[k];
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), {x, gain, bias},
                             [n, rows, xhat, rstd](detail::Node& self) {
    detail::Node& px = *self.parents[0];
    detail::Node& pg = *self.parents[1];
    detail::Node& pb = *self.parents[2];
    const auto& dy = self.grad;
    if (pg.requires_grad) {
      auto& gg = pg.grad_buffer();
      for (std::size_t i = 0; i < dy.size(); ++i) gg[i % n] += dy[i] * (*xhat)[i];
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < dy.size(); ++i) gb[i % n] += dy[i];
    }
    if (px.requires_grad) {
      auto& gx = px.grad_buffer();
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t r = 0; r < rows; ++r) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double dh = dy[r * n + k] * pg.data[k];
          m1 += dh;
          m2 += dh * (*xhat)[r * n + k];
        }
        m1 *= inv_n;
        m2 *= inv_n;
        for (std::size_t k = 0; k < n; ++k) {
          const double dh = dy[r * n + k] * pg.data[k];
          gx[r * n + k] += (*rstd)[r] * (dh - m1 - (*xhat)[r * n + k] * m2);
        }
      }
    }
  });
}

Tensor embedding(const Tensor& table, const std::vector<std::int32_t>& ids) {
  require_rank2(table, "embedding");
  const std::size_t V = table.shape()[0], d = table.shape()[1];
  std::vector<double> out(ids.size() * d);
  auto td = table.data();
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || static_cast<std::size_t>(ids[t]) >= V) {
      throw VocabularyError("embedding: token id " + std::to_string(ids[t]) +
                            " outside vocabulary of size " + std::to_string(V));
    }
    std::copy_n(td.begin() + static_cast<std::ptrdiff_t>(ids[t] * d), d, out.begin() + t * d);
  }
  return Tensor::make_result({ids.size(), d}, std::move(out), {table},
                             [ids, d](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t t = 0; t < ids.size(); ++t)
      for (std::size_t k = 0; k < d; ++k) g[ids[t] * d + k] += self.grad[t * d + k];
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_rows");
  const std::size_t R = x.shape()[0], C = x.shape()[1];
  if (begin > end || end > R) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + shape_str(x.shape()));
  }
  auto d = x.data();
  std::vector<double> out(d.begin() + static_cast<std::ptrdiff_t>(begin * C),
                          d.begin() + static_cast<std::ptrdiff_t>(end * C));
  return Tensor::make_result({end - begin, C}, std::move(out), {x},
                             [begin, C](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * C + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_cols");
  const std::size_t R = x.shape()[0], C = x.shape()[1];
  if (begin > end || end > C) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + shape_str(x.shape()));
  }
  const std::size_t w = end - begin;
  auto d = x.data();
  std::vector<double> out(R * w);
  for (std::size_t r = 0; r < R; ++r)
    std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(r * C + begin), w, out.begin() + r * w);
  return Tensor::make_result({R, w}, std::move(out), {x}, [R, C, w, begin](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t k = 0; k < w; ++k) g[r * C + begin + k] += self.grad[r * w + k];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t C = parts[0].cols();
  std::size_t R = 0;
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.cols() != C) {
      throw DimensionError("concat_rows: width mismatch " + shape_str(parts[0].shape()) +
                           " vs " + shape_str(p.shape()));
    }
    R += p.rows();
  }
  std::vector<double> out;
  out.reserve(R * C);
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return Tensor::make_result({R, C}, std::move(out), parts, [](detail::Node& self) {
    std::size_t offset = 0;
    for (auto& parent : self.parents) {
      const std::size_t n = parent->data.size();
      if (parent->requires_grad) {
        auto& g = parent->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t R = parts[0].rows();
  std::size_t C = 0;
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != R) {
      throw DimensionError("concat_cols: height mismatch " + shape_str(parts[0].shape()) +
                           " vs " + shape_str(p.shape()));
    }
    C += p.cols();
  }
  std::vector<double> out(R * C);
  std::size_t col = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.cols();
    auto d = p.data();
    for (std::size_t r = 0; r < R; ++r)
      std::copy_n(d.begin() + static_cast<std::ptrdiff_t>(r * w), w, out.begin() + r * C + col);
    col += w;
  }
  return Tensor::make_result({R, C}, std::move(out), parts, [R, C](detail::Node& self) {
    std::size_t col = 0;
    for (auto& parent : self.parents) {
      const std::size_t w = parent->shape[1];
      if (parent->requires_grad) {
        auto& g = parent->grad_buffer();
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t k = 0; k < w; ++k) g[r * w + k] += self.grad[r * C + col + k];
      }
      col += w;
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return Tensor::make_result({}, {total}, {x}, [](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw NumericError("dropout: rate must be < 1");
  const double keep = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(x.size());
  std::vector<double> out(x.size());
  auto d = x.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    (*mask)[i] = rng.uniform() < p ? 0.0 : keep;
    out[i] = d[i] * (*mask)[i];
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [mask](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (*mask)[i];
  });
}

CrossEntropy cross_entropy(const Tensor& logits, const std::vector<std::int32_t>& targets,
                           double label_smoothing, std::int32_t pad_id) {
  require_rank2(logits, "cross_entropy");
  const std::size_t T = logits.shape()[0], V = logits.shape()[1];
  if (targets.size() != T) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_str(logits.shape()));
  }
  const double eps = label_smoothing;
  auto d = logits.data();
  CrossEntropy result;
  result.token_logprobs.assign(T, std::numeric_limits<double>::quiet_NaN());
  auto probs = std::make_shared<std::vector<double>>(T * V, 0.0);
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const std::int32_t y = targets[t];
    if (y == pad_id) continue;
    if (y < 0 || static_cast<std::size_t>(y) >= V) {
      throw VocabularyError("cross_entropy: target id " + std::to_string(y) +
                            " outside vocabulary of size " + std::to_string(V));
    }
    const double* row = d.data() + t * V;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < V; ++v) mx = std::max(mx, row[v]);
    double z = 0.0;
    for (std::size_t v = 0; v < V; ++v) z += std::exp(row[v] - mx);
    const double lse = mx + std::log(z);
    double mean_nll = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      (*probs)[t * V + v] = std::exp(row[v] - lse);
      mean_nll += lse - row[v];
    }
    mean_nll /= static_cast<double>(V);
    const double lp = row[y] - lse;
    result.token_logprobs[t] = lp;
    total += (1.0 - eps) * (-lp) + eps * mean_nll;
    ++result.token_count;
  }
  const std::size_t count = result.token_count;
  const double loss = count ? total / static_cast<double>(count) : 0.0;
  result.loss = Tensor::make_result({}, {loss}, {logits},
                                    [probs, targets, T, V, eps, pad_id, count](detail::Node& self) {
    if (count == 0) return;
    auto& g = self.parents[0]->grad_buffer();
    const double scale = self.grad[0] / static_cast<double>(count);
    const double smooth = eps / static_cast<double>(V);
    for (std::size_t t = 0; t < T; ++t) {
      if (targets[t] == pad_id) continue;
      for (std::size_t v = 0; v < V; ++v) {
        double dv = (*probs)[t * V + v] - smooth;
        if (static_cast<std::int32_t>(v) == targets[t]) dv -= 1.0 - eps;
        g[t * V + v] += scale * dv;
      }
    }
  });
  return result;
}

}  // namespace docmt::ops

#include "unimc/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "unimc/errors.hpp"

namespace unimc::ops {

namespace {

constexpr double kBlocked = std::numeric_limits<double>::lowest();
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

[[noreturn]] void shape_error(const std::string& op, const TensorPtr& a,
                              const TensorPtr& b) {
  throw NumericError(ErrorCode::kShapeMismatch,
                     op + " on shapes " + shape_str(a->shape()) + " and " +
                         shape_str(b->shape()));
}

// c[M,N] += a[M,K] * b[K,N]
void mm_nn_acc(const double* a, const double* b, double* c, std::size_t M,
               std::size_t K, std::size_t N) {
  for (std::size_t i = 0; i < M; ++i) {
    const double* arow = a + i * K;
    double* crow = c + i * N;
    for (std::size_t p = 0; p < K; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      const double* brow = b + p * N;
      for (std::size_t j = 0; j < N; ++j) crow[j] += aip * brow[j];
    }
  }
}

// c[M,N] += a[M,K] * b[N,K]^T
void mm_nt_acc(const double* a, const double* b, double* c, std::size_t M,
               std::size_t K, std::size_t N) {
  for (std::size_t i = 0; i < M; ++i) {
    const double* arow = a + i * K;
    double* crow = c + i * N;
    for (std::size_t j = 0; j < N; ++j) {
      const double* brow = b + j * K;
      double acc = 0.0;
      for (std::size_t p = 0; p < K; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// c[M,N] += a[K,M]^T * b[K,N]
void mm_tn_acc(const double* a, const double* b, double* c, std::size_t M,
               std::size_t K, std::size_t N) {
  for (std::size_t p = 0; p < K; ++p) {
    const double* arow = a + p * M;
    const double* brow = b + p * N;
    for (std::size_t i = 0; i < M; ++i) {
      const double api = arow[i];
      if (api == 0.0) continue;
      double* crow = c + i * N;
      for (std::size_t j = 0; j < N; ++j) crow[j] += api * brow[j];
    }
  }
}

TensorPtr make_node(std::vector<std::size_t> shape, std::vector<double> values,
                    std::vector<TensorPtr> parents,
                    std::function<void(Tensor&)> backprop) {
  bool needs_grad = false;
  for (const TensorPtr& p : parents) needs_grad |= p->requires_grad();
  TensorPtr out = Tensor::from(std::move(shape), std::move(values), needs_grad);
  if (needs_grad) {
    out->parents_ = std::move(parents);
    out->backprop_ = std::move(backprop);
  }
  return out;
}

void require_2d(const TensorPtr& x, const char* op) {
  if (x->rank() != 2) {
    throw NumericError(ErrorCode::kShapeMismatch,
                       std::string(op) + " needs a 2-D tensor, got " +
                           shape_str(x->shape()));
  }
}

}  // namespace

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a->dim(0), k = a->dim(1), n = b->dim(1);
  if (b->dim(0) != k) shape_error("matmul", a, b);
  std::vector<double> out(m * n, 0.0);
  mm_nn_acc(a->values().data(), b->values().data(), out.data(), m, k, n);
  return make_node({m, n}, std::move(out), {a, b}, [a, b, m, k, n](Tensor& self) {
    const double* g = self.grad().data();
    if (a->requires_grad()) {
      mm_nt_acc(g, b->values().data(), a->grad().data(), m, n, k);
    }
    if (b->requires_grad()) {
      // dB[k,n] = A^T[k,m] * dC[m,n]
      mm_tn_acc(a->values().data(), g, b->grad().data(), k, m, n);
    }
  });
}

TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  const std::size_t m = a->dim(0), k = a->dim(1), n = b->dim(0);
  if (b->dim(1) != k) shape_error("matmul_nt", a, b);
  std::vector<double> out(m * n, 0.0);
  mm_nt_acc(a->values().data(), b->values().data(), out.data(), m, k, n);
  return make_node({m, n}, std::move(out), {a, b}, [a, b, m, k, n](Tensor& self) {
    const double* g = self.grad().data();
    if (a->requires_grad()) {
      mm_nn_acc(g, b->values().data(), a->grad().data(), m, n, k);
    }
    if (b->requires_grad()) {
      // dB[n,k] = dC^T[n,m] * A[m,k]
      mm_tn_acc(g, a->values().data(), b->grad().data(), n, m, k);
    }
  });
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  const std::size_t an = a->size(), bn = b->size();
  bool suffix = bn == 1;
  if (!suffix && b->rank() <= a->rank()) {
    suffix = true;
    for (std::size_t i = 0; i < b->rank(); ++i) {
      if (b->dim(b->rank() - 1 - i) != a->dim(a->rank() - 1 - i)) suffix = false;
    }
  }
  if (!(an == bn && a->shape() == b->shape()) && !suffix) shape_error("add", a, b);

  std::vector<double> out(an);
  const double* av = a->values().data();
  const double* bv = b->values().data();
  const std::size_t period = (a->shape() == b->shape()) ? an : bn;
  for (std::size_t i = 0; i < an; ++i) out[i] = av[i] + bv[i % period];
  return make_node(a->shape(), std::move(out), {a, b}, [a, b, an, period](Tensor& self) {
    const double* g = self.grad().data();
    if (a->requires_grad()) {
      double* ga = a->grad().data();
      for (std::size_t i = 0; i < an; ++i) ga[i] += g[i];
    }
    if (b->requires_grad()) {
      double* gb = b->grad().data();
      for (std::size_t i = 0; i < an; ++i) gb[i % period] += g[i];
    }
  });
}

TensorPtr scale(const TensorPtr& a, double factor) {
  std::vector<double> out(a->values());
  for (double& v : out) v *= factor;
  return make_node(a->shape(), std::move(out), {a}, [a, factor](Tensor& self) {
    const double* g = self.grad().data();
    double* ga = a->grad().data();
    for (std::size_t i = 0; i < self.size(); ++i) ga[i] += factor * g[i];
  });
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape() != b->shape()) shape_error("mul", a, b);
  std::vector<double> out(a->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->values()[i] * b->values()[i];
  return make_node(a->shape(), std::move(out), {a, b}, [a, b](Tensor& self) {
    const double* g = self.grad().data();
    if (a->requires_grad()) {
      double* ga = a->grad().data();
      for (std::size_t i = 0; i < self.size(); ++i) ga[i] += g[i] * b->values()[i];
    }
    if (b->requires_grad()) {
      double* gb = b->grad().data();
      for (std::size_t i = 0; i < self.size(); ++i) gb[i] += g[i] * a->values()[i];
    }
  });
}

TensorPtr masked_softmax(const TensorPtr& x, const TensorPtr& additive_mask,
                         std::size_t axis) {
  if (axis >= x->rank()) {
    throw NumericError(ErrorCode::kShapeMismatch,
                       "softmax axis " + std::to_string(axis) + " out of range for " +
                           shape_str(x->shape()));
  }
  if (additive_mask && additive_mask->shape() != x->shape()) {
    shape_error("masked_softmax", x, additive_mask);
  }
  const std::size_t k = x->dim(axis);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x->dim(i);
  for (std::size_t i = axis + 1; i < x->rank(); ++i) inner *= x->dim(i);

  const double* xv = x->values().data();
  const double* mv = additive_mask ? additive_mask->values().data() : nullptr;
  std::vector<double> out(x->size(), 0.0);

  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * k * inner + i;
      double max = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t idx = base + j * inner;
        if (mv && mv[idx] <= kBlocked) continue;
        const double z = xv[idx] + (mv ? mv[idx] : 0.0);
        if (!any || z > max) max = z;
        any = true;
      }
      if (!any) {
        throw NumericError(ErrorCode::kFullyMaskedRow,
                           "masked_softmax row has no unmasked slot");
      }
      double denom = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t idx = base + j * inner;
        if (mv && mv[idx] <= kBlocked) continue;
        const double e = std::exp(xv[idx] + (mv ? mv[idx] : 0.0) - max);
        out[idx] = e;
        denom += e;
      }
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t idx = base + j * inner;
        if (mv && mv[idx] <= kBlocked) continue;
        out[idx] /= denom;
      }
    }
  }

  return make_node(x->shape(), std::move(out), {x},
                   [x, outer, inner, k](Tensor& self) {
                     const double* y = self.values().data();
                     const double* g = self.grad().data();
                     double* gx = x->grad().data();
                     for (std::size_t o = 0; o < outer; ++o) {
                       for (std::size_t i = 0; i < inner; ++i) {
                         const std::size_t base = o * k * inner + i;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < k; ++j) {
                           const std::size_t idx = base + j * inner;
                           dot += g[idx] * y[idx];
                         }
                         for (std::size_t j = 0; j < k; ++j) {
                           const std::size_t idx = base + j * inner;
                           gx[idx] += y[idx] * (g[idx] - dot);
                         }
                       }
                     }
                   });
}

TensorPtr softmax(const TensorPtr& x, std::size_t axis) {
  return masked_softmax(x, nullptr, axis);
}

TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias,
                     double eps) {
  if (x->rank() < 1) throw NumericError(ErrorCode::kShapeMismatch, "layer_norm on scalar");
  const std::size_t h = x->dim(x->rank() - 1);
  if (gain->size() != h || bias->size() != h) shape_error("layer_norm", x, gain);
  const std::size_t rows = x->size() / h;

  const double* xv = x->values().data();
  const double* gv = gain->values().data();
  const double* bv = bias->values().data();
  std::vector<double> out(x->size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv + r * h;
    double mean = 0.0;
    for (std::size_t i = 0; i < h; ++i) mean += row[i];
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t i = 0; i < h; ++i) var += (row[i] - mean) * (row[i] - mean);
    var /= static_cast<double>(h);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < h; ++i) {
      out[r * h + i] = (row[i] - mean) * inv * gv[i] + bv[i];
    }
  }

  return make_node(x->shape(), std::move(out), {x, gain, bias},
                   [x, gain, bias, rows, h, eps](Tensor& self) {
                     const double* xv = x->values().data();
                     const double* gv = gain->values().data();
                     const double* g = self.grad().data();
                     const double hn = static_cast<double>(h);
                     for (std::size_t r = 0; r < rows; ++r) {
                       const double* row = xv + r * h;
                       const double* grow = g + r * h;
                       double mean = 0.0;
                       for (std::size_t i = 0; i < h; ++i) mean += row[i];
                       mean /= hn;
                       double var = 0.0;
                       for (std::size_t i = 0; i < h; ++i) {
                         var += (row[i] - mean) * (row[i] - mean);
                       }
                       var /= hn;
                       const double inv = 1.0 / std::sqrt(var + eps);

                       if (gain->requires_grad() || bias->requires_grad()) {
                         double* gg = gain->grad().data();
                         double* gb = bias->grad().data();
                         for (std::size_t i = 0; i < h; ++i) {
                           gg[i] += grow[i] * (row[i] - mean) * inv;
                           gb[i] += grow[i];
                         }
                       }
                       if (x->requires_grad()) {
                         double* gx = x->grad().data();
                         double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                         for (std::size_t i = 0; i < h; ++i) {
                           const double dxh = grow[i] * gv[i];
                           const double xh = (row[i] - mean) * inv;
                           sum_dxh += dxh;
                           sum_dxh_xh += dxh * xh;
                         }
                         for (std::size_t i = 0; i < h; ++i) {
                           const double dxh = grow[i] * gv[i];
                           const double xh = (row[i] - mean) * inv;
                           gx[r * h + i] +=
                               inv * (dxh - sum_dxh / hn - xh * sum_dxh_xh / hn);
                         }
                       }
                     }
                   });
}

TensorPtr gelu(const TensorPtr& x) {
  std::vector<double> out(x->size());
  const double* xv = x->values().data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * kInvSqrt2));
  }
  return make_node(x->shape(), std::move(out), {x}, [x](Tensor& self) {
    const double* g = self.grad().data();
    const double* xv = x->values().data();
    double* gx = x->grad().data();
    for (std::size_t i = 0; i < self.size(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(xv[i] * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xv[i] * xv[i]);
      gx[i] += g[i] * (cdf + xv[i] * pdf);
    }
  });
}

TensorPtr embedding_lookup(const TensorPtr& table, const std::vector<int>& ids) {
  require_2d(table, "embedding_lookup");
  const std::size_t v = table->dim(0), h = table->dim(1);
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw DataError(ErrorCode::kIdRange,
                      "embedding id " + std::to_string(id) + " outside [0, " +
                          std::to_string(v) + ")");
    }
  }
  std::vector<double> out(ids.size() * h);
  const double* tv = table->values().data();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const double* src = tv + static_cast<std::size_t>(ids[r]) * h;
    std::copy(src, src + h, out.data() + r * h);
  }
  return make_node({ids.size(), h}, std::move(out), {table}, [table, ids, h](Tensor& self) {
    const double* g = self.grad().data();
    double* gt = table->grad().data();
    for (std::size_t r = 0; r < ids.size(); ++r) {
      double* dst = gt + static_cast<std::size_t>(ids[r]) * h;
      const double* src = g + r * h;
      for (std::size_t i = 0; i < h; ++i) dst[i] += src[i];
    }
  });
}

TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& targets) {
  const std::size_t rows = logits->rank() == 1 ? 1 : logits->dim(0);
  const std::size_t v = logits->rank() == 1 ? logits->dim(0) : logits->dim(1);
  if (logits->rank() > 2) {
    throw NumericError(ErrorCode::kShapeMismatch,
                       "cross_entropy needs 1-D or 2-D logits");
  }
  if (targets.size() != rows) {
    throw NumericError(ErrorCode::kShapeMismatch,
                       "cross_entropy: " + std::to_string(targets.size()) +
                           " targets for " + std::to_string(rows) + " rows");
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= v) {
      throw DataError(ErrorCode::kIdRange, "cross_entropy target " + std::to_string(t) +
                                               " outside [0, " + std::to_string(v) + ")");
    }
  }
  const double* xv = logits->values().data();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv + r * v;
    double max = row[0];
    for (std::size_t j = 1; j < v; ++j) max = std::max(max, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < v; ++j) denom += std::exp(row[j] - max);
    const double lse = max + std::log(denom);
    total += lse - row[static_cast<std::size_t>(targets[r])];
  }
  const double mean = total / static_cast<double>(rows);
  return make_node({1}, {mean}, {logits}, [logits, targets, rows, v](Tensor& self) {
    const double upstream = self.grad()[0] / static_cast<double>(rows);
    const double* xv = logits->values().data();
    double* gx = logits->grad().data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = xv + r * v;
      double max = row[0];
      for (std::size_t j = 1; j < v; ++j) max = std::max(max, row[j]);
      double denom = 0.0;
      for (std::size_t j = 0; j < v; ++j) denom += std::exp(row[j] - max);
      for (std::size_t j = 0; j < v; ++j) {
        const double p = std::exp(row[j] - max) / denom;
        gx[r * v + j] += upstream * (p - (static_cast<std::size_t>(targets[r]) == j));
      }
    }
  });
}

TensorPtr masked_cross_entropy(const TensorPtr& logits, const TensorPtr& additive_mask,
                               int target) {
  if (logits->rank() != 1 || (additive_mask && additive_mask->shape() != logits->shape())) {
    throw NumericError(ErrorCode::kShapeMismatch, "masked_cross_entropy needs matching 1-D shapes");
  }
  const std::size_t k = logits->size();
  if (target < 0 || static_cast<std::size_t>(target) >= k) {
    throw DataError(ErrorCode::kIdRange, "target " + std::to_string(target) + " out of range");
  }
  const double* xv = logits->values().data();
  const double* mv = additive_mask ? additive_mask->values().data() : nullptr;
  if (mv && mv[target] <= kBlocked) {
    throw NumericError(ErrorCode::kLabelMasked,
                       "target " + std::to_string(target) + " sits on a blocked slot");
  }
  double max = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t j = 0; j < k; ++j) {
    if (mv && mv[j] <= kBlocked) continue;
    const double z = xv[j] + (mv ? mv[j] : 0.0);
    if (!any || z > max) max = z;
    any = true;
  }
  if (!any) throw NumericError(ErrorCode::kFullyMaskedRow, "every slot is blocked");
  double denom = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (mv && mv[j] <= kBlocked) continue;
    denom += std::exp(xv[j] + (mv ? mv[j] : 0.0) - max);
  }
  const double lse = max + std::log(denom);
  const double loss = lse - (xv[target] + (mv ? mv[target] : 0.0));
  TensorPtr mask_keep = additive_mask;  // keep alive for the closure
  return make_node({1}, {loss}, {logits}, [logits, mask_keep, target, k](Tensor& self) {
    const double upstream = self.grad()[0];
    const double* xv = logits->values().data();
    const double* mv = mask_keep ? mask_keep->values().data() : nullptr;
    double* gx = logits->grad().data();
    double max = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < k; ++j) {
      if (mv && mv[j] <= kBlocked) continue;
      const double z = xv[j] + (mv ? mv[j] : 0.0);
      if (!any || z > max) max = z;
      any = true;
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (mv && mv[j] <= kBlocked) continue;
      denom += std::exp(xv[j] + (mv ? mv[j] : 0.0) - max);
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (mv && mv[j] <= kBlocked) continue;
      const double p = std::exp(xv[j] + (mv ? mv[j] : 0.0) - max) / denom;
      gx[j] += upstream * (p - (static_cast<std::size_t>(target) == j));
    }
  });
}

TensorPtr gather_rows(const TensorPtr& x, const std::vector<int>& rows) {
  require_2d(x, "gather_rows");
  const std::size_t n = x->dim(1), m = x->dim(0);
  std::vector<double> out(rows.size() * n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || static_cast<std::size_t>(rows[r]) >= m) {
      throw NumericError(ErrorCode::kShapeMismatch,
                         "gather_rows index " + std::to_string(rows[r]) + " out of range");
    }
    const double* src = x->values().data() + static_cast<std::size_t>(rows[r]) * n;
    std::copy(src, src + n, out.data() + r * n);
  }
  return make_node({rows.size(), n}, std::move(out), {x}, [x, rows, n](Tensor& self) {
    const double* g = self.grad().data();
    double* gx = x->grad().data();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double* dst = gx + static_cast<std::size_t>(rows[r]) * n;
      for (std::size_t i = 0; i < n; ++i) dst[i] += g[r * n + i];
    }
  });
}

TensorPtr gather_values(const TensorPtr& x, const std::vector<std::pair<int, int>>& at) {
  require_2d(x, "gather_values");
  const std::size_t m = x->dim(0), n = x->dim(1);
  std::vector<double> out(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    const auto [r, c] = at[i];
    if (r < 0 || static_cast<std::size_t>(r) >= m || c < 0 ||
        static_cast<std::size_t>(c) >= n) {
      throw NumericError(ErrorCode::kShapeMismatch, "gather_values index out of range");
    }
    out[i] = x->values()[static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c)];
  }
  return make_node({at.size()}, std::move(out), {x}, [x, at, n](Tensor& self) {
    const double* g = self.grad().data();
    double* gx = x->grad().data();
    for (std::size_t i = 0; i < at.size(); ++i) {
      gx[static_cast<std::size_t>(at[i].first) * n +
         static_cast<std::size_t>(at[i].second)] += g[i];
    }
  });
}

TensorPtr block(const TensorPtr& x, std::size_t r0, std::size_t rows, std::size_t c0,
                std::size_t cols) {
  require_2d(x, "block");
  const std::size_t m = x->dim(0), n = x->dim(1);
  if (r0 + rows > m || c0 + cols > n) {
    throw NumericError(ErrorCode::kShapeMismatch, "block exceeds tensor bounds");
  }
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = x->values().data() + (r0 + r) * n + c0;
    std::copy(src, src + cols, out.data() + r * cols);
  }
  return make_node({rows, cols}, std::move(out), {x},
                   [x, r0, c0, rows, cols, n](Tensor& self) {
                     const double* g = self.grad().data();
                     double* gx = x->grad().data();
                     for (std::size_t r = 0; r < rows; ++r) {
                       double* dst = gx + (r0 + r) * n + c0;
                       for (std::size_t c = 0; c < cols; ++c) dst[c] += g[r * cols + c];
                     }
                   });
}

TensorPtr concat_rows(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw NumericError(ErrorCode::kShapeMismatch, "concat_rows of nothing");
  const std::size_t n = parts[0]->rank() == 2 ? parts[0]->dim(1) : parts[0]->dim(0);
  std::size_t total = 0;
  for (const TensorPtr& p : parts) {
    const std::size_t cols = p->rank() == 2 ? p->dim(1) : p->dim(0);
    const std::size_t rows = p->rank() == 2 ? p->dim(0) : 1;
    if (cols != n) shape_error("concat_rows", parts[0], p);
    total += rows;
  }
  std::vector<double> out;
  out.reserve(total * n);
  for (const TensorPtr& p : parts) {
    out.insert(out.end(), p->values().begin(), p->values().end());
  }
  return make_node({total, n}, std::move(out), parts, [parts](Tensor& self) {
    const double* g = self.grad().data();
    std::size_t offset = 0;
    for (const TensorPtr& p : parts) {
      if (p->requires_grad()) {
        double* gp = p->grad().data();
        for (std::size_t i = 0; i < p->size(); ++i) gp[i] += g[offset + i];
      }
      offset += p->size();
    }
  });
}

TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw NumericError(ErrorCode::kShapeMismatch, "concat_cols of nothing");
  require_2d(parts[0], "concat_cols");
  const std::size_t m = parts[0]->dim(0);
  std::size_t total = 0;
  for (const TensorPtr& p : parts) {
    require_2d(p, "concat_cols");
    if (p->dim(0) != m) shape_error("concat_cols", parts[0], p);
    total += p->dim(1);
  }
  std::vector<double> out(m * total);
  std::size_t col_off = 0;
  for (const TensorPtr& p : parts) {
    const std::size_t cols = p->dim(1);
    for (std::size_t r = 0; r < m; ++r) {
      std::copy(p->values().data() + r * cols, p->values().data() + (r + 1) * cols,
                out.data() + r * total + col_off);
    }
    col_off += cols;
  }
  return make_node({m, total}, std::move(out), parts, [parts, m, total](Tensor& self) {
    const double* g = self.grad().data();
    std::size_t col_off = 0;
    for (const TensorPtr& p : parts) {
      const std::size_t cols = p->dim(1);
      if (p->requires_grad()) {
        double* gp = p->grad().data();
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            gp[r * cols + c] += g[r * total + col_off + c];
          }
        }
      }
      col_off += cols;
    }
  });
}

TensorPtr stack_rows(const std::vector<TensorPtr>& rows) {
  if (rows.empty()) throw NumericError(ErrorCode::kShapeMismatch, "stack_rows of nothing");
  const std::size_t n = rows[0]->size();
  for (const TensorPtr& r : rows) {
    if (r->rank() != 1 || r->size() != n) shape_error("stack_rows", rows[0], r);
  }
  std::vector<double> out;
  out.reserve(rows.size() * n);
  for (const TensorPtr& r : rows) {
    out.insert(out.end(), r->values().begin(), r->values().end());
  }
  return make_node({rows.size(), n}, std::move(out), rows, [rows, n](Tensor& self) {
    const double* g = self.grad().data();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r]->requires_grad()) {
        double* gp = rows[r]->grad().data();
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[r * n + i];
      }
    }
  });
}

TensorPtr concat_vec(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw NumericError(ErrorCode::kShapeMismatch, "concat_vec of nothing");
  std::vector<double> out;
  for (const TensorPtr& p : parts) {
    if (p->rank() != 1) {
      throw NumericError(ErrorCode::kShapeMismatch, "concat_vec needs 1-D parts");
    }
    out.insert(out.end(), p->values().begin(), p->values().end());
  }
  const std::size_t total = out.size();
  return make_node({total}, std::move(out), parts, [parts](Tensor& self) {
    const double* g = self.grad().data();
    std::size_t offset = 0;
    for (const TensorPtr& p : parts) {
      if (p->requires_grad()) {
        double* gp = p->grad().data();
        for (std::size_t i = 0; i < p->size(); ++i) gp[i] += g[offset + i];
      }
      offset += p->size();
    }
  });
}

TensorPtr sum(const TensorPtr& x) {
  double total = 0.0;
  for (double v : x->values()) total += v;
  return make_node({1}, {total}, {x}, [x](Tensor& self) {
    const double g = self.grad()[0];
    double* gx = x->grad().data();
    for (std::size_t i = 0; i < x->size(); ++i) gx[i] += g;
  });
}

}  // namespace unimc::ops

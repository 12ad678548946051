#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "unimc/tensor.hpp"

namespace unimc::ops {

// C[m,n] = A[m,k] * B[k,n]
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
// C[m,n] = A[m,k] * B[n,k]^T
TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b);

// Elementwise sum; b may also be a suffix-shape of a (row-broadcast) or a
// scalar.
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& a, double factor);

// Softmax along `axis`. additive_mask, when non-null, must have the same
// shape; entries at or below the most negative finite double mark blocked
// slots, which come out exactly 0 and receive no gradient. A row with every
// slot blocked is an error.
TensorPtr masked_softmax(const TensorPtr& x, const TensorPtr& additive_mask,
                         std::size_t axis);
TensorPtr softmax(const TensorPtr& x, std::size_t axis);

// Layer normalization over the last axis; gain and bias have that axis's
// extent.
TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain, const TensorPtr& bias,
                     double eps = 1e-5);

TensorPtr gelu(const TensorPtr& x);

// Gathers rows of table [V,H] -> [ids.size(), H]; gradient scatter-adds.
TensorPtr embedding_lookup(const TensorPtr& table, const std::vector<int>& ids);

// Mean of -log softmax(row)[target] over rows. logits is [N,V] (or [V] with
// a single target). Stable log-sum-exp evaluation.
TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& targets);

// -log of masked_softmax(logits + additive_mask)[target], logits 1-D. The
// target slot must not be blocked.
TensorPtr masked_cross_entropy(const TensorPtr& logits, const TensorPtr& additive_mask,
                               int target);

// Copies rows of a 2-D tensor.
TensorPtr gather_rows(const TensorPtr& x, const std::vector<int>& rows);
// Copies single entries (row, col) of a 2-D tensor into a vector.
TensorPtr gather_values(const TensorPtr& x, const std::vector<std::pair<int, int>>& at);

// Copies the block [r0, r0+rows) x [c0, c0+cols) of a 2-D tensor.
TensorPtr block(const TensorPtr& x, std::size_t r0, std::size_t rows, std::size_t c0,
                std::size_t cols);

// Vertical / horizontal concatenation of 2-D tensors.
TensorPtr concat_rows(const std::vector<TensorPtr>& parts);
TensorPtr concat_cols(const std::vector<TensorPtr>& parts);

// Stacks 1-D tensors of equal length into a matrix, one per row.
TensorPtr stack_rows(const std::vector<TensorPtr>& rows);

// Concatenates 1-D tensors end to end.
TensorPtr concat_vec(const std::vector<TensorPtr>& parts);

TensorPtr sum(const TensorPtr& x);  // scalar sum of all entries
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);  // elementwise, same shape

}  // namespace unimc::ops

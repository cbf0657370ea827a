#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scott/tensor.hpp"

// Differentiable tensor operations. Every op records itself on the active
// Tape<T> when one of its inputs requires grad. Shapes are checked eagerly and
// mismatches throw DimensionError.

namespace scott::ops {

// ---- linear algebra -------------------------------------------------------

/// [m×k] · [k×n] → [m×n].
template <Real T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// x[..., k] · w[k×n] (+ bias[n]) → [..., n]. `bias` may be undefined.
template <Real T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

// ---- elementwise ----------------------------------------------------------

/// a + b. `b` may have the same shape as `a` or a suffix of it (broadcast over leading axes).
template <Real T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// a - b, same shapes.
template <Real T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

/// a ⊙ b with the same broadcasting rule as add.
template <Real T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <Real T>
Tensor<T> scale(const Tensor<T>& a, T factor);

template <Real T>
Tensor<T> relu(const Tensor<T>& x);

/// Exact (erf) GELU.
template <Real T>
Tensor<T> gelu(const Tensor<T>& x);

template <Real T>
Tensor<T> silu(const Tensor<T>& x);

// ---- reductions -------------------------------------------------------------

template <Real T>
Tensor<T> sum(const Tensor<T>& x);

template <Real T>
Tensor<T> mean(const Tensor<T>& x);

/// Population variance over all elements.
template <Real T>
Tensor<T> variance(const Tensor<T>& x);

/// Mean along `axis`, which is removed from the shape.
template <Real T>
Tensor<T> mean_axis(const Tensor<T>& x, std::int64_t axis);

// ---- shape ----------------------------------------------------------------

template <Real T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// General axis permutation: out.shape[i] = x.shape[axes[i]].
template <Real T>
Tensor<T> permute(const Tensor<T>& x, std::vector<std::int64_t> axes);

/// Swap the last two axes.
template <Real T>
Tensor<T> transpose(const Tensor<T>& x);

template <Real T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::int64_t axis);

/// Elements [start, stop) along `axis`.
template <Real T>
Tensor<T> slice(const Tensor<T>& x, std::int64_t axis, std::int64_t start, std::int64_t stop);

/// Rows of a [R×...] tensor picked by index (repeats allowed).
template <Real T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::int64_t> rows);

// ---- normalisation / attention --------------------------------------------

/// Softmax over the last axis, max-shifted.
template <Real T>
Tensor<T> softmax(const Tensor<T>& x);

/// Per-row normalisation over the last axis; gamma/beta may be undefined
/// (affine-free form).
template <Real T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-6));

/// Multi-head scaled dot-product attention on already-projected inputs.
/// q[B×Nq×d], k/v[B×Nk×d] → [B×Nq×d], heads split the last axis evenly.
template <Real T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    std::int64_t heads);

/// Rows whose `active` flag is 0 are replaced by `fill`; others pass through.
/// tokens[B×N×d] (or [N×d]), active has B·N entries, fill[d].
template <Real T>
Tensor<T> substitute_rows(const Tensor<T>& tokens, std::span<const std::uint8_t> active,
                          const Tensor<T>& fill);

// ---- losses ---------------------------------------------------------------

/// Mean Smooth-L1 between pred and target; no gradient flows into target.
template <Real T>
Tensor<T> smooth_l1(const Tensor<T>& pred, const Tensor<T>& target, T beta = T(1));

/// Mean softmax cross-entropy of logits[B×C] against integer labels.
template <Real T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::int64_t> labels);

}  // namespace scott::ops

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tamplan/grad/tape.hpp"

// Differentiable ops over Tape values. Shapes are explicit: the only
// broadcasting is the row-wise bias forms (add_rowwise / mul_rowwise).
// Mismatched shapes throw DimensionError naming the op and both shapes.
namespace tamplan::grad {

Var matmul(Var a, Var b);     // (m x k) . (k x n)
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);        // elementwise
Var add_rowwise(Var x, Var bias);   // (m x n) + (n)
Var mul_rowwise(Var x, Var gain);   // (m x n) * (n)
Var scale(Var x, double factor);
Var negate(Var x);

Var relu(Var x);
Var sigmoid(Var x);
Var softplus(Var x);
Var log(Var x);
Var exp(Var x);
Var square(Var x);

Var sum(Var x);               // -> scalar
Var mean(Var x);              // -> scalar
Var dot(Var a, Var b);        // full contraction of equal shapes -> scalar

/// Max-subtracted softmax. Rank-2 tensors reduce along `axis` (0 or 1).
Var softmax(Var x, std::size_t axis = 1);
Var log_softmax(Var x);       // along the last axis
/// Per-row normalisation to zero mean / unit variance, no affine part.
Var layer_norm(Var x, double eps = 1e-10);
Var l2_normalize_rows(Var x);

Var concat(std::span<const Var> parts, std::size_t axis);
Var embedding(Var table, std::span<const std::size_t> ids);   // (V x d) -> (n x d)
Var transpose(Var x);
Var reshape(Var x, Shape shape);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
/// out[i] = x[i, index[i]].
Var pick(Var x, std::span<const std::size_t> index);

/// Mean binary cross-entropy between sigmoid(logits) and {0,1} targets.
Var bce_with_logits(Var logits, std::span<const double> targets);

}  // namespace tamplan::grad

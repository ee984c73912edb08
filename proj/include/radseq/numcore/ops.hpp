#pragma once

#include "radseq/numcore/graph.hpp"

#include <span>
#include <vector>

namespace radseq::num {

// All ops view their inputs as row-major matrices (see Shape::rows/cols) and
// throw ShapeError naming both shapes on a mismatch.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a + bias, with a 1 x cols bias broadcast over rows.
Var add_row(Var a, Var bias);
Var scale(Var a, Real s);
/// Elementwise product with a constant (e.g. a 0/1 mask).
Var mul_const(Var a, const Matrix& c);

Var sigmoid(Var a);
Var tanh(Var a);

/// axis 1: each row sums to one; axis 0: each column sums to one.
Var softmax(Var a, int axis = 1);
/// Row softmax where mask(i, j) == 0 forces exactly zero probability.
Var masked_softmax(Var a, const Matrix& mask);
Var log_softmax(Var a);

/// axis 0 stacks rows, axis 1 stacks columns.
Var concat(std::span<const Var> parts, int axis);
Var slice(Var a, int axis, std::size_t begin, std::size_t count);
Var reshape(Var a, Shape shape);

/// out.row(i) = a.row(indices[i]); gradients scatter-add back.
Var gather_rows(Var a, std::span<const int> indices);
/// Row lookup into an embedding table; index range is checked.
Var embed(Var table, std::span<const int> indices);
/// (B x n) -> (B*times x n); row b*times + i copies row b.
Var repeat_rows(Var a, std::size_t times);
/// out(b) = sum_i weights(b, i) * values.row(b*L + i) for weights B x L.
Var weighted_sum(Var weights, Var values);
/// out(b, 0) = a(b, indices[b]).
Var pick(Var a, std::span<const int> indices);
Var sum(Var a);

/// Single-channel 1-D cross-correlation with "same" zero padding and no bias.
/// x: B x L, kernel: k x F (k odd) -> (B*L) x F.
Var conv1d(Var x, Var kernel);

/// Max over adjacent groups of `pool` columns: r x c -> r x (c / pool).
Var maxout(Var a, std::size_t pool = 2);

}  // namespace radseq::num

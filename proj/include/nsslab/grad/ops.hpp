#pragma once

#include <span>

#include "nsslab/grad/tape.hpp"

namespace nsslab::grad {

/// Matrix product. A rank-1 right operand is treated as a column vector
/// and yields a rank-1 result (matrix-vector product).
Var matmul(Var a, Var b);
Var matvec(Var a, Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

/// `s * a` for a single-element tensor `s`.
Var scale(Var s, Var a);
Var scale(Var a, double c);

Var sigmoid(Var a);
/// Exact (erf-based) GELU.
Var gelu(Var a);
Var exp(Var a);

enum class Padding { kZero, kReplicateFirst };

struct Conv1dOptions {
  /// Number of interleaved sequences: columns are ordered time-major, so
  /// column `k * batch + b` holds step k of sequence b.
  Index batch = 1;
  Padding padding = Padding::kZero;
  Index max_kernel = 1024;
};

/// Causal 1-D convolution with a left pad of width tau-1.
///
/// input [C_in x L*batch], kernel [C_out x C_in x tau], bias [C_out].
/// Output step k only sees input steps max(0, k-tau+1)..k.
Var conv1d_causal(Var input, Var kernel, Var bias, const Conv1dOptions& options = {});

/// Mean of squared differences over all entries.
Var mse(Var a, Var b);

Var slice_cols(Var a, Index begin, Index count);
Var concat_cols(std::span<const Var> parts);
/// Repeats the rank-1 `v` [C] as `count` columns: [C x count].
Var broadcast_cols(Var v, Index count);

/// Solves `m * X = rhs` (m square, LU with partial pivoting).
Var solve(Var m, Var rhs);

}  // namespace nsslab::grad

#pragma once

#include <vector>

#include "uranker/autograd.hpp"

namespace uranker::ag {

// Elementwise, shapes must match exactly.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double k);
Var add_scalar(const Var& a, double k);
/// `s` holds a single element that multiplies every entry of `x`.
Var mul_scalar(const Var& s, const Var& x);

Var relu(const Var& x);
Var elu(const Var& x, double alpha = 1.0);
Var gelu(const Var& x);
Var sigmoid(const Var& x);
/// Gradient passes only where lo < x < hi.
Var clamp(const Var& x, double lo, double hi);

// Reductions to a one-element tensor.
Var sum(const Var& x);
Var mean(const Var& x);
Var mean_abs_diff(const Var& a, const Var& b);

// Matrix ops on rank-2 values.
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);
Var transpose(const Var& x);
/// x[N×in]·Wᵀ + b with W[out×in]; `bias` may be undefined.
Var linear(const Var& x, const Var& weight, const Var& bias);
Var add_row_vector(const Var& x, const Var& v);
/// Per-column scale and shift of x[N×C] (gamma, beta have C entries).
Var affine_cols(const Var& x, const Var& gamma, const Var& beta);
/// Per-row scale and shift; x is viewed as [dim0 × rest].
Var affine_rows(const Var& x, const Var& gamma, const Var& beta);
Var softmax_rows(const Var& x);
/// Each row of x (viewed as [dim0 × rest]) to zero mean, unit variance.
Var normalize_rows(const Var& x, double eps);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-6);
/// x is C×H×W; statistics per channel over the spatial extent.
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// Shape manipulation.
Var reshape(const Var& x, Shape shape);
/// Concatenation / slicing along dimension 0 of any-rank values.
Var concat0(const std::vector<Var>& parts);
Var slice0(const Var& x, Index begin, Index end);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& x, Index begin, Index end);

// Spatial ops on C×H×W values.
/// weight is [out × in/groups × k × k]; bias may be undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias, Index stride, Index pad, Index groups = 1);
Var bilinear_resize(const Var& x, Index out_h, Index out_w);

}  // namespace uranker::ag

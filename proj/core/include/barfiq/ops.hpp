#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "barfiq/autodiff.hpp"

// Differentiable operations on 2-D Vars. Row vectors are 1×n, column vectors
// n×1. Broadcasting is limited to the row/column forms named below.
namespace barfiq::ops {

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
// s is 1×1.
Var scale_by(const Var& a, const Var& s);

// r is 1×cols, broadcast over rows.
Var add_row(const Var& a, const Var& r);
Var mul_row(const Var& a, const Var& r);
// c is rows×1, broadcast over columns.
Var mul_col(const Var& a, const Var& c);
Var div_col(const Var& a, const Var& c);

// Affine map x W + b with b broadcast over rows.
Var linear(const Var& x, const Var& w, const Var& b);

Var sum_all(const Var& a);
Var sum_cols(const Var& a);   // rows×1: sum across each row
Var mean_rows(const Var& a);  // 1×cols: average over rows
Var mean_cols(const Var& a);  // rows×1: average across each row
Var max_cols(const Var& a);   // rows×1: maximum across each row

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, std::size_t begin, std::size_t count);
Var column(const Var& a, std::size_t j);
Var gather_rows(const Var& a, std::span<const std::size_t> idx);
// Inverse of gather_rows: rows of `a` are added at `idx` in an n×cols zero matrix.
Var scatter_rows(const Var& a, std::span<const std::size_t> idx, std::size_t n);

Var sigmoid(const Var& a);
Var silu(const Var& a);
Var relu(const Var& a);
Var gelu(const Var& a);  // exact erf form
Var elu_plus_one(const Var& a);
Var square(const Var& a);

Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps);
// Each row scaled to x / (||x||_2 + eps).
Var row_normalize(const Var& x, double eps);
Var row_norm(const Var& x);  // rows×1 Euclidean norms

/// Rotary position encoding: row i is rotated pairwise by positions[i]·θ_m,
/// θ_m = base^(-2m/d). Throws ConfigError on odd width.
Var rope_rows(const Var& x, std::span<const std::size_t> positions, double base);

/// Depthwise 1-D temporal convolution with zero "same" padding. x is T×c,
/// w is c×k with odd k; out[t][ch] = Σ_j w[ch][j] · x[t + j - k/2][ch].
Var conv1d_depthwise(const Var& x, const Var& w);

/// Keeps the k largest entries of each row of a probability matrix (ties go
/// to the lower index), renormalizes them as p / (Σ_kept p + eps), and zeros
/// the rest. `selected` receives the kept column indices per row.
Var topk_renormalize(const Var& p, std::size_t k, double eps,
                     std::vector<std::vector<std::size_t>>* selected = nullptr);

/// Per-column standardization over the row (token) axis using the batch's
/// own population statistics.
Var standardize_cols(const Var& x, double eps);

/// Inverted dropout; identity when rate == 0.
Var dropout(const Var& x, double rate, std::mt19937_64& rng);

}  // namespace barfiq::ops

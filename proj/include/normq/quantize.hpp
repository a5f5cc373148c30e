// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "normq/hmm.hpp"
#include "normq/matrix.hpp"

namespace normq {

enum class QuantScheme : std::uint8_t { LinearFixed = 1, NormQ = 2, KMeans = 3 };

const char* scheme_name(QuantScheme scheme);
std::optional<QuantScheme> scheme_from_name(std::string_view name);

struct QuantEntry {
    std::uint32_t col = 0;
    std::uint32_t level = 0;  // nonzero, fits in bit_width bits

    bool operator==(const QuantEntry&) const = default;
};

/// Sparse bit-width-b representation of a matrix: per row, the (column,
/// level) pairs with nonzero level, columns strictly increasing. Level-0
/// entries are never stored; what an omitted entry reconstructs to depends
/// on the scheme (0 for linear-fixed, the epsilon floor for norm-q,
/// codebook[0] for kmeans). Only kmeans needs a codebook; linear-fixed and
/// norm-q reconstruct from levels, shape and epsilon alone.
struct QuantizedMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    int bit_width = 0;
    QuantScheme scheme = QuantScheme::LinearFixed;
    double epsilon = 1e-12;
    std::vector<std::vector<QuantEntry>> row_entries;
    std::vector<double> codebook;  // kmeans only, sorted ascending

    std::size_t total_entries() const { return rows * cols; }
    std::size_t stored_entries() const;
};

/// Zero out the smallest floor(ratio * total) entries by magnitude, under a
/// single threshold across the whole matrix. With renormalize, every row is
/// pushed through normalize_rows afterwards so no all-zero row survives;
/// without it, emptied rows are left for validate_model to flag.
Matrix prune_ratio(const Matrix& matrix, double ratio, bool renormalize, double epsilon);

/// p -> level clip(round(p * (2^b - 1)), 0, 2^b - 1); an omitted (level 0)
/// entry dequantizes to 0 and k dequantizes to k / 2^b. Ties round half away
/// from zero. Entries rounding to level 0 are the scheme's auto-pruning.
QuantizedMatrix quantize_linear_fixed(const Matrix& matrix, int bit_width);

/// Same stored form as quantize_linear_fixed; the row normalization happens
/// entirely at dequantization time, so nothing beyond the levels, the shape
/// and scalar epsilon is kept.
QuantizedMatrix norm_q(const Matrix& matrix, int bit_width, double epsilon = 1e-12);

/// Weighted 1-D Lloyd iteration over the multiset of matrix values with up
/// to 2^b centroids (fewer when the matrix has fewer distinct values, which
/// then represents it exactly). Centroids initialize at weighted quantiles,
/// so the run is deterministic; the seed parameter is reserved for future
/// randomized initializations. Ties in assignment go to the lower centroid.
/// distortion_trace, when given, receives the weighted squared error after
/// every Lloyd update.
QuantizedMatrix kmeans_quantize(const Matrix& matrix, int bit_width, std::size_t max_iters,
                                std::uint64_t seed, std::vector<double>* distortion_trace = nullptr);

Matrix dequantize(const QuantizedMatrix& q);

/// (v + epsilon) / row_sum(v + epsilon) per row, followed by one exact
/// renormalization divide so the row-sum invariant is assertable at 1e-12.
/// An all-zero row with epsilon 0 falls back to uniform.
Matrix normalize_rows(const Matrix& matrix, double epsilon);

struct LayerwiseQuantized {
    std::vector<std::int64_t> values;
    double scale = 1.0;  // dequantization divides by this
};

/// Symmetric integer quantization of one value vector: scale = (2^b - 1) /
/// max |v|, zero point 0. All-zero input keeps scale 1 (identity mapping).
LayerwiseQuantized layerwise_int_quantize(std::span<const double> values, int bit_width);
std::vector<double> layerwise_dequantize(const LayerwiseQuantized& q);

struct RowKl {
    std::vector<double> per_row;
    double mean = 0.0;
};

/// D_KL(P_row || Q_row) with Q floored at epsilon; rows of P must be
/// stochastic. Results are clamped at 0 to absorb floating-point residue.
RowKl kl_divergence_rows(const Matrix& p, const Matrix& q, double epsilon = 1e-12);

struct SparsityReport {
    std::size_t total_entries = 0;
    std::size_t zero_entries = 0;
    double sparsity = 0.0;
};

SparsityReport sparsity(const Matrix& matrix);
/// For quantized matrices zeros are simply total - stored: sparsity is
/// measured on stored levels, before any reconstruction.
SparsityReport sparsity(const QuantizedMatrix& q);

/// The model triple in quantized form; initial is kept as a 1 x hidden row.
struct QuantizedModel {
    QuantizedMatrix initial;
    QuantizedMatrix transition;
    QuantizedMatrix emission;
};

QuantizedModel quantize_model(const HmmModel& model, QuantScheme scheme, int bit_width,
                              double epsilon, std::size_t kmeans_max_iters = 100,
                              std::uint64_t seed = 0);
HmmModel dequantize_model(const QuantizedModel& qm);

/// Weighted squared reconstruction error of a quantized matrix against the
/// original values it was built from.
double reconstruction_distortion(const Matrix& original, const QuantizedMatrix& q);

}  // namespace normq

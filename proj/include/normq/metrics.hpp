// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "normq/quantize.hpp"
#include "normq/train.hpp"

namespace normq {

struct MatrixCompression {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    double sparsity = 0.0;
    int bit_width = 32;
    double paper_rate = 0.0;  // 1 - nonzero_fraction * b / 32
};

/// Compression rates in two honesties: paper_rate counts value bits against
/// FP32 and ignores index storage (the convention behind the headline
/// percentages); storage_rate counts every byte the serialized form takes.
struct CompressionReport {
    std::vector<MatrixCompression> matrices;
    int bit_width = 32;
    double paper_rate = 0.0;    // aggregated by entry count
    double storage_rate = 0.0;  // 1 - serialized_bits / (total_entries * 32)
    bool has_storage_rate = false;
};

/// Paper-style rates from sparsity fractions and shapes alone.
CompressionReport compression_rate(std::span<const double> sparsities,
                                   std::span<const std::pair<std::size_t, std::size_t>> shapes,
                                   int bit_width,
                                   std::span<const std::string> names = {});

/// Both rate styles for an actual quantized model; storage bits come from
/// the serialized size formula, which tests pin to the real file size.
CompressionReport compression_report(const QuantizedModel& qm);

struct SparsitySweepRow {
    int bit_width = 0;
    double initial_sparsity = 0.0;
    double transition_sparsity = 0.0;
    double emission_sparsity = 0.0;
};

/// Sparsity of each matrix after linear fixed-point quantization, one row
/// per bit width, ordered by descending bit width.
std::vector<SparsitySweepRow> sparsity_sweep(const HmmModel& model, std::vector<int> bit_widths);

struct LldGapReport {
    double upper = 0.0;  // mean of per-cycle maxima
    double lower = 0.0;  // mean LLD right after each quantization event
    double gap = 0.0;
};

/// Distills the oscillating LLD curve of quantization-aware training into
/// its two bounds. Requires at least two quantization events in the record.
LldGapReport lld_gap(const EmRunRecord& record);

struct ComparisonRecord {
    double ref_lld = 0.0;   // held-out mean per sequence
    double cand_lld = 0.0;
    double delta_lld = 0.0;
    std::size_t ref_impossible = 0;
    std::size_t cand_impossible = 0;
    double kl_initial = 0.0;  // mean row KL(reference || candidate)
    double kl_transition = 0.0;
    double kl_emission = 0.0;
    double sparsity_initial = 0.0;  // candidate stored-form sparsity
    double sparsity_transition = 0.0;
    double sparsity_emission = 0.0;
    CompressionReport compression;
};

ComparisonRecord compare_models(const HmmModel& reference, const HmmModel& candidate,
                                const Corpus& heldout);
ComparisonRecord compare_models(const HmmModel& reference, const QuantizedModel& candidate,
                                const Corpus& heldout);

}  // namespace normq

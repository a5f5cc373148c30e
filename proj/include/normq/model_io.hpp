// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <string>
#include <variant>
#include <vector>

#include "normq/hmm.hpp"
#include "normq/metrics.hpp"
#include "normq/quantize.hpp"
#include "normq/train.hpp"

namespace normq {

// Model file layout ("NQHM", version 1, all integers little-endian):
//   magic[4] | u32 version | u32 hidden | u32 vocab | u32 precision | u32 scheme
// precision 0 means dense float64; otherwise it is the bit width b.
// scheme: 0 dense, 1 linear-fixed, 2 norm-q, 3 kmeans.
// Dense payload: float64 initial, transition, emission, row-major.
// Quantized payload, per matrix (initial as 1 x hidden, then transition,
// emission): u64 row offsets (relative to the row-record block), then per
// row u32 count, u32 columns[count], levels bit-packed MSB-first and padded
// to a byte boundary per row; then float64 epsilon; for kmeans a trailing
// u32 codebook size plus float64 centroids.

inline constexpr char kModelMagic[4] = {'N', 'Q', 'H', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

void save_model(const std::string& path, const HmmModel& model);
void save_model(const std::string& path, const QuantizedModel& model);

using LoadedModel = std::variant<HmmModel, QuantizedModel>;
LoadedModel load_model(const std::string& path);

/// Dense view of whatever the file holds (quantized files are reconstructed).
HmmModel load_model_dense(const std::string& path);

/// Exact serialized size in bytes of the formats above; tests assert the
/// written files match these numbers.
std::size_t serialized_size_bytes(const QuantizedModel& model);
std::size_t serialized_size_bytes(const HmmModel& model);

/// Newline-delimited records of space-separated decimal token IDs.
/// vocab_size 0 infers the bound as max ID + 1; a positive bound is
/// enforced with the offending line reported.
Corpus load_corpus(const std::string& path, std::size_t vocab_size = 0,
                   std::size_t num_chunks = 1);
void save_corpus(const std::string& path, const Corpus& corpus);

// CSV emitters. Fixed header rows; doubles print with 17 significant digits
// so identical runs produce byte-identical files.
void write_run_record_csv(const std::string& path, const EmRunRecord& record);
void write_compression_csv(const std::string& path, const CompressionReport& report);
void write_sparsity_sweep_csv(const std::string& path,
                              const std::vector<SparsitySweepRow>& table);
void write_comparison_csv(const std::string& path, const ComparisonRecord& record);

std::string format_double(double value);

}  // namespace normq

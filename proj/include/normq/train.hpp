// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "normq/hmm.hpp"
#include "normq/quantize.hpp"

namespace normq {

struct Corpus {
    std::vector<TokenSequence> sequences;
    std::size_t vocab_size = 0;
    std::size_t num_chunks = 1;

    std::size_t size() const { return sequences.size(); }
    std::size_t total_tokens() const;
    /// Chunks are consecutive, as even as possible, fixed order.
    std::pair<std::size_t, std::size_t> chunk_range(std::size_t chunk) const;
    std::span<const TokenSequence> chunk(std::size_t chunk) const;
};

/// Sample `count` sequences of the given length; one derived seed per
/// sequence so the corpus is stable under parallel generation.
Corpus sample_corpus(const HmmModel& model, std::size_t count, std::size_t length,
                     std::uint64_t seed, std::size_t num_chunks = 1);

enum class Quantizer : std::uint8_t { None = 0, NormQ = 1, KMeans = 2 };

struct EmConfig {
    std::size_t epochs = 1;
    Quantizer quantizer = Quantizer::None;
    int bit_width = 8;
    std::size_t interval = 20;  // EM steps between quantization events
    double epsilon = 1e-12;
    std::uint64_t seed = 0;
    double smoothing = 1e-9;  // added to accumulated counts before the M step
    std::size_t kmeans_max_iters = 100;
};

struct EmStepEntry {
    std::size_t step = 0;   // 1-based
    std::size_t chunk = 0;  // 0-based
    double train_lld_per_token = 0.0;  // under the model entering the step
    std::optional<double> test_lld_per_token;  // under the model leaving the step
    bool quant_event = false;
    // Event steps only: chunk LLD per token just before / after quantization,
    // both under the freshly M-stepped model. These make the quantization dip
    // measurable on one step with one chunk.
    std::optional<double> lld_pre_quant;
    std::optional<double> lld_post_quant;
};

struct EmRunRecord {
    std::vector<EmStepEntry> steps;
};

struct TrainResult {
    HmmModel model;
    EmRunRecord record;
    /// Present after quantization-aware training: the stored form produced by
    /// the final quantization event. `model` equals its dequantization
    /// exactly, so saving this triple loses nothing.
    std::optional<QuantizedModel> quantized;
};

struct EmStepStats {
    double total_loglik = 0.0;  // over sequences with nonzero probability
    std::size_t sequences = 0;
    std::size_t possible = 0;
    std::size_t tokens_possible = 0;

    double lld_per_sequence() const;
    double lld_per_token() const;
};

/// One EM step on a chunk: E accumulates forward/backward statistics, M
/// renormalizes the smoothed counts. The returned stats score the chunk
/// under the *pre-update* model. Throws when every sequence in the chunk is
/// impossible under the model.
std::pair<HmmModel, EmStepStats> em_step(const HmmModel& model,
                                         std::span<const TokenSequence> chunk, double smoothing);

/// Chunk log-likelihood without updating the model.
EmStepStats chunk_loglik(const HmmModel& model, std::span<const TokenSequence> chunk);

struct TestLoglik {
    double mean_per_sequence = 0.0;  // over possible sequences; -inf if none
    double per_token = 0.0;
    std::size_t impossible = 0;
    std::size_t count = 0;
};

/// Held-out evaluation; impossible sequences are counted separately and
/// excluded from the mean.
TestLoglik test_loglik(const HmmModel& model, const Corpus& heldout);

/// Plain Baum-Welch over epochs x chunks steps, fixed chunk rotation.
TrainResult train(const HmmModel& init, const Corpus& corpus, const EmConfig& config,
                  const Corpus* heldout = nullptr);

/// Baum-Welch with fake quantization: after every interval-th M step and
/// after the final step, the three matrices are quantized and immediately
/// reconstructed, and training continues on the reconstructed values.
TrainResult quantization_aware_train(const HmmModel& init, const Corpus& corpus,
                                     const EmConfig& config, const Corpus* heldout = nullptr);

}  // namespace normq

// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "normq/train.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "normq/common.hpp"
#include "normq/parallel.hpp"
#include "normq/rng.hpp"

namespace normq {

namespace {

// Sequences per accumulation block. Fixed (not derived from the worker
// count) so the reduction order, and therefore every bit of the result, is
// identical no matter how many threads NORMQ_THREADS allows.
constexpr std::size_t kEmBlockSize = 32;

struct EmAccumulator {
    std::vector<double> initial_counts;
    Matrix pair_counts;
    Matrix emission_counts;
    double loglik = 0.0;
    std::size_t possible = 0;
    std::size_t tokens_possible = 0;

    explicit EmAccumulator(const HmmModel& model)
        : initial_counts(model.hidden_size, 0.0),
          pair_counts(model.hidden_size, model.hidden_size),
          emission_counts(model.hidden_size, model.vocab_size) {}

    void add_sequence(const HmmModel& model, const TokenSequence& seq) {
        ForwardBackwardStats stats;
        try {
            stats = forward_backward(model, seq);
        } catch (const SequenceImpossibleError&) {
            return;
        }
        for (std::size_t z = 0; z < initial_counts.size(); ++z)
            initial_counts[z] += stats.state_posteriors(0, z);
        for (std::size_t k = 0; k < pair_counts.size(); ++k)
            pair_counts.data()[k] += stats.pair_posteriors.data()[k];
        for (std::size_t k = 0; k < emission_counts.size(); ++k)
            emission_counts.data()[k] += stats.emission_counts.data()[k];
        loglik += stats.log_likelihood;
        ++possible;
        tokens_possible += seq.size();
    }

    void merge(const EmAccumulator& other) {
        for (std::size_t z = 0; z < initial_counts.size(); ++z)
            initial_counts[z] += other.initial_counts[z];
        for (std::size_t k = 0; k < pair_counts.size(); ++k)
            pair_counts.data()[k] += other.pair_counts.data()[k];
        for (std::size_t k = 0; k < emission_counts.size(); ++k)
            emission_counts.data()[k] += other.emission_counts.data()[k];
        loglik += other.loglik;
        possible += other.possible;
        tokens_possible += other.tokens_possible;
    }
};

EmAccumulator accumulate_chunk(const HmmModel& model, std::span<const TokenSequence> chunk) {
    const std::size_t blocks = (chunk.size() + kEmBlockSize - 1) / kEmBlockSize;
    std::vector<std::unique_ptr<EmAccumulator>> partials(blocks);
    parallel_blocks(blocks, [&](std::size_t b) {
        auto acc = std::make_unique<EmAccumulator>(model);
        const std::size_t begin = b * kEmBlockSize;
        const std::size_t end = std::min(begin + kEmBlockSize, chunk.size());
        for (std::size_t s = begin; s < end; ++s) acc->add_sequence(model, chunk[s]);
        partials[b] = std::move(acc);
    });
    EmAccumulator total(model);
    for (auto& p : partials) total.merge(*p);
    return total;
}

}  // namespace

std::size_t Corpus::total_tokens() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.size();
    return n;
}

std::pair<std::size_t, std::size_t> Corpus::chunk_range(std::size_t chunk) const {
    if (num_chunks == 0 || chunk >= num_chunks) throw ConfigError("chunk index out of range");
    if (sequences.size() < num_chunks)
        throw ConfigError("corpus has fewer sequences than chunks");
    const std::size_t base = sequences.size() / num_chunks;
    const std::size_t rem = sequences.size() % num_chunks;
    const std::size_t begin = chunk * base + std::min(chunk, rem);
    const std::size_t size = base + (chunk < rem ? 1 : 0);
    return {begin, begin + size};
}

std::span<const TokenSequence> Corpus::chunk(std::size_t c) const {
    const auto [begin, end] = chunk_range(c);
    return {sequences.data() + begin, end - begin};
}

Corpus sample_corpus(const HmmModel& model, std::size_t count, std::size_t length,
                     std::uint64_t seed, std::size_t num_chunks) {
    Corpus corpus;
    corpus.vocab_size = model.vocab_size;
    corpus.num_chunks = num_chunks;
    corpus.sequences.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        corpus.sequences[i] = sample_sequence(model, length, derive_seed(seed, "corpus", i));
    return corpus;
}

double EmStepStats::lld_per_sequence() const {
    return possible == 0 ? kNegInf : total_loglik / static_cast<double>(possible);
}

double EmStepStats::lld_per_token() const {
    return tokens_possible == 0 ? kNegInf : total_loglik / static_cast<double>(tokens_possible);
}

std::pair<HmmModel, EmStepStats> em_step(const HmmModel& model,
                                         std::span<const TokenSequence> chunk, double smoothing) {
    if (chunk.empty()) throw DomainError("empty chunk");
    EmAccumulator acc = accumulate_chunk(model, chunk);
    if (acc.possible == 0)
        throw Error("model inconsistent with data: every sequence in the chunk is impossible");

    HmmModel updated;
    updated.hidden_size = model.hidden_size;
    updated.vocab_size = model.vocab_size;
    Matrix init(1, model.hidden_size);
    for (std::size_t z = 0; z < model.hidden_size; ++z) init(0, z) = acc.initial_counts[z];
    const Matrix norm_init = normalize_rows(init, smoothing);
    updated.initial.assign(norm_init.row(0).begin(), norm_init.row(0).end());
    updated.transition = normalize_rows(acc.pair_counts, smoothing);
    updated.emission = normalize_rows(acc.emission_counts, smoothing);

    EmStepStats stats;
    stats.total_loglik = acc.loglik;
    stats.sequences = chunk.size();
    stats.possible = acc.possible;
    stats.tokens_possible = acc.tokens_possible;
    return {std::move(updated), stats};
}

EmStepStats chunk_loglik(const HmmModel& model, std::span<const TokenSequence> chunk) {
    const std::size_t blocks = (chunk.size() + kEmBlockSize - 1) / kEmBlockSize;
    struct Partial {
        double loglik = 0.0;
        std::size_t possible = 0;
        std::size_t tokens = 0;
    };
    std::vector<Partial> partials(blocks);
    parallel_blocks(blocks, [&](std::size_t b) {
        const std::size_t begin = b * kEmBlockSize;
        const std::size_t end = std::min(begin + kEmBlockSize, chunk.size());
        for (std::size_t s = begin; s < end; ++s) {
            const double ll = forward_loglik(model, chunk[s]);
            if (ll == kNegInf) continue;
            partials[b].loglik += ll;
            ++partials[b].possible;
            partials[b].tokens += chunk[s].size();
        }
    });
    EmStepStats stats;
    stats.sequences = chunk.size();
    for (const Partial& p : partials) {
        stats.total_loglik += p.loglik;
        stats.possible += p.possible;
        stats.tokens_possible += p.tokens;
    }
    return stats;
}

TestLoglik test_loglik(const HmmModel& model, const Corpus& heldout) {
    const EmStepStats stats =
        chunk_loglik(model, std::span<const TokenSequence>(heldout.sequences));
    TestLoglik result;
    result.count = heldout.sequences.size();
    result.impossible = result.count - stats.possible;
    result.mean_per_sequence = stats.lld_per_sequence();
    result.per_token = stats.lld_per_token();
    return result;
}

namespace {

TrainResult run_em(const HmmModel& init, const Corpus& corpus, const EmConfig& config,
                   const Corpus* heldout, bool quantization_aware) {
    if (corpus.sequences.empty()) throw DomainError("empty corpus");
    if (config.epochs == 0) throw ConfigError("epochs must be positive");
    if (config.interval == 0) throw ConfigError("interval must be positive");
    if (quantization_aware && config.quantizer == Quantizer::None)
        throw ConfigError("quantization-aware training requires a quantizer");
    if (!quantization_aware && config.quantizer != Quantizer::None)
        throw ConfigError("plain training requires quantizer none");

    const QuantScheme scheme =
        config.quantizer == Quantizer::KMeans ? QuantScheme::KMeans : QuantScheme::NormQ;
    const std::size_t total_steps = config.epochs * corpus.num_chunks;

    TrainResult result;
    result.model = init;
    result.record.steps.reserve(total_steps);

    for (std::size_t step = 1; step <= total_steps; ++step) {
        const std::size_t chunk_index = (step - 1) % corpus.num_chunks;
        const auto chunk = corpus.chunk(chunk_index);

        EmStepEntry entry;
        entry.step = step;
        entry.chunk = chunk_index;

        auto [updated, stats] = em_step(result.model, chunk, config.smoothing);
        entry.train_lld_per_token = stats.lld_per_token();
        result.model = std::move(updated);

        const bool event =
            quantization_aware && (step % config.interval == 0 || step == total_steps);
        if (event) {
            entry.quant_event = true;
            entry.lld_pre_quant = chunk_loglik(result.model, chunk).lld_per_token();
            QuantizedModel qm =
                quantize_model(result.model, scheme, config.bit_width, config.epsilon,
                               config.kmeans_max_iters, derive_seed(config.seed, "kmeans", step));
            result.model = dequantize_model(qm);
            entry.lld_post_quant = chunk_loglik(result.model, chunk).lld_per_token();
            if (step == total_steps) result.quantized = std::move(qm);
        }
        if (heldout) entry.test_lld_per_token = test_loglik(result.model, *heldout).per_token;
        result.record.steps.push_back(entry);
    }
    return result;
}

}  // namespace

TrainResult train(const HmmModel& init, const Corpus& corpus, const EmConfig& config,
                  const Corpus* heldout) {
    return run_em(init, corpus, config, heldout, false);
}

TrainResult quantization_aware_train(const HmmModel& init, const Corpus& corpus,
                                     const EmConfig& config, const Corpus* heldout) {
    return run_em(init, corpus, config, heldout, true);
}

}  // namespace normq

// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "normq/train.hpp"

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "normq/common.hpp"
#include "normq/model_io.hpp"
#include "normq/rng.hpp"

using namespace normq;

namespace {

Corpus tiny_corpus(const HmmModel& truth, std::size_t count, std::size_t length,
                   std::uint64_t seed, std::size_t chunks = 1) {
    return sample_corpus(truth, count, length, seed, chunks);
}

}  // namespace

TEST_CASE("em_step on a 1-state model recovers empirical token frequencies") {
    HmmModel m = make_uniform_model(1, 3);
    Corpus corpus;
    corpus.vocab_size = 3;
    corpus.sequences = {{0, 0, 1}, {2, 0}};  // counts: 0 x3, 1 x1, 2 x1
    auto [updated, stats] = em_step(m, corpus.chunk(0), 0.0);
    CHECK(updated.emission(0, 0) == doctest::Approx(3.0 / 5.0).epsilon(1e-12));
    CHECK(updated.emission(0, 1) == doctest::Approx(1.0 / 5.0).epsilon(1e-12));
    CHECK(updated.emission(0, 2) == doctest::Approx(1.0 / 5.0).epsilon(1e-12));
    CHECK(updated.initial[0] == 1.0);
    CHECK(updated.transition(0, 0) == 1.0);
    CHECK(stats.possible == 2);

    // already at the stationary point: a second step changes nothing
    auto [again, stats2] = em_step(updated, corpus.chunk(0), 0.0);
    CHECK(again.emission(0, 0) == doctest::Approx(updated.emission(0, 0)).epsilon(1e-12));
    CHECK(stats2.lld_per_sequence() > stats.lld_per_sequence() - 1e-12);
}

TEST_CASE("em_step with zero smoothing zeroes absent token columns") {
    HmmModel m = make_uniform_model(2, 4);
    Corpus corpus;
    corpus.vocab_size = 4;
    corpus.sequences = {{0, 1, 0, 1}};  // tokens 2, 3 never appear
    auto [updated, stats] = em_step(m, corpus.chunk(0), 0.0);
    for (std::size_t z = 0; z < 2; ++z) {
        CHECK(updated.emission(z, 2) == 0.0);
        CHECK(updated.emission(z, 3) == 0.0);
    }
    // and with smoothing they stay strictly positive
    auto [smoothed, stats2] = em_step(m, corpus.chunk(0), 1e-9);
    for (std::size_t z = 0; z < 2; ++z) CHECK(smoothed.emission(z, 2) > 0.0);
    CHECK(validate_model(smoothed).ok());
}

TEST_CASE("em_step throws when every sequence is impossible") {
    HmmModel m = make_uniform_model(2, 4);
    m.emission = Matrix(2, 4);
    m.emission(0, 0) = 1.0;  // only token 0 can ever be emitted
    m.emission(1, 0) = 1.0;
    Corpus corpus;
    corpus.vocab_size = 4;
    corpus.sequences = {{1, 2}, {3}};
    CHECK_THROWS_WITH_AS(em_step(m, corpus.chunk(0), 0.0),
                         doctest::Contains("model inconsistent with data"), Error);
}

TEST_CASE("train LLD is non-decreasing when every step reuses the same chunk") {
    const HmmModel truth = make_random_model(4, 8, 101);
    const Corpus corpus = tiny_corpus(truth, 100, 10, 102);
    EmConfig config;
    config.epochs = 30;
    const TrainResult result = train(make_random_model(4, 8, 103), corpus, config);
    REQUIRE(result.record.steps.size() == 30);
    for (std::size_t i = 1; i < result.record.steps.size(); ++i)
        CHECK(result.record.steps[i].train_lld_per_token >=
              result.record.steps[i - 1].train_lld_per_token - 1e-9);
    CHECK(validate_model(result.model).ok());
}

TEST_CASE("train with rotating chunks is non-decreasing over epochs on the full corpus") {
    const HmmModel truth = make_random_model(3, 6, 201);
    Corpus corpus = tiny_corpus(truth, 120, 8, 202, 4);
    EmConfig config;
    config.epochs = 3;
    HmmModel model = make_random_model(3, 6, 203);
    double prev =
        chunk_loglik(model, std::span<const TokenSequence>(corpus.sequences)).lld_per_token();
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        EmConfig one = config;
        one.epochs = 1;
        model = train(model, corpus, one).model;
        const double now =
            chunk_loglik(model, std::span<const TokenSequence>(corpus.sequences)).lld_per_token();
        CHECK(now >= prev - 1e-9);
        prev = now;
    }
}

TEST_CASE("train step and chunk bookkeeping matches the schedule") {
    const HmmModel truth = make_random_model(2, 4, 301);
    const Corpus one_chunk = tiny_corpus(truth, 20, 5, 302, 1);
    EmConfig config;
    config.epochs = 1;
    CHECK(train(make_random_model(2, 4, 303), one_chunk, config).record.steps.size() == 1);

    const Corpus twenty = tiny_corpus(truth, 40, 5, 304, 20);
    config.epochs = 5;
    const TrainResult r = train(make_random_model(2, 4, 303), twenty, config);
    REQUIRE(r.record.steps.size() == 100);  // 5 epochs x 20 chunks
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(r.record.steps[i].step == i + 1);
        CHECK(r.record.steps[i].chunk == i % 20);
        CHECK_FALSE(r.record.steps[i].quant_event);
    }
}

TEST_CASE("train is bitwise deterministic for a fixed seed") {
    const HmmModel truth = make_random_model(3, 5, 401);
    const Corpus corpus = tiny_corpus(truth, 60, 6, 402, 3);
    const Corpus heldout = tiny_corpus(truth, 30, 6, 403);
    EmConfig config;
    config.epochs = 2;
    const TrainResult a = train(make_random_model(3, 5, 404), corpus, config, &heldout);
    const TrainResult b = train(make_random_model(3, 5, 404), corpus, config, &heldout);
    REQUIRE(a.record.steps.size() == b.record.steps.size());
    for (std::size_t i = 0; i < a.record.steps.size(); ++i) {
        CHECK(a.record.steps[i].train_lld_per_token == b.record.steps[i].train_lld_per_token);
        CHECK(*a.record.steps[i].test_lld_per_token == *b.record.steps[i].test_lld_per_token);
    }
    CHECK(a.model == b.model);
}

TEST_CASE("train and quantization_aware_train enforce the quantizer precondition") {
    const HmmModel truth = make_random_model(2, 4, 501);
    const Corpus corpus = tiny_corpus(truth, 10, 4, 502);
    EmConfig config;
    config.quantizer = Quantizer::NormQ;
    CHECK_THROWS_AS(train(truth, corpus, config), ConfigError);
    config.quantizer = Quantizer::None;
    CHECK_THROWS_AS(quantization_aware_train(truth, corpus, config), ConfigError);
}

TEST_CASE("quantization events land on interval multiples and the final step") {
    const HmmModel truth = make_random_model(4, 8, 601);
    const Corpus corpus = tiny_corpus(truth, 60, 6, 602, 10);
    EmConfig config;
    config.epochs = 2;  // 20 steps
    config.quantizer = Quantizer::NormQ;
    config.bit_width = 6;
    config.interval = 6;
    const TrainResult r = quantization_aware_train(make_random_model(4, 8, 603), corpus, config);
    std::vector<std::size_t> events;
    for (const auto& e : r.record.steps)
        if (e.quant_event) events.push_back(e.step);
    CHECK(events == std::vector<std::size_t>{6, 12, 18, 20});

    // interval == total steps degenerates to post-training quantization
    config.interval = 20;
    const TrainResult post = quantization_aware_train(make_random_model(4, 8, 603), corpus, config);
    std::size_t count = 0;
    for (const auto& e : post.record.steps)
        if (e.quant_event) ++count;
    CHECK(count == 1);
    CHECK(post.record.steps.back().quant_event);
}

TEST_CASE("every quantization event weakly decreases chunk LLD") {
    const HmmModel truth = make_random_model(8, 16, 701);
    const Corpus corpus = tiny_corpus(truth, 200, 12, 702, 4);
    EmConfig config;
    config.epochs = 3;
    config.quantizer = Quantizer::NormQ;
    config.bit_width = 4;
    config.interval = 3;
    const TrainResult r = quantization_aware_train(make_random_model(8, 16, 703), corpus, config);
    std::size_t events = 0;
    for (const auto& e : r.record.steps) {
        if (!e.quant_event) continue;
        ++events;
        REQUIRE(e.lld_pre_quant.has_value());
        REQUIRE(e.lld_post_quant.has_value());
        CHECK(*e.lld_post_quant <= *e.lld_pre_quant + 1e-12);
    }
    CHECK(events >= 4);
}

TEST_CASE("quantization-aware final model is exactly the stored reconstruction") {
    const HmmModel truth = make_random_model(4, 8, 801);
    const Corpus corpus = tiny_corpus(truth, 50, 6, 802, 2);
    for (Quantizer quantizer : {Quantizer::NormQ, Quantizer::KMeans}) {
        EmConfig config;
        config.epochs = 2;
        config.quantizer = quantizer;
        config.bit_width = 5;
        config.interval = 2;
        const TrainResult r =
            quantization_aware_train(make_random_model(4, 8, 803), corpus, config);
        REQUIRE(r.quantized.has_value());
        const HmmModel recon = dequantize_model(*r.quantized);
        CHECK(recon == r.model);  // zero reconstruction difference
        CHECK(validate_model(r.model).ok());

        // the stored form survives disk unchanged
        const auto path = std::filesystem::temp_directory_path() / "normq_qat_roundtrip.nqhm";
        save_model(path.string(), *r.quantized);
        const QuantizedModel loaded = std::get<QuantizedModel>(load_model(path.string()));
        CHECK(dequantize_model(loaded) == r.model);
        std::filesystem::remove(path);
    }
}

TEST_CASE("coarser quantization widens the LLD oscillation gap") {
    const HmmModel truth = make_random_model(16, 32, 811);
    const Corpus corpus = tiny_corpus(truth, 300, 10, 812);
    const HmmModel init = make_random_model(16, 32, 813);
    auto gap_at = [&](int bits) {
        EmConfig config;
        config.epochs = 20;
        config.quantizer = Quantizer::NormQ;
        config.bit_width = bits;
        config.interval = 4;
        const TrainResult r = quantization_aware_train(init, corpus, config);
        return lld_gap(r.record).gap;
    };
    CHECK(gap_at(4) >= gap_at(8));
}

TEST_CASE("test_loglik on the uniform model is the analytic value") {
    const HmmModel m = make_uniform_model(3, 7);
    Corpus heldout;
    heldout.vocab_size = 7;
    heldout.sequences = {{0, 1, 2, 3, 4}, {6, 6, 6, 6, 6}};
    const TestLoglik t = test_loglik(m, heldout);
    CHECK(t.mean_per_sequence == doctest::Approx(-5.0 * std::log(7.0)).epsilon(1e-12));
    CHECK(t.impossible == 0);
}

TEST_CASE("test_loglik counts impossible sequences separately") {
    HmmModel m = make_uniform_model(2, 3);
    m.emission = Matrix(2, 3);
    m.emission(0, 0) = 0.5;
    m.emission(0, 1) = 0.5;
    m.emission(1, 0) = 0.5;
    m.emission(1, 1) = 0.5;  // token 2 impossible
    Corpus heldout;
    heldout.vocab_size = 3;
    heldout.sequences = {{0, 1}, {2}, {1, 2}};
    const TestLoglik t = test_loglik(m, heldout);
    CHECK(t.impossible == 2);
    CHECK(t.count == 3);
    CHECK(std::isfinite(t.mean_per_sequence));
}

TEST_CASE("test_loglik matches a Monte-Carlo estimate of the model's own entropy rate") {
    const HmmModel m = make_random_model(3, 5, 901);
    const std::size_t sample = 4000;
    const std::size_t length = 12;
    const Corpus heldout = sample_corpus(m, sample, length, 902);
    const TestLoglik t = test_loglik(m, heldout);

    // independent Monte-Carlo oracle on a disjoint seed stream
    const Corpus reference = sample_corpus(m, sample, length, 903);
    double mean = 0.0;
    std::vector<double> lls(sample);
    for (std::size_t i = 0; i < sample; ++i) {
        lls[i] = forward_loglik(m, reference.sequences[i]);
        mean += lls[i];
    }
    mean /= static_cast<double>(sample);
    double var = 0.0;
    for (double ll : lls) var += (ll - mean) * (ll - mean);
    var /= static_cast<double>(sample - 1);
    const double se = std::sqrt(var / static_cast<double>(sample));
    CHECK(std::abs(t.mean_per_sequence - mean) < 3.0 * std::sqrt(2.0) * se);
}

TEST_CASE("em_step results do not depend on the worker count") {
    const HmmModel truth = make_random_model(6, 12, 1001);
    const Corpus corpus = tiny_corpus(truth, 150, 8, 1002);
    const HmmModel init = make_random_model(6, 12, 1003);

    setenv("NORMQ_THREADS", "1", 1);
    const auto single = em_step(init, corpus.chunk(0), 1e-9);
    setenv("NORMQ_THREADS", "4", 1);
    const auto pooled = em_step(init, corpus.chunk(0), 1e-9);
    unsetenv("NORMQ_THREADS");

    CHECK(single.first == pooled.first);  // bitwise: reduction order is fixed
    CHECK(single.second.total_loglik == pooled.second.total_loglik);
}

TEST_CASE("corpus chunking splits evenly and rejects bad shapes") {
    Corpus corpus;
    corpus.vocab_size = 2;
    for (std::size_t i = 0; i < 10; ++i) corpus.sequences.push_back({0});
    corpus.num_chunks = 3;
    CHECK(corpus.chunk(0).size() == 4);
    CHECK(corpus.chunk(1).size() == 3);
    CHECK(corpus.chunk(2).size() == 3);
    CHECK_THROWS_AS(corpus.chunk(3), ConfigError);
    corpus.num_chunks = 11;
    CHECK_THROWS_AS(corpus.chunk(0), ConfigError);
}

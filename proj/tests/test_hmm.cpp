// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "normq/hmm.hpp"

#include <cmath>

#include "doctest.h"
#include "normq/common.hpp"
#include "normq/rng.hpp"
#include "oracles.hpp"

using namespace normq;

namespace {

HmmModel two_state_model() {
    // gamma = [0.6, 0.4], alpha = [[0.7, 0.3], [0.4, 0.6]],
    // beta = [[0.9, 0.1], [0.2, 0.8]]
    HmmModel m;
    m.hidden_size = 2;
    m.vocab_size = 2;
    m.initial = {0.6, 0.4};
    m.transition = Matrix(2, 2);
    m.transition(0, 0) = 0.7;
    m.transition(0, 1) = 0.3;
    m.transition(1, 0) = 0.4;
    m.transition(1, 1) = 0.6;
    m.emission = Matrix(2, 2);
    m.emission(0, 0) = 0.9;
    m.emission(0, 1) = 0.1;
    m.emission(1, 0) = 0.2;
    m.emission(1, 1) = 0.8;
    return m;
}

HmmModel deterministic_chain(std::size_t n) {
    // gamma one-hot on 0, identity transitions, emission one-hot on state id
    HmmModel m;
    m.hidden_size = n;
    m.vocab_size = n;
    m.initial.assign(n, 0.0);
    m.initial[0] = 1.0;
    m.transition = Matrix(n, n);
    m.emission = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m.transition(i, i) = 1.0;
        m.emission(i, i) = 1.0;
    }
    return m;
}

}  // namespace

TEST_CASE("validate_model accepts a uniform model") {
    CHECK(validate_model(make_uniform_model(2, 2)).ok());
    CHECK(validate_model(two_state_model()).ok());
}

TEST_CASE("validate_model flags an all-zero transition row") {
    HmmModel m = two_state_model();
    m.transition(0, 0) = 0.0;
    m.transition(0, 1) = 0.0;
    const auto report = validate_model(m);
    REQUIRE_FALSE(report.ok());
    bool found = false;
    for (const auto& v : report.violations)
        if (v.matrix == "transition" && v.row == 0 && v.message == "all-zero row") found = true;
    CHECK(found);
}

TEST_CASE("validate_model reports row-sum deviation magnitude") {
    HmmModel m = two_state_model();
    m.transition(0, 0) = 0.6;
    m.transition(0, 1) = 0.5;
    const auto report = validate_model(m);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].matrix == "transition");
    CHECK(report.violations[0].row == 0);
    CHECK(report.violations[0].deviation == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("forward_loglik: single-state model is a product of emissions") {
    HmmModel m;
    m.hidden_size = 1;
    m.vocab_size = 2;
    m.initial = {1.0};
    m.transition = Matrix(1, 1, 1.0);
    m.emission = Matrix(1, 2);
    m.emission(0, 0) = 0.3;
    m.emission(0, 1) = 0.7;
    CHECK(forward_loglik(m, {1, 1}) == doctest::Approx(std::log(0.49)).epsilon(1e-12));
}

TEST_CASE("forward_loglik matches the exhaustive path-sum oracle") {
    const HmmModel m = two_state_model();
    const TokenSequence seq = {0, 1};
    const double expected = oracle::path_sum_probability(m, seq);
    CHECK(std::exp(forward_loglik(m, seq)) == doctest::Approx(expected).epsilon(1e-12));

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t n = 1 + seed % 4;
        const std::size_t v = 2 + seed % 3;
        const HmmModel r = make_random_model(n, v, derive_seed(99, "fwd", seed));
        TokenSequence s;
        Rng rng(derive_seed(99, "fwdseq", seed));
        const std::size_t len = 1 + seed % 6;
        for (std::size_t t = 0; t < len; ++t)
            s.push_back(static_cast<Token>(rng.next_u64() % v));
        const double truth = oracle::path_sum_probability(r, s);
        const double ll = forward_loglik(r, s);
        CHECK(std::exp(ll) == doctest::Approx(truth).epsilon(1e-10));
        CHECK(ll <= 0.0);  // proper distributions never exceed probability 1
    }
}

TEST_CASE("forward_loglik returns the -inf sentinel for impossible sequences") {
    HmmModel m = two_state_model();
    m.emission(0, 1) = 0.0;
    m.emission(1, 1) = 0.0;  // token 1 now has zero probability in every state
    CHECK(forward_loglik(m, {0, 1}) == kNegInf);
}

TEST_CASE("sequence distribution normalizes: sum over all sequences is 1") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const std::size_t v = 2 + seed % 2;
        const HmmModel m = make_random_model(1 + seed % 3, v, derive_seed(7, "norm", seed));
        const std::size_t len = 1 + seed % 4;
        std::vector<Token> seq(len, 0);
        double total = 0.0;
        for (;;) {
            total += std::exp(forward_loglik(m, TokenSequence(seq.begin(), seq.end())));
            std::size_t t = 0;
            while (t < len && ++seq[t] == v) seq[t++] = 0;
            if (t == len) break;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("forward_loglik is invariant under hidden-state permutation") {
    const HmmModel m = make_random_model(4, 3, 1234);
    const std::size_t perm[4] = {2, 0, 3, 1};
    HmmModel p = m;
    for (std::size_t i = 0; i < 4; ++i) {
        p.initial[perm[i]] = m.initial[i];
        for (std::size_t j = 0; j < 4; ++j) p.transition(perm[i], perm[j]) = m.transition(i, j);
        for (std::size_t x = 0; x < 3; ++x) p.emission(perm[i], x) = m.emission(i, x);
    }
    const TokenSequence seq = {0, 2, 1, 1, 0};
    CHECK(forward_loglik(p, seq) == doctest::Approx(forward_loglik(m, seq)).epsilon(1e-10));
}

TEST_CASE("forward_backward posteriors match exhaustive enumeration") {
    const HmmModel m = two_state_model();
    const TokenSequence seq = {0, 1};
    const auto stats = forward_backward(m, seq);
    const auto truth = oracle::path_sum_posteriors(m, seq);
    for (std::size_t t = 0; t < seq.size(); ++t)
        for (std::size_t z = 0; z < 2; ++z)
            CHECK(stats.state_posteriors(t, z) ==
                  doctest::Approx(truth.state(t, z)).epsilon(1e-10));
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(stats.pair_posteriors(i, j) ==
                  doctest::Approx(truth.pairs(i, j)).epsilon(1e-10));

    CHECK(stats.log_likelihood == forward_loglik(m, seq));  // bitwise, same recursion
}

TEST_CASE("forward_backward posterior rows sum to 1") {
    const HmmModel m = make_random_model(4, 4, 77);
    const TokenSequence seq = {3, 1, 0, 2, 2, 1};
    const auto stats = forward_backward(m, seq);
    for (std::size_t t = 0; t < seq.size(); ++t)
        CHECK(row_sum(stats.state_posteriors.row(t)) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("forward_backward on a single state gives all-ones posteriors") {
    HmmModel m;
    m.hidden_size = 1;
    m.vocab_size = 3;
    m.initial = {1.0};
    m.transition = Matrix(1, 1, 1.0);
    m.emission = Matrix(1, 3, 1.0 / 3.0);
    const auto stats = forward_backward(m, {0, 2, 1});
    for (std::size_t t = 0; t < 3; ++t) CHECK(stats.state_posteriors(t, 0) == 1.0);
}

TEST_CASE("forward_backward on a deterministic chain is one-hot everywhere") {
    const HmmModel m = deterministic_chain(3);
    const auto stats = forward_backward(m, {0, 0, 0, 0});
    for (std::size_t t = 0; t < 4; ++t) {
        CHECK(stats.state_posteriors(t, 0) == doctest::Approx(1.0));
        CHECK(stats.state_posteriors(t, 1) == doctest::Approx(0.0));
    }
}

TEST_CASE("forward_backward throws on impossible sequences") {
    const HmmModel m = deterministic_chain(2);
    CHECK_THROWS_AS(forward_backward(m, {1, 0}), SequenceImpossibleError);
}

TEST_CASE("sample_sequence is deterministic and honors one-hot models") {
    const HmmModel chain = deterministic_chain(2);
    CHECK(sample_sequence(chain, 5, 1) == TokenSequence{0, 0, 0, 0, 0});
    CHECK(sample_sequence(chain, 5, 999) == TokenSequence{0, 0, 0, 0, 0});

    const HmmModel m = make_random_model(3, 5, 42);
    CHECK(sample_sequence(m, 20, 7) == sample_sequence(m, 20, 7));
    CHECK(sample_sequence(m, 20, 7) != sample_sequence(m, 20, 8));
}

TEST_CASE("sample_sequence first-token frequencies match the analytic marginal") {
    const HmmModel m = two_state_model();
    // marginal P(x_0 = 0) = sum_z gamma_z beta_{z0}
    const double p0 = m.initial[0] * m.emission(0, 0) + m.initial[1] * m.emission(1, 0);
    const std::size_t trials = 100000;
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < trials; ++i)
        if (sample_sequence(m, 1, derive_seed(5150, "marginal", i))[0] == 0) ++zeros;
    const double freq = static_cast<double>(zeros) / trials;
    const double three_se = 3.0 * std::sqrt(p0 * (1.0 - p0) / trials);
    CHECK(std::abs(freq - p0) < three_se);
}

TEST_CASE("inference rejects malformed input") {
    const HmmModel m = two_state_model();
    CHECK_THROWS_AS(forward_loglik(m, {}), DomainError);
    CHECK_THROWS_AS(forward_loglik(m, {2}), DomainError);
    CHECK_THROWS_AS(sample_sequence(m, 0, 1), DomainError);
}

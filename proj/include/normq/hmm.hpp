// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "normq/matrix.hpp"

namespace normq {

using Token = std::uint32_t;
using TokenSequence = std::vector<Token>;

/// Discrete-observation HMM: initial distribution over hidden states,
/// row-stochastic transition (hidden x hidden) and emission (hidden x vocab)
/// matrices. Rows index the source/emitting state. Models are immutable
/// values after construction; every inference routine here is a pure
/// function and safe to call concurrently on a shared model.
struct HmmModel {
    std::size_t hidden_size = 0;
    std::size_t vocab_size = 0;
    std::vector<double> initial;  // hidden_size
    Matrix transition;            // hidden_size x hidden_size
    Matrix emission;              // hidden_size x vocab_size

    bool operator==(const HmmModel&) const = default;
};

/// Rows drawn from a symmetric Dirichlet with concentration 1.
HmmModel make_random_model(std::size_t hidden_size, std::size_t vocab_size, std::uint64_t seed);
HmmModel make_uniform_model(std::size_t hidden_size, std::size_t vocab_size);

struct Violation {
    std::string matrix;  // "initial" | "transition" | "emission"
    std::size_t row = 0;
    double deviation = 0.0;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string to_string() const;
};

/// Reports every stochasticity violation (entries outside [0,1], row sums off
/// by more than tolerance, all-zero rows). Never throws: degenerate models
/// are a legitimate state to diagnose, not an error to abort on.
ValidationReport validate_model(const HmmModel& model, double tolerance = 1e-9);

struct ForwardBackwardStats {
    double log_likelihood = 0.0;
    Matrix state_posteriors;  // T x hidden, P(z_t | x_{1..T})
    Matrix pair_posteriors;   // hidden x hidden, sum_t P(z_t, z_{t+1} | x)
    Matrix emission_counts;   // hidden x vocab, sum_t P(z_t | x) at column x_t
};

/// log P(x_{1..T}) by the scaled forward recursion (per-step normalization
/// of the message vector, log scale factors accumulated). Returns -inf when
/// the sequence has probability zero; quantized models legitimately produce
/// such sequences and callers count them.
double forward_loglik(const HmmModel& model, const TokenSequence& seq);

/// Full scaled forward/backward pass. log_likelihood matches forward_loglik
/// bit-for-bit (same recursion). Throws SequenceImpossibleError when the
/// sequence has probability zero, since posteriors are undefined there.
ForwardBackwardStats forward_backward(const HmmModel& model, const TokenSequence& seq);

/// Ancestral sampling: z_0 ~ initial, x_t ~ emission row, z_{t+1} ~
/// transition row. Deterministic given seed.
TokenSequence sample_sequence(const HmmModel& model, std::size_t length, std::uint64_t seed);

}  // namespace normq

// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <vector>

#include "normq/dfa.hpp"
#include "normq/hmm.hpp"

namespace normq {

/// value(t, z, s) = probability that the DFA reaches acceptance within t
/// more emitted tokens, given the next token is emitted from hidden state z
/// and the DFA currently sits in state s. Computed by the backward dynamic
/// program
///     value(t, z, s) = sum_x emission[z, x]
///                      * sum_z' transition[z, z'] * value(t-1, z', delta(s, x))
/// with value(0, z, s) = [s accepting].
struct GuidanceTable {
    std::size_t horizon = 0;
    std::size_t hidden_size = 0;
    std::size_t dfa_states = 0;
    std::vector<double> values;  // (horizon + 1) x hidden x dfa_states

    double at(std::size_t steps_remaining, std::size_t state, std::size_t dfa_state) const {
        return values[(steps_remaining * hidden_size + state) * dfa_states + dfa_state];
    }
};

GuidanceTable build_guidance(const HmmModel& model, const KeywordDfa& dfa, std::size_t horizon);

struct GenerationResult {
    TokenSequence tokens;
    bool failed = false;    // guidance zeroed every next-token weight
    bool accepted = false;  // DFA accepts the emitted sequence
};

/// Sample max_len tokens, reweighting the model's next-token distribution at
/// each step by the expected guidance value of the continuation and
/// renormalizing. When the constraint becomes unsatisfiable in the remaining
/// steps the result is marked failed rather than aborting. Deterministic
/// given seed.
GenerationResult guided_generate(const HmmModel& model, const KeywordDfa& dfa,
                                 const GuidanceTable& table, std::size_t max_len,
                                 std::uint64_t seed);

/// Unguided baseline with the same draw structure (one token draw per step
/// from the belief-marginalized next-token distribution), so guided and
/// unguided runs pair up seed for seed.
GenerationResult unguided_generate(const HmmModel& model, const KeywordDfa& dfa,
                                   std::size_t max_len, std::uint64_t seed);

struct SuccessRate {
    std::size_t trials = 0;
    std::size_t successes = 0;
    std::size_t failed_generations = 0;
    double rate = 0.0;
};

/// Fraction of generated sequences the DFA accepts over per-trial derived
/// seeds. guided = false runs the unguided baseline on the same seed set.
SuccessRate success_rate(const HmmModel& model, const KeywordDfa& dfa, bool guided,
                         std::size_t trials, std::size_t max_len, std::uint64_t seed);

}  // namespace normq

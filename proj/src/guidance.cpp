// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "normq/guidance.hpp"

#include <cmath>

#include "normq/common.hpp"
#include "normq/rng.hpp"

namespace normq {

GuidanceTable build_guidance(const HmmModel& model, const KeywordDfa& dfa, std::size_t horizon) {
    if (dfa.vocab_size != model.vocab_size)
        throw DomainError("DFA and model vocabulary sizes differ");
    const std::size_t n = model.hidden_size;
    const std::size_t s_count = dfa.num_states;
    const std::size_t v = model.vocab_size;

    GuidanceTable table;
    table.horizon = horizon;
    table.hidden_size = n;
    table.dfa_states = s_count;
    table.values.assign((horizon + 1) * n * s_count, 0.0);

    for (std::size_t z = 0; z < n; ++z)
        for (std::size_t s = 0; s < s_count; ++s)
            table.values[z * s_count + s] = dfa.accepting[s] ? 1.0 : 0.0;

    // mixed[z][s'] = sum_z' transition[z, z'] * value(t-1, z', s')
    std::vector<double> mixed(n * s_count);
    for (std::size_t t = 1; t <= horizon; ++t) {
        const double* prev = table.values.data() + (t - 1) * n * s_count;
        double* curr = table.values.data() + t * n * s_count;
        for (std::size_t z = 0; z < n; ++z) {
            const auto trans = model.transition.row(z);
            for (std::size_t s = 0; s < s_count; ++s) {
                double acc = 0.0;
                for (std::size_t zn = 0; zn < n; ++zn) acc += trans[zn] * prev[zn * s_count + s];
                mixed[z * s_count + s] = acc;
            }
        }
        for (std::size_t z = 0; z < n; ++z) {
            const auto emis = model.emission.row(z);
            const double* mix = mixed.data() + z * s_count;
            for (std::size_t s = 0; s < s_count; ++s) {
                double acc = 0.0;
                for (std::size_t x = 0; x < v; ++x)
                    acc += emis[x] * mix[dfa.next(s, static_cast<Token>(x))];
                curr[z * s_count + s] = acc;
            }
        }
    }
    return table;
}

namespace {

GenerationResult generate(const HmmModel& model, const KeywordDfa& dfa,
                          const GuidanceTable* table, std::size_t max_len, std::uint64_t seed) {
    if (max_len == 0) throw ConfigError("max_len must be positive");
    if (table && table->horizon < max_len)
        throw ConfigError("guidance table horizon shorter than max_len");
    const std::size_t n = model.hidden_size;
    const std::size_t v = model.vocab_size;
    const std::size_t s_count = dfa.num_states;

    Rng rng(seed);
    GenerationResult result;
    result.tokens.reserve(max_len);

    // belief[z] = P(next token is emitted from z | tokens so far)
    std::vector<double> belief(model.initial.begin(), model.initial.end());
    std::vector<double> next_belief(n);
    std::vector<double> weights(v);
    std::vector<double> mixed(table ? n * s_count : 0);
    std::size_t dfa_state = dfa.start_state;

    for (std::size_t t = 0; t < max_len; ++t) {
        const std::size_t remaining = max_len - t - 1;
        if (table) {
            const double* value = table->values.data() + remaining * n * s_count;
            for (std::size_t z = 0; z < n; ++z) {
                const auto trans = model.transition.row(z);
                for (std::size_t s = 0; s < s_count; ++s) {
                    double acc = 0.0;
                    for (std::size_t zn = 0; zn < n; ++zn)
                        acc += trans[zn] * value[zn * s_count + s];
                    mixed[z * s_count + s] = acc;
                }
            }
            for (std::size_t x = 0; x < v; ++x) {
                const std::size_t s_next = dfa.next(dfa_state, static_cast<Token>(x));
                double acc = 0.0;
                for (std::size_t z = 0; z < n; ++z)
                    acc += belief[z] * model.emission(z, x) * mixed[z * s_count + s_next];
                weights[x] = acc;
            }
        } else {
            for (std::size_t x = 0; x < v; ++x) {
                double acc = 0.0;
                for (std::size_t z = 0; z < n; ++z) acc += belief[z] * model.emission(z, x);
                weights[x] = acc;
            }
        }

        double total = 0.0;
        for (double w : weights) total += w;
        if (total <= 0.0) {
            result.failed = true;
            break;
        }
        for (double& w : weights) w /= total;
        const Token token = static_cast<Token>(rng.categorical(weights));
        result.tokens.push_back(token);
        dfa_state = dfa.next(dfa_state, token);

        // Filtered posterior over the next emitting state given the token.
        double norm = 0.0;
        for (std::size_t zn = 0; zn < n; ++zn) next_belief[zn] = 0.0;
        for (std::size_t z = 0; z < n; ++z) {
            const double mass = belief[z] * model.emission(z, token);
            if (mass == 0.0) continue;
            const auto trans = model.transition.row(z);
            for (std::size_t zn = 0; zn < n; ++zn) next_belief[zn] += mass * trans[zn];
        }
        for (double x : next_belief) norm += x;
        if (norm <= 0.0) {
            result.failed = true;
            break;
        }
        for (double& x : next_belief) x /= norm;
        belief.swap(next_belief);
    }
    result.accepted = !result.failed && dfa.accepting[dfa_state] != 0;
    return result;
}

}  // namespace

GenerationResult guided_generate(const HmmModel& model, const KeywordDfa& dfa,
                                 const GuidanceTable& table, std::size_t max_len,
                                 std::uint64_t seed) {
    return generate(model, dfa, &table, max_len, seed);
}

GenerationResult unguided_generate(const HmmModel& model, const KeywordDfa& dfa,
                                   std::size_t max_len, std::uint64_t seed) {
    return generate(model, dfa, nullptr, max_len, seed);
}

SuccessRate success_rate(const HmmModel& model, const KeywordDfa& dfa, bool guided,
                         std::size_t trials, std::size_t max_len, std::uint64_t seed) {
    if (trials == 0) throw ConfigError("trials must be positive");
    GuidanceTable table;
    if (guided) table = build_guidance(model, dfa, max_len);

    SuccessRate out;
    out.trials = trials;
    for (std::size_t i = 0; i < trials; ++i) {
        const std::uint64_t trial_seed = derive_seed(seed, "trial", i);
        const GenerationResult r = guided ? guided_generate(model, dfa, table, max_len, trial_seed)
                                          : unguided_generate(model, dfa, max_len, trial_seed);
        if (r.accepted) ++out.successes;
        if (r.failed) ++out.failed_generations;
    }
    out.rate = static_cast<double>(out.successes) / static_cast<double>(out.trials);
    return out;
}

}  // namespace normq

// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "normq/hmm.hpp"

namespace normq {

/// Deterministic finite automaton over token IDs encoding "every keyword has
/// appeared as a contiguous run". Built as the product of one KMP matcher
/// per keyword; a matched keyword stays matched, so the accepting state is
/// absorbing and acceptance is monotone in sequence length.
struct KeywordDfa {
    std::size_t vocab_size = 0;
    std::size_t num_states = 0;
    std::size_t start_state = 0;
    std::vector<char> accepting;         // num_states
    std::vector<std::uint32_t> delta;    // num_states x vocab_size
    std::vector<TokenSequence> keywords;

    std::uint32_t next(std::size_t state, Token token) const {
        return delta[state * vocab_size + token];
    }

    bool accepts(const TokenSequence& seq) const {
        std::size_t s = start_state;
        for (Token t : seq) s = next(s, t);
        return accepting[s] != 0;
    }
};

KeywordDfa build_keyword_dfa(const std::vector<TokenSequence>& keywords, std::size_t vocab_size);

/// Configuration check the CLI surfaces as a warning: a keyword longer than
/// the generation horizon can never be satisfied.
std::optional<std::string> horizon_warning(const std::vector<TokenSequence>& keywords,
                                           std::size_t horizon);

}  // namespace normq

// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "normq/dfa.hpp"

#include <map>
#include <queue>

#include "normq/common.hpp"

namespace normq {

namespace {

// KMP matcher for one keyword: state = length of the longest prefix of the
// keyword that is a suffix of the stream, with the final state absorbing.
struct Matcher {
    TokenSequence keyword;
    std::vector<std::uint32_t> delta;  // (len + 1) x vocab

    Matcher(const TokenSequence& word, std::size_t vocab) : keyword(word) {
        const std::size_t len = word.size();
        std::vector<std::size_t> fail(len + 1, 0);
        for (std::size_t i = 1; i < len; ++i) {
            std::size_t k = fail[i];
            while (k > 0 && word[i] != word[k]) k = fail[k];
            fail[i + 1] = word[i] == word[k] ? k + 1 : 0;
        }
        delta.assign((len + 1) * vocab, 0);
        for (std::size_t s = 0; s <= len; ++s) {
            for (std::size_t a = 0; a < vocab; ++a) {
                if (s == len) {
                    delta[s * vocab + a] = static_cast<std::uint32_t>(len);  // absorbing
                    continue;
                }
                std::size_t k = s;
                while (k > 0 && word[k] != a) k = fail[k];
                if (word[k] == a) ++k;
                delta[s * vocab + a] = static_cast<std::uint32_t>(k);
            }
        }
    }
};

}  // namespace

KeywordDfa build_keyword_dfa(const std::vector<TokenSequence>& keywords, std::size_t vocab_size) {
    if (vocab_size == 0) throw ConfigError("vocab size must be positive");
    if (keywords.empty()) throw ConfigError("at least one keyword required");
    std::vector<Matcher> matchers;
    matchers.reserve(keywords.size());
    for (const auto& word : keywords) {
        if (word.empty()) throw ConfigError("empty keyword");
        for (Token t : word)
            if (t >= vocab_size) throw ConfigError("keyword token outside vocabulary");
        matchers.emplace_back(word, vocab_size);
    }

    // Product automaton over per-keyword states, restricted to the part
    // reachable from the all-zeros start tuple.
    KeywordDfa dfa;
    dfa.vocab_size = vocab_size;
    dfa.keywords = keywords;

    std::map<std::vector<std::uint32_t>, std::uint32_t> ids;
    std::vector<std::vector<std::uint32_t>> tuples;
    auto intern = [&](const std::vector<std::uint32_t>& tuple) {
        auto [it, inserted] = ids.emplace(tuple, static_cast<std::uint32_t>(tuples.size()));
        if (inserted) tuples.push_back(tuple);
        return it->second;
    };

    std::queue<std::uint32_t> frontier;
    frontier.push(intern(std::vector<std::uint32_t>(keywords.size(), 0)));
    dfa.start_state = 0;
    std::vector<std::uint32_t> delta;
    while (!frontier.empty()) {
        const std::uint32_t id = frontier.front();
        frontier.pop();
        const auto tuple = tuples[id];  // copy: tuples may reallocate below
        if (delta.size() < static_cast<std::size_t>(id + 1) * vocab_size)
            delta.resize(static_cast<std::size_t>(id + 1) * vocab_size, 0);
        for (std::size_t a = 0; a < vocab_size; ++a) {
            std::vector<std::uint32_t> next(tuple.size());
            for (std::size_t k = 0; k < tuple.size(); ++k)
                next[k] = matchers[k].delta[tuple[k] * vocab_size + a];
            const std::size_t before = tuples.size();
            const std::uint32_t next_id = intern(next);
            if (tuples.size() > before) frontier.push(next_id);
            delta[static_cast<std::size_t>(id) * vocab_size + a] = next_id;
        }
    }

    dfa.num_states = tuples.size();
    dfa.delta = std::move(delta);
    dfa.delta.resize(dfa.num_states * vocab_size, 0);
    dfa.accepting.resize(dfa.num_states, 0);
    for (std::size_t s = 0; s < dfa.num_states; ++s) {
        bool all = true;
        for (std::size_t k = 0; k < keywords.size(); ++k)
            if (tuples[s][k] != keywords[k].size()) {
                all = false;
                break;
            }
        dfa.accepting[s] = all ? 1 : 0;
    }
    return dfa;
}

std::optional<std::string> horizon_warning(const std::vector<TokenSequence>& keywords,
                                           std::size_t horizon) {
    for (const auto& word : keywords)
        if (word.size() > horizon)
            return "keyword of length " + std::to_string(word.size()) +
                   " cannot fit the generation horizon " + std::to_string(horizon);
    return std::nullopt;
}

}  // namespace normq

// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "normq/hmm.hpp"

#include <cmath>
#include <sstream>

#include "normq/common.hpp"
#include "normq/rng.hpp"

namespace normq {

namespace {

void check_dims(const HmmModel& m) {
    if (m.hidden_size == 0 || m.vocab_size == 0)
        throw DomainError("model dimensions must be positive");
    if (m.initial.size() != m.hidden_size || m.transition.rows() != m.hidden_size ||
        m.transition.cols() != m.hidden_size || m.emission.rows() != m.hidden_size ||
        m.emission.cols() != m.vocab_size)
        throw DomainError("model matrices dimensionally inconsistent");
}

void check_sequence(const HmmModel& m, const TokenSequence& seq) {
    if (seq.empty()) throw DomainError("empty sequence");
    for (Token t : seq)
        if (t >= m.vocab_size)
            throw DomainError("token id " + std::to_string(t) + " outside vocabulary of size " +
                              std::to_string(m.vocab_size));
}

// One scaled forward step shared by forward_loglik and forward_backward so
// their log-likelihoods agree bitwise. Writes the normalized message into
// `out`, returns the scale (0 means the sequence died here).
double forward_step_scale(std::span<double> out) {
    double scale = 0.0;
    for (double v : out) scale += v;
    if (scale <= 0.0) return 0.0;
    for (double& v : out) v /= scale;
    return scale;
}

}  // namespace

HmmModel make_random_model(std::size_t hidden_size, std::size_t vocab_size, std::uint64_t seed) {
    HmmModel m;
    m.hidden_size = hidden_size;
    m.vocab_size = vocab_size;
    m.initial.resize(hidden_size);
    m.transition = Matrix(hidden_size, hidden_size);
    m.emission = Matrix(hidden_size, vocab_size);

    Rng rng(seed);
    auto dirichlet_fill = [&rng](std::span<double> row) {
        // Dirichlet(1,...,1) == normalized iid Exp(1)
        double sum = 0.0;
        for (double& v : row) {
            v = -std::log(1.0 - rng.next_double());
            sum += v;
        }
        if (sum <= 0.0) {
            for (double& v : row) v = 1.0 / static_cast<double>(row.size());
            return;
        }
        for (double& v : row) v /= sum;
    };
    dirichlet_fill(m.initial);
    for (std::size_t i = 0; i < hidden_size; ++i) dirichlet_fill(m.transition.row(i));
    for (std::size_t i = 0; i < hidden_size; ++i) dirichlet_fill(m.emission.row(i));
    return m;
}

HmmModel make_uniform_model(std::size_t hidden_size, std::size_t vocab_size) {
    HmmModel m;
    m.hidden_size = hidden_size;
    m.vocab_size = vocab_size;
    m.initial.assign(hidden_size, 1.0 / static_cast<double>(hidden_size));
    m.transition = Matrix(hidden_size, hidden_size, 1.0 / static_cast<double>(hidden_size));
    m.emission = Matrix(hidden_size, vocab_size, 1.0 / static_cast<double>(vocab_size));
    return m;
}

std::string ValidationReport::to_string() const {
    if (violations.empty()) return "ok";
    std::ostringstream out;
    for (const auto& v : violations)
        out << v.matrix << " row " << v.row << ": " << v.message << " (deviation " << v.deviation
            << ")\n";
    return out.str();
}

ValidationReport validate_model(const HmmModel& model, double tolerance) {
    check_dims(model);
    ValidationReport report;

    auto check_row = [&](const std::string& name, std::size_t row_index,
                         std::span<const double> row) {
        double sum = 0.0;
        bool all_zero = true;
        double worst_range = 0.0;
        for (double v : row) {
            sum += v;
            if (v != 0.0) all_zero = false;
            if (v < 0.0) worst_range = std::max(worst_range, -v);
            if (v > 1.0) worst_range = std::max(worst_range, v - 1.0);
        }
        if (worst_range > tolerance)
            report.violations.push_back(
                {name, row_index, worst_range, "entry outside [0, 1]"});
        if (all_zero) {
            report.violations.push_back({name, row_index, 1.0, "all-zero row"});
        } else if (std::abs(sum - 1.0) > tolerance) {
            std::ostringstream msg;
            msg << "row sum " << sum << " exceeds tolerance";
            report.violations.push_back({name, row_index, std::abs(sum - 1.0), msg.str()});
        }
    };

    check_row("initial", 0, model.initial);
    for (std::size_t i = 0; i < model.hidden_size; ++i)
        check_row("transition", i, model.transition.row(i));
    for (std::size_t i = 0; i < model.hidden_size; ++i)
        check_row("emission", i, model.emission.row(i));
    return report;
}

double forward_loglik(const HmmModel& model, const TokenSequence& seq) {
    check_dims(model);
    check_sequence(model, seq);
    const std::size_t n = model.hidden_size;
    std::vector<double> cur(n), next(n);

    for (std::size_t z = 0; z < n; ++z) cur[z] = model.initial[z] * model.emission(z, seq[0]);
    double scale = forward_step_scale(cur);
    if (scale == 0.0) return kNegInf;
    double loglik = std::log(scale);

    for (std::size_t t = 1; t < seq.size(); ++t) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = cur[i];
            if (a == 0.0) continue;
            const auto trans = model.transition.row(i);
            for (std::size_t j = 0; j < n; ++j) next[j] += a * trans[j];
        }
        for (std::size_t j = 0; j < n; ++j) next[j] *= model.emission(j, seq[t]);
        scale = forward_step_scale(next);
        if (scale == 0.0) return kNegInf;
        loglik += std::log(scale);
        std::swap(cur, next);
    }
    return loglik;
}

ForwardBackwardStats forward_backward(const HmmModel& model, const TokenSequence& seq) {
    check_dims(model);
    check_sequence(model, seq);
    const std::size_t n = model.hidden_size;
    const std::size_t len = seq.size();

    // Scaled forward, keeping every normalized message and scale.
    Matrix alpha(len, n);
    std::vector<double> scales(len);
    {
        auto a0 = alpha.row(0);
        for (std::size_t z = 0; z < n; ++z) a0[z] = model.initial[z] * model.emission(z, seq[0]);
        scales[0] = forward_step_scale(a0);
        if (scales[0] == 0.0) throw SequenceImpossibleError();
    }
    double loglik = std::log(scales[0]);
    for (std::size_t t = 1; t < len; ++t) {
        auto prev = alpha.row(t - 1);
        auto curr = alpha.row(t);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = prev[i];
            if (a == 0.0) continue;
            const auto trans = model.transition.row(i);
            for (std::size_t j = 0; j < n; ++j) curr[j] += a * trans[j];
        }
        for (std::size_t j = 0; j < n; ++j) curr[j] *= model.emission(j, seq[t]);
        scales[t] = forward_step_scale(curr);
        if (scales[t] == 0.0) throw SequenceImpossibleError();
        loglik += std::log(scales[t]);
    }

    ForwardBackwardStats stats;
    stats.log_likelihood = loglik;
    stats.state_posteriors = Matrix(len, n);
    stats.pair_posteriors = Matrix(n, n);
    stats.emission_counts = Matrix(n, model.vocab_size);

    // Scaled backward with the forward scales; posterior(t) = alpha_t * beta_t
    // is then already normalized.
    std::vector<double> beta(n, 1.0), beta_prev(n);
    {
        auto post = stats.state_posteriors.row(len - 1);
        auto a = alpha.row(len - 1);
        for (std::size_t i = 0; i < n; ++i) post[i] = a[i] * beta[i];
        for (std::size_t i = 0; i < n; ++i)
            stats.emission_counts(i, seq[len - 1]) += post[i];
    }
    for (std::size_t t = len - 1; t-- > 0;) {
        const Token next_tok = seq[t + 1];
        for (std::size_t j = 0; j < n; ++j)
            beta_prev[j] = model.emission(j, next_tok) * beta[j];
        auto a = alpha.row(t);
        auto post = stats.state_posteriors.row(t);
        const double inv_scale = 1.0 / scales[t + 1];
        for (std::size_t i = 0; i < n; ++i) {
            const auto trans = model.transition.row(i);
            double acc = 0.0;
            const double a_i = a[i];
            for (std::size_t j = 0; j < n; ++j) {
                const double w = trans[j] * beta_prev[j];
                acc += w;
                stats.pair_posteriors(i, j) += a_i * w * inv_scale;
            }
            beta[i] = acc * inv_scale;
            post[i] = a_i * beta[i];
        }
        for (std::size_t i = 0; i < n; ++i) stats.emission_counts(i, seq[t]) += post[i];
    }
    return stats;
}

TokenSequence sample_sequence(const HmmModel& model, std::size_t length, std::uint64_t seed) {
    check_dims(model);
    if (length == 0) throw DomainError("sequence length must be positive");
    Rng rng(seed);
    TokenSequence seq(length);
    std::size_t state = rng.categorical(model.initial);
    for (std::size_t t = 0; t < length; ++t) {
        seq[t] = static_cast<Token>(rng.categorical(model.emission.row(state)));
        if (t + 1 < length) state = rng.categorical(model.transition.row(state));
    }
    return seq;
}

}  // namespace normq

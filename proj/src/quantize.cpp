// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "normq/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "normq/common.hpp"

namespace normq {

namespace {

void check_bit_width(int b) {
    if (b < 1 || b > 24)
        throw ConfigError("bit width " + std::to_string(b) + " outside [1, 24]");
}

std::uint32_t max_level(int b) { return (1u << b) - 1u; }

void check_quantized(const QuantizedMatrix& q) {
    check_bit_width(q.bit_width);
    if (q.row_entries.size() != q.rows) throw FormatError("row count mismatch");
    const std::uint32_t level_cap = q.scheme == QuantScheme::KMeans
                                        ? static_cast<std::uint32_t>(q.codebook.size())
                                        : max_level(q.bit_width) + 1u;
    for (std::size_t i = 0; i < q.rows; ++i) {
        std::int64_t prev_col = -1;
        for (const QuantEntry& e : q.row_entries[i]) {
            if (e.col >= q.cols || static_cast<std::int64_t>(e.col) <= prev_col)
                throw FormatError("corrupt column index " + std::to_string(e.col) + " in row " +
                                  std::to_string(i));
            if (e.level == 0 || e.level >= level_cap)
                throw FormatError("corrupt level " + std::to_string(e.level) + " in row " +
                                  std::to_string(i));
            prev_col = e.col;
        }
    }
    if (q.scheme == QuantScheme::KMeans) {
        if (q.codebook.empty() || q.codebook.size() > (1u << q.bit_width))
            throw FormatError("kmeans codebook size out of range");
    }
}

// Exact renormalization pass: one divide by the computed sum, killing the
// 1e-16-level drift of the first normalization.
void renorm_row(std::span<double> row) {
    double s = 0.0;
    for (double v : row) s += v;
    if (s > 0.0 && s != 1.0)
        for (double& v : row) v /= s;
}

}  // namespace

const char* scheme_name(QuantScheme scheme) {
    switch (scheme) {
        case QuantScheme::LinearFixed: return "linear-fixed";
        case QuantScheme::NormQ: return "norm-q";
        case QuantScheme::KMeans: return "kmeans";
    }
    return "unknown";
}

std::optional<QuantScheme> scheme_from_name(std::string_view name) {
    if (name == "linear-fixed" || name == "linear") return QuantScheme::LinearFixed;
    if (name == "norm-q" || name == "normq") return QuantScheme::NormQ;
    if (name == "kmeans") return QuantScheme::KMeans;
    return std::nullopt;
}

std::size_t QuantizedMatrix::stored_entries() const {
    std::size_t n = 0;
    for (const auto& row : row_entries) n += row.size();
    return n;
}

Matrix prune_ratio(const Matrix& matrix, double ratio, bool renormalize, double epsilon) {
    if (ratio < 0.0 || ratio >= 1.0) throw ConfigError("pruning ratio outside [0, 1)");
    for (std::size_t i = 0; i < matrix.rows(); ++i)
        for (double v : matrix.row(i))
            if (!std::isfinite(v) || v < 0.0)
                throw DomainError("prune_ratio requires finite non-negative entries");

    Matrix out = matrix;
    const std::size_t count = static_cast<std::size_t>(ratio * static_cast<double>(out.size()));
    if (count > 0) {
        // Global threshold: stable order on (magnitude, flat index) makes ties
        // deterministic.
        std::vector<std::pair<double, std::size_t>> order(out.size());
        for (std::size_t k = 0; k < out.size(); ++k) order[k] = {out.data()[k], k};
        std::sort(order.begin(), order.end());
        for (std::size_t k = 0; k < count; ++k) out.data()[order[k].second] = 0.0;
    }
    if (renormalize) out = normalize_rows(out, epsilon);
    return out;
}

QuantizedMatrix quantize_linear_fixed(const Matrix& matrix, int bit_width) {
    check_bit_width(bit_width);
    QuantizedMatrix q;
    q.rows = matrix.rows();
    q.cols = matrix.cols();
    q.bit_width = bit_width;
    q.scheme = QuantScheme::LinearFixed;
    q.row_entries.resize(q.rows);
    const double scale = static_cast<double>(max_level(bit_width));
    for (std::size_t i = 0; i < q.rows; ++i) {
        const auto row = matrix.row(i);
        auto& entries = q.row_entries[i];
        for (std::size_t j = 0; j < q.cols; ++j) {
            // std::round ties away from zero, the documented rule
            double level = std::round(row[j] * scale);
            if (level <= 0.0) continue;
            if (level > scale) level = scale;
            entries.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(level)});
        }
    }
    return q;
}

QuantizedMatrix norm_q(const Matrix& matrix, int bit_width, double epsilon) {
    if (epsilon <= 0.0) throw ConfigError("norm-q epsilon must be positive");
    QuantizedMatrix q = quantize_linear_fixed(matrix, bit_width);
    q.scheme = QuantScheme::NormQ;
    q.epsilon = epsilon;
    return q;
}

namespace {

struct LloydRun {
    std::vector<double> centroids;
    std::vector<std::uint32_t> level_of;  // per distinct value
    std::vector<double> trace;            // distortion after every update
    double distortion = 0.0;
};

// Lloyd iterations on the sorted distinct values: midpoints between
// consecutive centroids are the assignment boundaries, a value exactly on a
// midpoint goes to the lower cluster. Stops when assignments are stable.
LloydRun run_lloyd(const std::vector<double>& values, const std::vector<double>& weights,
                   std::vector<double> centroids, std::size_t max_iters) {
    const std::size_t m = values.size();
    const std::size_t k = centroids.size();
    std::vector<std::size_t> assignment(m, 0), prev_assignment(m, m);
    LloydRun run;
    auto assign = [&] {
        std::size_t cluster = 0;
        for (std::size_t i = 0; i < m; ++i) {
            while (cluster + 1 < k && values[i] > 0.5 * (centroids[cluster] + centroids[cluster + 1]))
                ++cluster;
            assignment[i] = cluster;
        }
    };
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        assign();
        if (assignment == prev_assignment) break;
        prev_assignment = assignment;

        std::vector<double> sum(k, 0.0), weight(k, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            sum[assignment[i]] += weights[i] * values[i];
            weight[assignment[i]] += weights[i];
        }
        for (std::size_t c = 0; c < k; ++c)
            if (weight[c] > 0.0) centroids[c] = sum[c] / weight[c];

        double distortion = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double d = values[i] - centroids[assignment[i]];
            distortion += weights[i] * d * d;
        }
        run.trace.push_back(distortion);
    }
    assign();
    run.centroids = std::move(centroids);
    run.level_of.resize(m);
    run.distortion = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        run.level_of[i] = static_cast<std::uint32_t>(assignment[i]);
        const double d = values[i] - run.centroids[assignment[i]];
        run.distortion += weights[i] * d * d;
    }
    return run;
}

}  // namespace

QuantizedMatrix kmeans_quantize(const Matrix& matrix, int bit_width, std::size_t max_iters,
                                std::uint64_t seed, std::vector<double>* distortion_trace) {
    check_bit_width(bit_width);
    (void)seed;  // deterministic start set; reserved for randomized restarts
    if (matrix.size() == 0) throw DomainError("empty matrix");

    // Weighted multiset of distinct values, sorted.
    std::map<double, std::size_t> histogram;
    for (std::size_t k = 0; k < matrix.size(); ++k) ++histogram[matrix.data()[k]];
    std::vector<double> values;
    std::vector<double> weights;
    values.reserve(histogram.size());
    for (const auto& [v, w] : histogram) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw DomainError("kmeans_quantize requires entries in [0, 1]");
        values.push_back(v);
        weights.push_back(static_cast<double>(w));
    }
    const std::size_t m = values.size();
    const double total_weight = std::accumulate(weights.begin(), weights.end(), 0.0);

    const std::size_t k_clusters = std::min<std::size_t>(std::size_t{1} << bit_width, m);

    // First start: centroids at weighted quantiles (j + 0.5)/k. Skewed
    // weights can map several quantiles to one value, so the chosen value
    // indices are made strictly increasing (k <= m makes that possible): a
    // forward pass pushes duplicates up, a backward pass clamps the overflow.
    std::vector<std::vector<double>> starts;
    {
        std::vector<double> cumulative(m);
        std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
        std::vector<std::size_t> idx(k_clusters);
        std::size_t cursor = 0;
        for (std::size_t j = 0; j < k_clusters; ++j) {
            const double target =
                (static_cast<double>(j) + 0.5) / static_cast<double>(k_clusters) * total_weight;
            while (cursor + 1 < m && cumulative[cursor] < target) ++cursor;
            idx[j] = cursor;
        }
        for (std::size_t j = 1; j < k_clusters; ++j) idx[j] = std::max(idx[j], idx[j - 1] + 1);
        idx[k_clusters - 1] = std::min(idx[k_clusters - 1], m - 1);
        for (std::size_t j = k_clusters - 1; j-- > 0;) idx[j] = std::min(idx[j], idx[j + 1] - 1);
        std::vector<double> init(k_clusters);
        for (std::size_t j = 0; j < k_clusters; ++j) init[j] = values[idx[j]];
        starts.push_back(std::move(init));
    }

    // Quantile-started Lloyd has suboptimal fixed points. For two clusters
    // the optimum is one of the m - 1 contiguous splits, and a Lloyd run
    // started from a split's segment means can only improve on that split,
    // so seeding every split makes the best run globally optimal.
    if (k_clusters == 2 && m <= 512) {
        std::vector<double> prefix_w(m + 1, 0.0), prefix_wv(m + 1, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            prefix_w[i + 1] = prefix_w[i] + weights[i];
            prefix_wv[i + 1] = prefix_wv[i] + weights[i] * values[i];
        }
        for (std::size_t split = 1; split < m; ++split) {
            const double left = prefix_wv[split] / prefix_w[split];
            const double right =
                (prefix_wv[m] - prefix_wv[split]) / (prefix_w[m] - prefix_w[split]);
            starts.push_back({left, right});
        }
    }

    LloydRun best;
    bool have_best = false;
    for (auto& init : starts) {
        LloydRun run = run_lloyd(values, weights, std::move(init), max_iters);
        if (!have_best || run.distortion < best.distortion) {
            best = std::move(run);
            have_best = true;
        }
    }
    if (distortion_trace) *distortion_trace = best.trace;
    const std::vector<double>& centroids = best.centroids;
    const std::vector<std::uint32_t>& level_of = best.level_of;

    QuantizedMatrix q;
    q.rows = matrix.rows();
    q.cols = matrix.cols();
    q.bit_width = bit_width;
    q.scheme = QuantScheme::KMeans;
    q.codebook = centroids;
    q.row_entries.resize(q.rows);
    for (std::size_t i = 0; i < q.rows; ++i) {
        const auto row = matrix.row(i);
        for (std::size_t j = 0; j < q.cols; ++j) {
            const auto it = std::lower_bound(values.begin(), values.end(), row[j]);
            const std::uint32_t level = level_of[static_cast<std::size_t>(it - values.begin())];
            if (level != 0)
                q.row_entries[i].push_back({static_cast<std::uint32_t>(j), level});
        }
    }
    return q;
}

Matrix dequantize(const QuantizedMatrix& q) {
    check_quantized(q);
    Matrix out(q.rows, q.cols);
    switch (q.scheme) {
        case QuantScheme::LinearFixed: {
            const double denom = static_cast<double>(1u << q.bit_width);
            for (std::size_t i = 0; i < q.rows; ++i)
                for (const QuantEntry& e : q.row_entries[i])
                    out(i, e.col) = static_cast<double>(e.level) / denom;
            break;
        }
        case QuantScheme::NormQ: {
            // (k + eps * 2^b) / sum_j (k_j + eps * 2^b): the epsilon floor in
            // level units keeps reconstruction a function of the stored
            // levels, the shape and scalar epsilon only.
            const double floor_level = q.epsilon * static_cast<double>(1u << q.bit_width);
            for (std::size_t i = 0; i < q.rows; ++i) {
                auto row = out.row(i);
                for (double& v : row) v = floor_level;
                for (const QuantEntry& e : q.row_entries[i])
                    row[e.col] += static_cast<double>(e.level);
                double sum = 0.0;
                for (double v : row) sum += v;
                for (double& v : row) v /= sum;
                renorm_row(row);
            }
            break;
        }
        case QuantScheme::KMeans: {
            const double omitted = q.codebook[0];
            for (std::size_t i = 0; i < q.rows; ++i) {
                auto row = out.row(i);
                for (double& v : row) v = omitted;
                for (const QuantEntry& e : q.row_entries[i]) row[e.col] = q.codebook[e.level];
            }
            break;
        }
    }
    return out;
}

Matrix normalize_rows(const Matrix& matrix, double epsilon) {
    if (epsilon < 0.0) throw ConfigError("epsilon must be non-negative");
    Matrix out(matrix.rows(), matrix.cols());
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        const auto src = matrix.row(i);
        auto dst = out.row(i);
        double sum = 0.0;
        for (std::size_t j = 0; j < src.size(); ++j) {
            if (!std::isfinite(src[j]) || src[j] < 0.0)
                throw DomainError("normalize_rows requires finite non-negative entries");
            dst[j] = src[j] + epsilon;
            sum += dst[j];
        }
        if (sum <= 0.0) {
            // only reachable with epsilon == 0 on an all-zero row
            const double u = 1.0 / static_cast<double>(dst.size());
            for (double& v : dst) v = u;
            continue;
        }
        for (double& v : dst) v /= sum;
        renorm_row(dst);
    }
    return out;
}

LayerwiseQuantized layerwise_int_quantize(std::span<const double> values, int bit_width) {
    check_bit_width(bit_width);
    double max_abs = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw DomainError("layerwise_int_quantize requires finite values");
        max_abs = std::max(max_abs, std::abs(v));
    }
    LayerwiseQuantized q;
    q.values.reserve(values.size());
    if (max_abs == 0.0) {
        q.scale = 1.0;
        q.values.assign(values.size(), 0);
        return q;
    }
    const double cap = static_cast<double>(max_level(bit_width));
    q.scale = cap / max_abs;
    for (double v : values) {
        double r = std::round(v * q.scale);
        r = std::clamp(r, -cap, cap);
        q.values.push_back(static_cast<std::int64_t>(r));
    }
    return q;
}

std::vector<double> layerwise_dequantize(const LayerwiseQuantized& q) {
    std::vector<double> out;
    out.reserve(q.values.size());
    for (std::int64_t v : q.values) out.push_back(static_cast<double>(v) / q.scale);
    return out;
}

RowKl kl_divergence_rows(const Matrix& p, const Matrix& q, double epsilon) {
    if (p.rows() != q.rows() || p.cols() != q.cols())
        throw DomainError("kl_divergence_rows shape mismatch");
    RowKl result;
    result.per_row.reserve(p.rows());
    double total = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        const auto pr = p.row(i);
        const auto qr = q.row(i);
        double kl = 0.0;
        for (std::size_t j = 0; j < pr.size(); ++j) {
            if (pr[j] <= 0.0) continue;
            kl += pr[j] * (std::log(pr[j]) - std::log(std::max(qr[j], epsilon)));
        }
        kl = std::max(kl, 0.0);
        result.per_row.push_back(kl);
        total += kl;
    }
    result.mean = p.rows() == 0 ? 0.0 : total / static_cast<double>(p.rows());
    return result;
}

SparsityReport sparsity(const Matrix& matrix) {
    SparsityReport r;
    r.total_entries = matrix.size();
    for (std::size_t k = 0; k < matrix.size(); ++k)
        if (matrix.data()[k] == 0.0) ++r.zero_entries;
    r.sparsity = r.total_entries == 0
                     ? 0.0
                     : static_cast<double>(r.zero_entries) / static_cast<double>(r.total_entries);
    return r;
}

SparsityReport sparsity(const QuantizedMatrix& q) {
    SparsityReport r;
    r.total_entries = q.total_entries();
    r.zero_entries = r.total_entries - q.stored_entries();
    r.sparsity = r.total_entries == 0
                     ? 0.0
                     : static_cast<double>(r.zero_entries) / static_cast<double>(r.total_entries);
    return r;
}

namespace {

Matrix initial_as_matrix(const HmmModel& model) {
    Matrix m(1, model.hidden_size);
    for (std::size_t j = 0; j < model.hidden_size; ++j) m(0, j) = model.initial[j];
    return m;
}

QuantizedMatrix quantize_one(const Matrix& m, QuantScheme scheme, int bit_width, double epsilon,
                             std::size_t kmeans_max_iters, std::uint64_t seed) {
    switch (scheme) {
        case QuantScheme::LinearFixed: return quantize_linear_fixed(m, bit_width);
        case QuantScheme::NormQ: return norm_q(m, bit_width, epsilon);
        case QuantScheme::KMeans: return kmeans_quantize(m, bit_width, kmeans_max_iters, seed);
    }
    throw ConfigError("unknown quantization scheme");
}

}  // namespace

QuantizedModel quantize_model(const HmmModel& model, QuantScheme scheme, int bit_width,
                              double epsilon, std::size_t kmeans_max_iters, std::uint64_t seed) {
    QuantizedModel qm;
    qm.initial =
        quantize_one(initial_as_matrix(model), scheme, bit_width, epsilon, kmeans_max_iters, seed);
    qm.transition =
        quantize_one(model.transition, scheme, bit_width, epsilon, kmeans_max_iters, seed + 1);
    qm.emission =
        quantize_one(model.emission, scheme, bit_width, epsilon, kmeans_max_iters, seed + 2);
    return qm;
}

HmmModel dequantize_model(const QuantizedModel& qm) {
    if (qm.initial.rows != 1 || qm.initial.cols != qm.transition.rows ||
        qm.transition.rows != qm.transition.cols || qm.emission.rows != qm.transition.rows)
        throw FormatError("quantized model shapes inconsistent");
    HmmModel model;
    model.hidden_size = qm.transition.rows;
    model.vocab_size = qm.emission.cols;
    const Matrix init = dequantize(qm.initial);
    model.initial.assign(init.row(0).begin(), init.row(0).end());
    model.transition = dequantize(qm.transition);
    model.emission = dequantize(qm.emission);
    return model;
}

double reconstruction_distortion(const Matrix& original, const QuantizedMatrix& q) {
    if (original.rows() != q.rows || original.cols() != q.cols)
        throw DomainError("reconstruction_distortion shape mismatch");
    const Matrix recon = dequantize(q);
    double distortion = 0.0;
    for (std::size_t k = 0; k < recon.size(); ++k) {
        const double d = recon.data()[k] - original.data()[k];
        distortion += d * d;
    }
    return distortion;
}

}  // namespace normq

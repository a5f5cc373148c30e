// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "normq/model_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "normq/common.hpp"

namespace normq {

namespace {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

class Writer {
  public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw FormatError("cannot open " + path + " for writing");
        path_ = path;
    }

    void bytes(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        offset_ += n;
    }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void f64(double v) { bytes(&v, 8); }

    std::size_t offset() const { return offset_; }

    void finish() {
        out_.flush();
        if (!out_) throw FormatError("write failure on " + path_);
    }

  private:
    std::ofstream out_;
    std::string path_;
    std::size_t offset_ = 0;
};

class Reader {
  public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw FormatError("cannot open " + path);
    }

    void bytes(void* data, std::size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw FormatError("truncated file: unexpected end at byte offset " +
                              std::to_string(offset_ + static_cast<std::size_t>(in_.gcount())));
        offset_ += n;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        bytes(&v, 8);
        return v;
    }
    double f64() {
        double v;
        bytes(&v, 8);
        return v;
    }

    std::size_t offset() const { return offset_; }

    void expect_eof() {
        char c;
        in_.read(&c, 1);
        if (in_.gcount() != 0)
            throw FormatError("trailing data at byte offset " + std::to_string(offset_));
    }

  private:
    std::ifstream in_;
    std::size_t offset_ = 0;
};

std::size_t packed_level_bytes(int bit_width, std::size_t count) {
    return (static_cast<std::size_t>(bit_width) * count + 7) / 8;
}

// Levels are packed most-significant-bit first, padded per row.
std::vector<std::uint8_t> pack_levels(const std::vector<QuantEntry>& entries, int bit_width) {
    std::vector<std::uint8_t> out(packed_level_bytes(bit_width, entries.size()), 0);
    std::size_t bit_pos = 0;
    for (const QuantEntry& e : entries) {
        for (int b = bit_width - 1; b >= 0; --b) {
            if ((e.level >> b) & 1u) out[bit_pos / 8] |= static_cast<std::uint8_t>(0x80u >> (bit_pos % 8));
            ++bit_pos;
        }
    }
    return out;
}

void unpack_levels(const std::vector<std::uint8_t>& bytes, int bit_width,
                   std::vector<QuantEntry>& entries) {
    std::size_t bit_pos = 0;
    for (QuantEntry& e : entries) {
        std::uint32_t level = 0;
        for (int b = 0; b < bit_width; ++b) {
            level <<= 1;
            if (bytes[bit_pos / 8] & (0x80u >> (bit_pos % 8))) level |= 1u;
            ++bit_pos;
        }
        e.level = level;
    }
}

std::size_t matrix_payload_bytes(const QuantizedMatrix& q) {
    std::size_t n = 8 * q.rows;  // offset table
    for (const auto& row : q.row_entries)
        n += 4 + 4 * row.size() + packed_level_bytes(q.bit_width, row.size());
    n += 8;  // epsilon
    if (q.scheme == QuantScheme::KMeans) n += 4 + 8 * q.codebook.size();
    return n;
}

void write_quantized_matrix(Writer& w, const QuantizedMatrix& q) {
    std::uint64_t offset = 0;
    for (const auto& row : q.row_entries) {
        w.u64(offset);
        offset += 4 + 4 * row.size() + packed_level_bytes(q.bit_width, row.size());
    }
    for (const auto& row : q.row_entries) {
        w.u32(static_cast<std::uint32_t>(row.size()));
        for (const QuantEntry& e : row) w.u32(e.col);
        const auto packed = pack_levels(row, q.bit_width);
        if (!packed.empty()) w.bytes(packed.data(), packed.size());
    }
    w.f64(q.epsilon);
    if (q.scheme == QuantScheme::KMeans) {
        w.u32(static_cast<std::uint32_t>(q.codebook.size()));
        for (double c : q.codebook) w.f64(c);
    }
}

QuantizedMatrix read_quantized_matrix(Reader& r, std::size_t rows, std::size_t cols,
                                      int bit_width, QuantScheme scheme) {
    QuantizedMatrix q;
    q.rows = rows;
    q.cols = cols;
    q.bit_width = bit_width;
    q.scheme = scheme;
    q.row_entries.resize(rows);

    std::vector<std::uint64_t> offsets(rows);
    for (std::size_t i = 0; i < rows; ++i) offsets[i] = r.u64();
    std::uint64_t expected = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        if (offsets[i] != expected)
            throw FormatError("row offset table corrupt at byte offset " +
                              std::to_string(r.offset()));
        const std::uint32_t count = r.u32();
        if (count > cols)
            throw FormatError("row entry count exceeds columns at byte offset " +
                              std::to_string(r.offset()));
        auto& entries = q.row_entries[i];
        entries.resize(count);
        for (std::uint32_t k = 0; k < count; ++k) entries[k].col = r.u32();
        std::vector<std::uint8_t> packed(packed_level_bytes(bit_width, count));
        if (!packed.empty()) r.bytes(packed.data(), packed.size());
        unpack_levels(packed, bit_width, entries);
        expected += 4 + 4ull * count + packed.size();
    }
    q.epsilon = r.f64();
    if (scheme == QuantScheme::KMeans) {
        const std::uint32_t size = r.u32();
        q.codebook.resize(size);
        for (std::uint32_t k = 0; k < size; ++k) q.codebook[k] = r.f64();
    }
    return q;
}

void write_header(Writer& w, std::uint32_t hidden, std::uint32_t vocab, std::uint32_t precision,
                  std::uint32_t scheme) {
    w.bytes(kModelMagic, 4);
    w.u32(kModelVersion);
    w.u32(hidden);
    w.u32(vocab);
    w.u32(precision);
    w.u32(scheme);
}

}  // namespace

void save_model(const std::string& path, const HmmModel& model) {
    Writer w(path);
    write_header(w, static_cast<std::uint32_t>(model.hidden_size),
                 static_cast<std::uint32_t>(model.vocab_size), 0, 0);
    for (double v : model.initial) w.f64(v);
    for (std::size_t k = 0; k < model.transition.size(); ++k) w.f64(model.transition.data()[k]);
    for (std::size_t k = 0; k < model.emission.size(); ++k) w.f64(model.emission.data()[k]);
    w.finish();
}

void save_model(const std::string& path, const QuantizedModel& model) {
    const std::size_t hidden = model.transition.rows;
    const std::size_t vocab = model.emission.cols;
    if (model.initial.rows != 1 || model.initial.cols != hidden ||
        model.transition.cols != hidden || model.emission.rows != hidden)
        throw FormatError("quantized model shapes inconsistent");
    if (model.initial.bit_width != model.transition.bit_width ||
        model.transition.bit_width != model.emission.bit_width ||
        model.initial.scheme != model.transition.scheme ||
        model.transition.scheme != model.emission.scheme)
        throw FormatError("quantized model matrices disagree on precision or scheme");

    Writer w(path);
    write_header(w, static_cast<std::uint32_t>(hidden), static_cast<std::uint32_t>(vocab),
                 static_cast<std::uint32_t>(model.initial.bit_width),
                 static_cast<std::uint32_t>(model.initial.scheme));
    write_quantized_matrix(w, model.initial);
    write_quantized_matrix(w, model.transition);
    write_quantized_matrix(w, model.emission);
    w.finish();
}

LoadedModel load_model(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kModelMagic, 4) != 0)
        throw FormatError("bad magic at byte offset 0 in " + path);
    const std::uint32_t version = r.u32();
    if (version != kModelVersion)
        throw FormatError("unsupported version " + std::to_string(version) +
                          " at byte offset 4");
    const std::uint32_t hidden = r.u32();
    const std::uint32_t vocab = r.u32();
    const std::uint32_t precision = r.u32();
    const std::uint32_t scheme_tag = r.u32();
    if (hidden == 0 || vocab == 0)
        throw FormatError("zero model dimension at byte offset 8");

    if (precision == 0) {
        if (scheme_tag != 0)
            throw FormatError("dense file carries a quantization scheme at byte offset 20");
        HmmModel model;
        model.hidden_size = hidden;
        model.vocab_size = vocab;
        model.initial.resize(hidden);
        for (double& v : model.initial) v = r.f64();
        model.transition = Matrix(hidden, hidden);
        for (std::size_t k = 0; k < model.transition.size(); ++k)
            model.transition.data()[k] = r.f64();
        model.emission = Matrix(hidden, vocab);
        for (std::size_t k = 0; k < model.emission.size(); ++k)
            model.emission.data()[k] = r.f64();
        r.expect_eof();
        return model;
    }

    if (precision > 24)
        throw FormatError("bit width " + std::to_string(precision) + " at byte offset 16");
    if (scheme_tag < 1 || scheme_tag > 3)
        throw FormatError("unknown scheme tag " + std::to_string(scheme_tag) +
                          " at byte offset 20");
    const QuantScheme scheme = static_cast<QuantScheme>(scheme_tag);
    const int b = static_cast<int>(precision);
    QuantizedModel model;
    model.initial = read_quantized_matrix(r, 1, hidden, b, scheme);
    model.transition = read_quantized_matrix(r, hidden, hidden, b, scheme);
    model.emission = read_quantized_matrix(r, hidden, vocab, b, scheme);
    r.expect_eof();
    return model;
}

HmmModel load_model_dense(const std::string& path) {
    LoadedModel loaded = load_model(path);
    if (std::holds_alternative<HmmModel>(loaded)) return std::get<HmmModel>(std::move(loaded));
    return dequantize_model(std::get<QuantizedModel>(loaded));
}

std::size_t serialized_size_bytes(const QuantizedModel& model) {
    return 24 + matrix_payload_bytes(model.initial) + matrix_payload_bytes(model.transition) +
           matrix_payload_bytes(model.emission);
}

std::size_t serialized_size_bytes(const HmmModel& model) {
    return 24 + 8 * (model.hidden_size + model.hidden_size * model.hidden_size +
                     model.hidden_size * model.vocab_size);
}

Corpus load_corpus(const std::string& path, std::size_t vocab_size, std::size_t num_chunks) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open corpus file " + path);
    Corpus corpus;
    corpus.num_chunks = num_chunks == 0 ? 1 : num_chunks;
    std::size_t max_token = 0;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        TokenSequence seq;
        std::istringstream fields(line);
        std::string field;
        while (fields >> field) {
            if (field.find_first_not_of("0123456789") != std::string::npos)
                throw ParseError("non-numeric token '" + field + "' on line " +
                                 std::to_string(line_number));
            unsigned long long id = 0;
            try {
                id = std::stoull(field);
            } catch (const std::exception&) {
                throw ParseError("token '" + field + "' out of range on line " +
                                 std::to_string(line_number));
            }
            if (vocab_size != 0 && id >= vocab_size)
                throw ParseError("token id " + std::to_string(id) + " >= vocab size " +
                                 std::to_string(vocab_size) + " on line " +
                                 std::to_string(line_number));
            max_token = std::max(max_token, static_cast<std::size_t>(id));
            seq.push_back(static_cast<Token>(id));
        }
        corpus.sequences.push_back(std::move(seq));
    }
    if (corpus.sequences.empty()) throw ParseError("empty corpus: " + path);
    corpus.vocab_size = vocab_size != 0 ? vocab_size : max_token + 1;
    return corpus;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    for (const auto& seq : corpus.sequences) {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            if (i) out << ' ';
            out << seq[i];
        }
        out << '\n';
    }
    if (!out.flush()) throw ParseError("write failure on " + path);
}

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

namespace {

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    return out;
}

std::string opt_str(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

}  // namespace

void write_run_record_csv(const std::string& path, const EmRunRecord& record) {
    auto out = open_csv(path);
    out << "step,chunk,train_lld_per_token,test_lld_per_token,quant_event,"
           "lld_pre_quant,lld_post_quant\n";
    for (const EmStepEntry& e : record.steps)
        out << e.step << ',' << e.chunk << ',' << format_double(e.train_lld_per_token) << ','
            << opt_str(e.test_lld_per_token) << ',' << (e.quant_event ? 1 : 0) << ','
            << opt_str(e.lld_pre_quant) << ',' << opt_str(e.lld_post_quant) << '\n';
}

void write_compression_csv(const std::string& path, const CompressionReport& report) {
    auto out = open_csv(path);
    out << "matrix,rows,cols,sparsity,bit_width,paper_rate,storage_rate\n";
    for (const MatrixCompression& m : report.matrices)
        out << m.name << ',' << m.rows << ',' << m.cols << ',' << format_double(m.sparsity) << ','
            << m.bit_width << ',' << format_double(m.paper_rate) << ",\n";
    out << "all,,,," << report.bit_width << ',' << format_double(report.paper_rate) << ','
        << (report.has_storage_rate ? format_double(report.storage_rate) : std::string()) << '\n';
}

void write_sparsity_sweep_csv(const std::string& path,
                              const std::vector<SparsitySweepRow>& table) {
    auto out = open_csv(path);
    out << "bit_width,initial_sparsity,transition_sparsity,emission_sparsity\n";
    for (const SparsitySweepRow& row : table)
        out << row.bit_width << ',' << format_double(row.initial_sparsity) << ','
            << format_double(row.transition_sparsity) << ','
            << format_double(row.emission_sparsity) << '\n';
}

void write_comparison_csv(const std::string& path, const ComparisonRecord& r) {
    auto out = open_csv(path);
    out << "ref_lld,cand_lld,delta_lld,ref_impossible,cand_impossible,"
           "kl_initial,kl_transition,kl_emission,"
           "sparsity_initial,sparsity_transition,sparsity_emission,"
           "bit_width,paper_rate,storage_rate\n";
    out << format_double(r.ref_lld) << ',' << format_double(r.cand_lld) << ','
        << format_double(r.delta_lld) << ',' << r.ref_impossible << ',' << r.cand_impossible << ','
        << format_double(r.kl_initial) << ',' << format_double(r.kl_transition) << ','
        << format_double(r.kl_emission) << ',' << format_double(r.sparsity_initial) << ','
        << format_double(r.sparsity_transition) << ',' << format_double(r.sparsity_emission) << ','
        << r.compression.bit_width << ',' << format_double(r.compression.paper_rate) << ','
        << (r.compression.has_storage_rate ? format_double(r.compression.storage_rate)
                                           : std::string())
        << '\n';
}

}  // namespace normq

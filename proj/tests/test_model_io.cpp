// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "normq/model_io.hpp"

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "normq/common.hpp"
#include "normq/rng.hpp"

using namespace normq;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("normq_test_" + std::to_string(splitmix64(std::random_device{}())));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("dense model files round-trip bit-identically") {
    TempDir dir;
    const HmmModel m = make_random_model(5, 9, 2024);
    const std::string path = dir.file("dense.nqhm");
    save_model(path, m);
    CHECK(fs::file_size(path) == serialized_size_bytes(m));
    const LoadedModel loaded = load_model(path);
    REQUIRE(std::holds_alternative<HmmModel>(loaded));
    CHECK(std::get<HmmModel>(loaded) == m);
}

TEST_CASE("quantized model files round-trip exactly and match the size formula") {
    TempDir dir;
    for (int b : {1, 3, 8, 13, 24}) {
        const HmmModel m = make_random_model(6, 17, 3000 + b);
        const QuantizedModel qm = quantize_model(m, QuantScheme::NormQ, b, 1e-12);
        const std::string path = dir.file("q" + std::to_string(b) + ".nqhm");
        save_model(path, qm);
        CHECK(fs::file_size(path) == serialized_size_bytes(qm));

        const LoadedModel loaded = load_model(path);
        REQUIRE(std::holds_alternative<QuantizedModel>(loaded));
        const QuantizedModel& back = std::get<QuantizedModel>(loaded);
        CHECK(back.transition.row_entries == qm.transition.row_entries);
        CHECK(back.emission.row_entries == qm.emission.row_entries);
        CHECK(back.initial.row_entries == qm.initial.row_entries);
        CHECK(back.transition.epsilon == qm.transition.epsilon);
        // dequantization is a pure function of the stored form
        CHECK(dequantize_model(back) == dequantize_model(qm));
    }
}

TEST_CASE("kmeans files carry their codebook") {
    TempDir dir;
    const HmmModel m = make_random_model(4, 11, 4000);
    const QuantizedModel qm = quantize_model(m, QuantScheme::KMeans, 4, 1e-12);
    const std::string path = dir.file("kmeans.nqhm");
    save_model(path, qm);
    CHECK(fs::file_size(path) == serialized_size_bytes(qm));
    const QuantizedModel back = std::get<QuantizedModel>(load_model(path));
    CHECK(back.emission.codebook == qm.emission.codebook);
    CHECK(dequantize_model(back) == dequantize_model(qm));
}

TEST_CASE("load_model_dense reconstructs quantized files") {
    TempDir dir;
    const HmmModel m = make_random_model(3, 7, 4100);
    const QuantizedModel qm = quantize_model(m, QuantScheme::NormQ, 6, 1e-12);
    const std::string path = dir.file("dq.nqhm");
    save_model(path, qm);
    CHECK(load_model_dense(path) == dequantize_model(qm));
}

TEST_CASE("corrupt files report the byte offset") {
    TempDir dir;
    const HmmModel m = make_random_model(3, 5, 5000);
    const std::string path = dir.file("model.nqhm");
    save_model(path, m);

    {  // bad magic
        std::string bytes = slurp(path);
        bytes[0] = 'X';
        std::ofstream(dir.file("bad_magic.nqhm"), std::ios::binary) << bytes;
        CHECK_THROWS_WITH_AS(load_model(dir.file("bad_magic.nqhm")),
                             doctest::Contains("bad magic"), FormatError);
    }
    {  // truncation: no partial model escapes
        std::string bytes = slurp(path);
        bytes.resize(bytes.size() / 2);
        std::ofstream(dir.file("truncated.nqhm"), std::ios::binary) << bytes;
        CHECK_THROWS_WITH_AS(load_model(dir.file("truncated.nqhm")),
                             doctest::Contains("byte offset"), FormatError);
    }
    {  // unsupported version
        std::string bytes = slurp(path);
        bytes[4] = 99;
        std::ofstream(dir.file("version.nqhm"), std::ios::binary) << bytes;
        CHECK_THROWS_WITH_AS(load_model(dir.file("version.nqhm")),
                             doctest::Contains("version"), FormatError);
    }
    {  // trailing garbage
        std::string bytes = slurp(path) + "junk";
        std::ofstream(dir.file("trailing.nqhm"), std::ios::binary) << bytes;
        CHECK_THROWS_WITH_AS(load_model(dir.file("trailing.nqhm")),
                             doctest::Contains("trailing data"), FormatError);
    }
}

TEST_CASE("load_corpus parses token records") {
    TempDir dir;
    const std::string path = dir.file("corpus.txt");
    std::ofstream(path) << "0 1 2\n1 1\n";
    const Corpus corpus = load_corpus(path);
    REQUIRE(corpus.sequences.size() == 2);
    CHECK(corpus.sequences[0] == TokenSequence{0, 1, 2});
    CHECK(corpus.sequences[1] == TokenSequence{1, 1});
    CHECK(corpus.vocab_size == 3);  // inferred as max id + 1
}

TEST_CASE("load_corpus rejects malformed input with line numbers") {
    TempDir dir;
    {
        const std::string path = dir.file("empty.txt");
        std::ofstream(path) << "";
        CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("empty corpus"), ParseError);
    }
    {
        const std::string path = dir.file("alpha.txt");
        std::ofstream(path) << "0 1\n2 x 1\n";
        CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("line 2"), ParseError);
    }
    {
        const std::string path = dir.file("range.txt");
        std::ofstream(path) << "0 1\n2 9\n";
        CHECK_THROWS_WITH_AS(load_corpus(path, 4), doctest::Contains("line 2"), ParseError);
    }
}

TEST_CASE("corpus files round-trip through save and load") {
    TempDir dir;
    const HmmModel m = make_random_model(3, 6, 6000);
    const Corpus corpus = sample_corpus(m, 25, 7, 6001, 5);
    const std::string path = dir.file("round.txt");
    save_corpus(path, corpus);
    const Corpus back = load_corpus(path, corpus.vocab_size, corpus.num_chunks);
    CHECK(back.sequences == corpus.sequences);
    CHECK(back.num_chunks == corpus.num_chunks);
}

TEST_CASE("CSV writers are byte-deterministic") {
    TempDir dir;
    EmRunRecord record;
    for (std::size_t i = 1; i <= 4; ++i) {
        EmStepEntry e;
        e.step = i;
        e.chunk = (i - 1) % 2;
        e.train_lld_per_token = -1.0 / static_cast<double>(i);
        e.test_lld_per_token = -2.0 / static_cast<double>(i);
        e.quant_event = i % 2 == 0;
        if (e.quant_event) {
            e.lld_pre_quant = e.train_lld_per_token + 0.01;
            e.lld_post_quant = e.train_lld_per_token - 0.05;
        }
        record.steps.push_back(e);
    }
    write_run_record_csv(dir.file("a.csv"), record);
    write_run_record_csv(dir.file("b.csv"), record);
    const std::string a = slurp(dir.file("a.csv"));
    CHECK(a == slurp(dir.file("b.csv")));
    CHECK(a.starts_with(
        "step,chunk,train_lld_per_token,test_lld_per_token,quant_event,"
        "lld_pre_quant,lld_post_quant\n"));

    const HmmModel m = make_random_model(4, 8, 6100);
    write_sparsity_sweep_csv(dir.file("sweep.csv"), sparsity_sweep(m, {8, 4}));
    CHECK(slurp(dir.file("sweep.csv"))
              .starts_with("bit_width,initial_sparsity,transition_sparsity,emission_sparsity\n"));

    write_compression_csv(dir.file("comp.csv"),
                          compression_report(quantize_model(m, QuantScheme::NormQ, 8, 1e-12)));
    CHECK(slurp(dir.file("comp.csv"))
              .starts_with("matrix,rows,cols,sparsity,bit_width,paper_rate,storage_rate\n"));
}

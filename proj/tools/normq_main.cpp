// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface over the normq library: sample synthetic corpora,
// train (plain or quantization-aware) HMMs, quantize saved models, evaluate
// compressed models against references, run constrained decoding, and sweep
// bit width x quantization interval grids. Every run is reproducible from
// one --seed; all metric outputs are CSV.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "normq/common.hpp"
#include "normq/guidance.hpp"
#include "normq/metrics.hpp"
#include "normq/model_io.hpp"
#include "normq/rng.hpp"
#include "normq/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace normq;

namespace {

// Values shared by the subcommands. Flags override config-file entries,
// which override the defaults below.
struct Options {
    std::string config_path;
    std::string model_path;
    std::string candidate_path;
    std::string corpus_path;
    std::string heldout_path;
    std::string out_dir = ".";
    std::string scheme = "norm-q";
    std::string quantizer = "none";  // train-time quantizer; plain EM by default
    std::string bits = "8";
    std::string intervals = "20";
    std::string keywords;
    std::size_t hidden = 0;
    std::size_t vocab = 0;
    std::size_t epochs = 1;
    std::size_t chunks = 1;
    std::size_t trials = 500;
    std::size_t max_len = 12;
    std::size_t count = 1000;
    double epsilon = 1e-12;
    double ratio = 0.0;
    double smoothing = 1e-9;
    bool renorm = false;
    std::uint64_t seed = 0;
};

struct OptionBinding {
    CLI::Option* opt = nullptr;
    std::function<void(const json&)> from_json;
};

class OptionSet {
  public:
    explicit OptionSet(CLI::App* cmd, Options& values) : cmd_(cmd), values_(values) {
        cmd->add_option("--config", values_.config_path, "JSON config file; flags override it");
    }

    template <class T>
    CLI::Option* add(const std::string& flag, T& field, const std::string& help) {
        CLI::Option* opt = cmd_->add_option(flag, field, help);
        const std::string key = json_key(flag);
        bindings_.push_back({opt, [&field, key](const json& cfg) {
                                 if (cfg.contains(key)) field = cfg.at(key).get<T>();
                             }});
        return opt;
    }

    CLI::Option* add_flag(const std::string& flag, bool& field, const std::string& help) {
        CLI::Option* opt = cmd_->add_flag(flag, field, help);
        const std::string key = json_key(flag);
        bindings_.push_back({opt, [&field, key](const json& cfg) {
                                 if (cfg.contains(key)) field = cfg.at(key).get<bool>();
                             }});
        return opt;
    }

    // config values fill in whatever the command line left untouched
    void apply_config() {
        if (values_.config_path.empty()) return;
        std::ifstream in(values_.config_path);
        if (!in) throw ConfigError("cannot open config file " + values_.config_path);
        json cfg;
        try {
            cfg = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("config file " + values_.config_path + ": " + e.what());
        }
        for (const auto& binding : bindings_)
            if (binding.opt->count() == 0) binding.from_json(cfg);
    }

  private:
    static std::string json_key(const std::string& flag) {
        // last long name, "--max-len" -> "max_len"
        std::string name = flag.substr(flag.rfind("--") + 2);
        const auto comma = name.find(',');
        if (comma != std::string::npos) name = name.substr(0, comma);
        for (char& c : name)
            if (c == '-') c = '_';
        return name;
    }

    CLI::App* cmd_;
    Options& values_;
    std::vector<OptionBinding> bindings_;
};

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
    std::vector<int> out;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        if (token.empty()) continue;
        try {
            out.push_back(std::stoi(token));
        } catch (const std::exception&) {
            throw ConfigError("cannot parse " + what + " entry '" + token + "'");
        }
    }
    if (out.empty()) throw ConfigError(what + " list is empty");
    return out;
}

int parse_single_bits(const std::string& text) {
    const auto list = parse_int_list(text, "--bits");
    if (list.size() != 1) throw ConfigError("this mode takes a single --bits value");
    return list.front();
}

// "3;5 7" -> {{3}, {5, 7}}
std::vector<TokenSequence> parse_keywords(const std::string& text) {
    std::vector<TokenSequence> keywords;
    std::string group;
    std::istringstream groups(text);
    while (std::getline(groups, group, ';')) {
        TokenSequence keyword;
        std::istringstream tokens(group);
        std::string tok;
        while (tokens >> tok) {
            for (char& c : tok)
                if (c == ',') c = ' ';
            std::istringstream sub(tok);
            unsigned long id;
            while (sub >> id) keyword.push_back(static_cast<Token>(id));
        }
        if (!keyword.empty()) keywords.push_back(std::move(keyword));
    }
    if (keywords.empty()) throw ConfigError("no keywords given (use \"3;5 7\" syntax)");
    return keywords;
}

std::string out_file(const Options& o, const std::string& name) {
    fs::create_directories(o.out_dir);
    return (fs::path(o.out_dir) / name).string();
}

Quantizer quantizer_from_name(const std::string& name) {
    if (name == "none") return Quantizer::None;
    if (name == "norm-q" || name == "normq") return Quantizer::NormQ;
    if (name == "kmeans") return Quantizer::KMeans;
    throw ConfigError("unknown quantizer '" + name + "' (none | norm-q | kmeans)");
}

HmmModel load_or_init_model(const Options& o, std::size_t vocab_from_corpus) {
    if (!o.model_path.empty()) return load_model_dense(o.model_path);
    const std::size_t vocab = o.vocab != 0 ? o.vocab : vocab_from_corpus;
    if (o.hidden == 0 || vocab == 0)
        throw ConfigError("either --model or --hidden (plus a corpus or --vocab) is required");
    return make_random_model(o.hidden, vocab, derive_seed(o.seed, "init"));
}

// ---- subcommands ----

int run_sample(const Options& o) {
    HmmModel model;
    bool created = false;
    if (!o.model_path.empty()) {
        model = load_model_dense(o.model_path);
    } else {
        if (o.hidden == 0 || o.vocab == 0)
            throw ConfigError("sample needs --model or both --hidden and --vocab");
        model = make_random_model(o.hidden, o.vocab, derive_seed(o.seed, "ground-truth"));
        created = true;
    }
    const Corpus corpus =
        sample_corpus(model, o.count, o.max_len, derive_seed(o.seed, "corpus"), o.chunks);
    const std::string corpus_path = out_file(o, "corpus.txt");
    save_corpus(corpus_path, corpus);
    std::printf("wrote %s (%zu sequences of length %zu, vocab %zu)\n", corpus_path.c_str(),
                corpus.size(), o.max_len, model.vocab_size);
    if (created) {
        const std::string model_path = out_file(o, "model.nqhm");
        save_model(model_path, model);
        std::printf("wrote %s (random %zu-state ground truth)\n", model_path.c_str(),
                    model.hidden_size);
    }
    return 0;
}

int run_train(const Options& o) {
    if (o.corpus_path.empty()) throw ConfigError("train requires --corpus");
    Corpus corpus = load_corpus(o.corpus_path, o.vocab, o.chunks);
    const HmmModel init = load_or_init_model(o, corpus.vocab_size);
    if (init.vocab_size < corpus.vocab_size)
        throw ConfigError("corpus vocabulary exceeds the model's");
    corpus.vocab_size = init.vocab_size;

    Corpus heldout;
    const bool have_heldout = !o.heldout_path.empty();
    if (have_heldout) heldout = load_corpus(o.heldout_path, init.vocab_size);

    EmConfig config;
    config.epochs = o.epochs;
    config.quantizer = quantizer_from_name(o.quantizer);
    config.bit_width = config.quantizer == Quantizer::None ? 8 : parse_single_bits(o.bits);
    const auto interval_list = parse_int_list(o.intervals, "--interval");
    if (interval_list.size() != 1 || interval_list.front() <= 0)
        throw ConfigError("train takes a single positive --interval");
    config.interval = static_cast<std::size_t>(interval_list.front());
    config.epsilon = o.epsilon;
    config.smoothing = o.smoothing;
    config.seed = o.seed;

    const TrainResult result =
        config.quantizer == Quantizer::None
            ? train(init, corpus, config, have_heldout ? &heldout : nullptr)
            : quantization_aware_train(init, corpus, config, have_heldout ? &heldout : nullptr);

    const std::string model_path = out_file(o, "model.nqhm");
    save_model(model_path, result.model);
    const std::string record_path = out_file(o, "record.csv");
    write_run_record_csv(record_path, result.record);
    std::printf("wrote %s and %s (%zu steps)\n", model_path.c_str(), record_path.c_str(),
                result.record.steps.size());
    if (result.quantized) {
        const std::string qpath = out_file(o, "model_quantized.nqhm");
        save_model(qpath, *result.quantized);
        std::printf("wrote %s (b=%d %s)\n", qpath.c_str(), result.quantized->transition.bit_width,
                    scheme_name(result.quantized->transition.scheme));
    }
    std::printf("final train LLD/token %.6f\n", result.record.steps.back().train_lld_per_token);
    if (have_heldout)
        std::printf("final held-out LLD/token %.6f\n",
                    *result.record.steps.back().test_lld_per_token);
    return 0;
}

int run_quantize(const Options& o) {
    if (o.model_path.empty()) throw ConfigError("quantize requires --model");
    const HmmModel model = load_model_dense(o.model_path);

    if (o.scheme == "prune") {
        Matrix initial(1, model.hidden_size);
        for (std::size_t z = 0; z < model.hidden_size; ++z) initial(0, z) = model.initial[z];
        HmmModel pruned = model;
        const Matrix pruned_initial = prune_ratio(initial, o.ratio, o.renorm, o.epsilon);
        pruned.initial.assign(pruned_initial.row(0).begin(), pruned_initial.row(0).end());
        pruned.transition = prune_ratio(model.transition, o.ratio, o.renorm, o.epsilon);
        pruned.emission = prune_ratio(model.emission, o.ratio, o.renorm, o.epsilon);
        const std::string path = out_file(o, "model_pruned.nqhm");
        save_model(path, pruned);
        const ValidationReport report = validate_model(pruned);
        std::printf("wrote %s (ratio %.3f%s)\n", path.c_str(), o.ratio,
                    o.renorm ? ", renormalized" : "");
        if (!report.ok())
            std::printf("validation found %zu violations:\n%s", report.violations.size(),
                        report.to_string().c_str());
        else
            std::printf("pruned model validates\n");
        return 0;
    }

    const auto scheme = scheme_from_name(o.scheme);
    if (!scheme) throw ConfigError("unknown scheme '" + o.scheme + "'");
    const int bits = parse_single_bits(o.bits);
    const QuantizedModel qm = quantize_model(model, *scheme, bits, o.epsilon, 100,
                                             derive_seed(o.seed, "kmeans"));
    const std::string path = out_file(o, "model_quantized.nqhm");
    save_model(path, qm);
    const CompressionReport report = compression_report(qm);
    const std::string csv = out_file(o, "compression.csv");
    write_compression_csv(csv, report);
    std::printf("wrote %s and %s\n", path.c_str(), csv.c_str());
    std::printf("paper-style rate %.6f%%, storage-style rate %.6f%% (%zu bytes)\n",
                report.paper_rate * 100.0, report.storage_rate * 100.0,
                serialized_size_bytes(qm));
    return 0;
}

int run_eval(const Options& o) {
    if (o.model_path.empty()) throw ConfigError("eval requires --model (the reference)");
    const HmmModel reference = load_model_dense(o.model_path);

    Corpus heldout;
    if (!o.corpus_path.empty()) {
        heldout = load_corpus(o.corpus_path, reference.vocab_size);
    } else {
        heldout =
            sample_corpus(reference, o.count, o.max_len, derive_seed(o.seed, "eval-heldout"));
        std::printf("no --corpus given; sampled %zu held-out sequences from the reference\n",
                    heldout.size());
    }

    ComparisonRecord record;
    if (!o.candidate_path.empty()) {
        const LoadedModel candidate = load_model(o.candidate_path);
        record = std::holds_alternative<QuantizedModel>(candidate)
                     ? compare_models(reference, std::get<QuantizedModel>(candidate), heldout)
                     : compare_models(reference, std::get<HmmModel>(candidate), heldout);
    } else {
        const auto scheme = scheme_from_name(o.scheme);
        if (!scheme) throw ConfigError("eval needs --candidate or a quantization --scheme");
        const int bits = parse_single_bits(o.bits);
        record = compare_models(
            reference,
            quantize_model(reference, *scheme, bits, o.epsilon, 100, derive_seed(o.seed, "kmeans")),
            heldout);
    }
    const std::string cmp_csv = out_file(o, "comparison.csv");
    write_comparison_csv(cmp_csv, record);

    // fixed column set so the sweep always has the reference table's shape
    const std::vector<int> sweep_bits = {24, 16, 12, 8, 7, 6, 5, 4, 3};
    const std::string sweep_csv = out_file(o, "sparsity_sweep.csv");
    write_sparsity_sweep_csv(sweep_csv, sparsity_sweep(reference, sweep_bits));

    std::printf("wrote %s and %s\n", cmp_csv.c_str(), sweep_csv.c_str());
    std::printf("delta LLD %.6f, impossible %zu/%zu, mean KL (gamma %.3g, alpha %.3g, beta %.3g)\n",
                record.delta_lld, record.cand_impossible, heldout.size(), record.kl_initial,
                record.kl_transition, record.kl_emission);
    return 0;
}

int run_decode(const Options& o) {
    if (o.model_path.empty()) throw ConfigError("decode requires --model");
    if (o.keywords.empty()) throw ConfigError("decode requires --keywords");
    const HmmModel model = load_model_dense(o.model_path);
    const std::vector<TokenSequence> keywords = parse_keywords(o.keywords);
    if (const auto warning = horizon_warning(keywords, o.max_len))
        std::fprintf(stderr, "warning: %s\n", warning->c_str());
    const KeywordDfa dfa = build_keyword_dfa(keywords, model.vocab_size);

    const std::uint64_t seed = derive_seed(o.seed, "decode");
    const SuccessRate guided = success_rate(model, dfa, true, o.trials, o.max_len, seed);
    const SuccessRate unguided = success_rate(model, dfa, false, o.trials, o.max_len, seed);

    const std::string path = out_file(o, "decode.csv");
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    out << "variant,trials,successes,failed_generations,rate\n";
    out << "guided," << guided.trials << ',' << guided.successes << ','
        << guided.failed_generations << ',' << format_double(guided.rate) << '\n';
    out << "unguided," << unguided.trials << ',' << unguided.successes << ','
        << unguided.failed_generations << ',' << format_double(unguided.rate) << '\n';
    std::printf("wrote %s\n", path.c_str());
    std::printf("guided %.4f, unguided %.4f over %zu trials (DFA states: %zu)\n", guided.rate,
                unguided.rate, o.trials, dfa.num_states);
    return 0;
}

int run_sweep(const Options& o) {
    if (o.corpus_path.empty()) throw ConfigError("sweep requires --corpus");
    Corpus corpus = load_corpus(o.corpus_path, o.vocab, o.chunks);
    const HmmModel init = load_or_init_model(o, corpus.vocab_size);
    corpus.vocab_size = init.vocab_size;
    Corpus heldout;
    const bool have_heldout = !o.heldout_path.empty();
    if (have_heldout) heldout = load_corpus(o.heldout_path, init.vocab_size);

    const std::vector<int> bits = parse_int_list(o.bits, "--bits");
    const std::vector<int> intervals = parse_int_list(o.intervals, "--intervals");
    const Quantizer quantizer = o.scheme == "norm-q" || o.scheme == "normq"
                                    ? Quantizer::NormQ
                                    : quantizer_from_name(o.scheme);
    if (quantizer == Quantizer::None) throw ConfigError("sweep needs a quantizer, not none");

    const std::string path = out_file(o, "sweep.csv");
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    out << "bit_width,interval,steps,events,final_train_lld_per_token,"
           "final_heldout_lld_per_seq,gap_upper,gap_lower,gap\n";
    for (const int b : bits) {
        for (const int interval : intervals) {
            if (interval <= 0) throw ConfigError("intervals must be positive");
            EmConfig config;
            config.epochs = o.epochs;
            config.quantizer = quantizer;
            config.bit_width = b;
            config.interval = static_cast<std::size_t>(interval);
            config.epsilon = o.epsilon;
            config.smoothing = o.smoothing;
            config.seed = o.seed;
            const TrainResult r = quantization_aware_train(init, corpus, config);
            std::size_t events = 0;
            for (const auto& e : r.record.steps)
                if (e.quant_event) ++events;
            std::string heldout_field;
            if (have_heldout)
                heldout_field = format_double(test_loglik(r.model, heldout).mean_per_sequence);
            std::string gap_upper, gap_lower, gap;
            if (events >= 2) {
                const LldGapReport g = lld_gap(r.record);
                gap_upper = format_double(g.upper);
                gap_lower = format_double(g.lower);
                gap = format_double(g.gap);
            }
            out << b << ',' << interval << ',' << r.record.steps.size() << ',' << events << ','
                << format_double(r.record.steps.back().train_lld_per_token) << ','
                << heldout_field << ',' << gap_upper << ',' << gap_lower << ',' << gap << '\n';
            std::printf("b=%d interval=%d: final train LLD/token %.6f (%zu events)\n", b,
                        interval, r.record.steps.back().train_lld_per_token, events);
        }
    }
    std::printf("wrote %s (%zu rows)\n", path.c_str(), bits.size() * intervals.size());
    return 0;
}

// Accept "--mode train ..." as an alias for the "train ..." subcommand form.
std::vector<std::string> rewrite_mode_flag(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string value;
        if (args[i] == "--mode" && i + 1 < args.size()) {
            value = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                       args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
        } else if (args[i].starts_with("--mode=")) {
            value = args[i].substr(7);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            continue;
        }
        args.insert(args.begin(), value);
        break;
    }
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete-HMM training, Norm-Q compression and evaluation toolkit"};
    app.require_subcommand(1);

    Options o;
    auto add_common = [&o](CLI::App* cmd) {
        auto set = std::make_shared<OptionSet>(cmd, o);
        set->add("--seed", o.seed, "master seed; all randomness derives from it");
        set->add("--out", o.out_dir, "output directory");
        return set;
    };

    CLI::App* sample = app.add_subcommand("sample", "sample a synthetic corpus (and optionally "
                                                    "a fresh random model) to files");
    {
        auto set = add_common(sample);
        set->add("--model", o.model_path, "model to sample from (else --hidden/--vocab)");
        set->add("--hidden", o.hidden, "hidden size of the generated ground truth");
        set->add("--vocab", o.vocab, "vocabulary size of the generated ground truth");
        set->add("--count", o.count, "number of sequences");
        set->add("--max-len", o.max_len, "sequence length");
        set->add("--chunks", o.chunks, "chunk count recorded for training");
        sample->callback([set, &o] { set->apply_config(); });
    }

    CLI::App* train_cmd = app.add_subcommand("train", "Baum-Welch EM, optionally quantization-"
                                                      "aware; writes model + record CSV");
    {
        auto set = add_common(train_cmd);
        set->add("--corpus", o.corpus_path, "training corpus (token-id lines)");
        set->add("--heldout", o.heldout_path, "held-out corpus for per-step test LLD");
        set->add("--model", o.model_path, "initial model file (else random init via --hidden)");
        set->add("--hidden", o.hidden, "hidden size for random initialization");
        set->add("--vocab", o.vocab, "vocabulary bound (else inferred from the corpus)");
        set->add("--epochs", o.epochs, "passes over the chunk sequence");
        set->add("--chunks", o.chunks, "number of corpus chunks; one EM step per chunk");
        set->add("--quantizer,--scheme", o.quantizer, "none | norm-q | kmeans");
        set->add("--bits", o.bits, "bit width for the quantizer");
        set->add("--interval,--intervals", o.intervals, "EM steps between quantization events");
        set->add("--epsilon", o.epsilon, "norm-q epsilon");
        set->add("--smoothing", o.smoothing, "count smoothing added before the M step");
        train_cmd->callback([set, &o] { set->apply_config(); });
    }

    CLI::App* quantize_cmd = app.add_subcommand("quantize", "post-training compression of a "
                                                            "saved model");
    {
        auto set = add_common(quantize_cmd);
        set->add("--model", o.model_path, "dense model file");
        set->add("--scheme,--quantizer", o.scheme, "prune | linear | kmeans | norm-q");
        set->add("--bits", o.bits, "bit width");
        set->add("--epsilon", o.epsilon, "norm-q epsilon");
        set->add("--ratio", o.ratio, "pruning ratio in [0, 1)");
        set->add_flag("--renorm", o.renorm, "renormalize rows after pruning");
        quantize_cmd->callback([set, &o] { set->apply_config(); });
    }

    CLI::App* eval_cmd = app.add_subcommand("eval", "compare a candidate against a reference "
                                                    "and sweep stored sparsity by bit width");
    {
        auto set = add_common(eval_cmd);
        set->add("--model", o.model_path, "reference model file");
        set->add("--candidate", o.candidate_path, "candidate model file (dense or quantized)");
        set->add("--corpus", o.corpus_path, "held-out corpus (else sampled from the reference)");
        set->add("--scheme,--quantizer", o.scheme, "derive the candidate by quantizing the "
                                                   "reference with this scheme");
        set->add("--bits", o.bits, "candidate bit width, or comma list for the sparsity sweep");
        set->add("--epsilon", o.epsilon, "norm-q epsilon");
        set->add("--count", o.count, "sequences to sample when no --corpus is given");
        set->add("--max-len", o.max_len, "length of sampled held-out sequences");
        eval_cmd->callback([set, &o] { set->apply_config(); });
    }

    CLI::App* decode_cmd = app.add_subcommand("decode", "keyword-constrained generation success "
                                                        "rates, guided vs unguided");
    {
        auto set = add_common(decode_cmd);
        set->add("--model", o.model_path, "model file (dense or quantized)");
        set->add("--keywords", o.keywords, "keywords as token ids, e.g. \"3;5 7\"");
        set->add("--trials", o.trials, "generation trials per variant");
        set->add("--max-len", o.max_len, "generation horizon");
        decode_cmd->callback([set, &o] { set->apply_config(); });
    }

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "quantization-aware training across the "
                                                      "bit width x interval grid");
    {
        auto set = add_common(sweep_cmd);
        set->add("--corpus", o.corpus_path, "training corpus");
        set->add("--heldout", o.heldout_path, "held-out corpus for final LLD per cell");
        set->add("--model", o.model_path, "initial model file (else random init via --hidden)");
        set->add("--hidden", o.hidden, "hidden size for random initialization");
        set->add("--vocab", o.vocab, "vocabulary bound (else inferred from the corpus)");
        set->add("--epochs", o.epochs, "passes over the chunk sequence");
        set->add("--chunks", o.chunks, "number of corpus chunks");
        set->add("--quantizer,--scheme", o.scheme, "norm-q | kmeans");
        set->add("--bits", o.bits, "comma list of bit widths, e.g. 4,8");
        set->add("--intervals,--interval", o.intervals, "comma list, e.g. 1,2,5,20,50,100");
        set->add("--epsilon", o.epsilon, "norm-q epsilon");
        set->add("--smoothing", o.smoothing, "count smoothing added before the M step");
        sweep_cmd->callback([set, &o] { set->apply_config(); });
    }

    const std::vector<std::string> args = rewrite_mode_flag(argc, argv);
    try {
        // CLI11 parses reversed argv
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (sample->parsed()) return run_sample(o);
        if (train_cmd->parsed()) return run_train(o);
        if (quantize_cmd->parsed()) return run_quantize(o);
        if (eval_cmd->parsed()) return run_eval(o);
        if (decode_cmd->parsed()) return run_decode(o);
        if (sweep_cmd->parsed()) return run_sweep(o);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

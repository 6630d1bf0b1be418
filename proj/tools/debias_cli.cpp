// Command-line front end: dataset ingestion, debiasing runs, F1
// evaluation, and embedding-based neutrality reports.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "debias/config.hpp"
#include "debias/dataset.hpp"
#include "debias/embeddings.hpp"
#include "debias/eval.hpp"
#include "debias/pipeline.hpp"

namespace {

using debias::config::CliConfig;
using debias::config::ConfigError;
using debias::core::BiasType;
using debias::core::Sentence;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;    // configuration or input errors
constexpr int kExitPartial = 2;  // some items failed, output still written

/// Storage for the flags shared by every subcommand; applied on top of
/// the config file so flags win.
struct CommonFlags {
    std::string config_path;
    std::string backend_kind;
    std::string endpoint;
    int retries = 0;
    int backoff_ms = 0;
    int timeout_ms = 0;
    int concurrency = 0;
    std::string model_classify;
    std::map<BiasType, std::string> model_extract;
    std::map<BiasType, std::string> model_reformulate;
    std::string model_monolithic;
    double temperature = 0.0;
    double top_p = 0.0;
    int best_of = 0;
    int max_tokens = 0;
    int max_iterations = 0;
    std::string embeddings;
    std::string vocab_professions;
    std::string vocab_descriptions;
    std::string oracle_rules;
    std::string prompts;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "Config file (flat key=value)");
    cmd->add_option("--backend", f.backend_kind, "Backend kind: oracle or http")
        ->check(CLI::IsMember({"oracle", "http"}));
    cmd->add_option("--endpoint", f.endpoint, "Completions API base URL");
    cmd->add_option("--retries", f.retries, "Retry attempts after the first request")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--backoff-ms", f.backoff_ms, "Base retry backoff in ms (doubles per retry)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--timeout-ms", f.timeout_ms, "Per-request timeout in ms")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--concurrency", f.concurrency,
                    "Max in-flight requests and batch worker threads")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--model-classify", f.model_classify, "Classifier model identifier");
    cmd->add_option("--model-extract-generalization", f.model_extract[BiasType::Generalization],
                    "Extractor model for generalization bias");
    cmd->add_option("--model-extract-explicit", f.model_extract[BiasType::Explicit],
                    "Extractor model for explicit bias");
    cmd->add_option("--model-extract-benevolent", f.model_extract[BiasType::Benevolent],
                    "Extractor model for benevolent sexism");
    cmd->add_option("--model-reformulate-generalization",
                    f.model_reformulate[BiasType::Generalization],
                    "Reformulator model for generalization bias");
    cmd->add_option("--model-reformulate-explicit", f.model_reformulate[BiasType::Explicit],
                    "Reformulator model for explicit bias");
    cmd->add_option("--model-reformulate-benevolent", f.model_reformulate[BiasType::Benevolent],
                    "Reformulator model for benevolent sexism");
    cmd->add_option("--model-monolithic", f.model_monolithic,
                    "Single-prompt debiasing model identifier");
    cmd->add_option("--temperature", f.temperature, "Sampling temperature");
    cmd->add_option("--top-p", f.top_p, "Nucleus sampling mass");
    cmd->add_option("--best-of", f.best_of, "Server-side candidate count")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-tokens", f.max_tokens, "Completion length cap")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-iterations", f.max_iterations,
                    "Iteration budget for the classify/rewrite loop")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--embeddings", f.embeddings, "Word vector file (GloVe text format)");
    cmd->add_option("--vocab-professions", f.vocab_professions, "Profession vocabulary file");
    cmd->add_option("--vocab-descriptions", f.vocab_descriptions, "Description vocabulary file");
    cmd->add_option("--oracle-rules", f.oracle_rules, "Rule file for the oracle backend");
    cmd->add_option("--prompts", f.prompts, "Few-shot example dataset (canonical JSONL)");
}

CliConfig resolve_config(const CLI::App* cmd, const CommonFlags& f) {
    CliConfig cfg;
    if (cmd->count("--config") > 0) cfg = debias::config::load_config_file(f.config_path);
    auto on = [&](const char* name) { return cmd->count(name) > 0; };
    if (on("--backend")) cfg.backend_kind = f.backend_kind;
    if (on("--endpoint")) cfg.endpoint = f.endpoint;
    if (on("--retries")) cfg.retries = f.retries;
    if (on("--backoff-ms")) cfg.backoff_ms = f.backoff_ms;
    if (on("--timeout-ms")) cfg.timeout_ms = f.timeout_ms;
    if (on("--concurrency")) cfg.concurrency = f.concurrency;
    if (on("--model-classify")) cfg.model_classify = f.model_classify;
    if (on("--model-extract-generalization"))
        cfg.model_extract[BiasType::Generalization] = f.model_extract.at(BiasType::Generalization);
    if (on("--model-extract-explicit"))
        cfg.model_extract[BiasType::Explicit] = f.model_extract.at(BiasType::Explicit);
    if (on("--model-extract-benevolent"))
        cfg.model_extract[BiasType::Benevolent] = f.model_extract.at(BiasType::Benevolent);
    if (on("--model-reformulate-generalization"))
        cfg.model_reformulate[BiasType::Generalization] =
            f.model_reformulate.at(BiasType::Generalization);
    if (on("--model-reformulate-explicit"))
        cfg.model_reformulate[BiasType::Explicit] = f.model_reformulate.at(BiasType::Explicit);
    if (on("--model-reformulate-benevolent"))
        cfg.model_reformulate[BiasType::Benevolent] = f.model_reformulate.at(BiasType::Benevolent);
    if (on("--model-monolithic")) cfg.model_monolithic = f.model_monolithic;
    if (on("--temperature")) cfg.sampling.temperature = f.temperature;
    if (on("--top-p")) cfg.sampling.top_p = f.top_p;
    if (on("--best-of")) cfg.sampling.best_of = f.best_of;
    if (on("--max-tokens")) cfg.sampling.max_tokens = f.max_tokens;
    if (on("--max-iterations")) cfg.max_iterations = f.max_iterations;
    if (on("--embeddings")) cfg.path_embeddings = f.embeddings;
    if (on("--vocab-professions")) cfg.path_vocab_professions = f.vocab_professions;
    if (on("--vocab-descriptions")) cfg.path_vocab_descriptions = f.vocab_descriptions;
    if (on("--oracle-rules")) cfg.path_oracle_rules = f.oracle_rules;
    if (on("--prompts")) cfg.path_prompts = f.prompts;
    return cfg;
}

std::shared_ptr<debias::backend::CompletionBackend> build_backend(const CliConfig& cfg) {
    std::string api_key;
    if (cfg.backend_kind == "http") {
        const char* env = std::getenv("DEBIAS_API_KEY");
        if (env != nullptr) api_key = env;
    }
    return debias::config::make_backend(cfg, api_key);
}

std::shared_ptr<const debias::dataset::PromptLibrary> load_prompt_library(const CliConfig& cfg) {
    if (cfg.path_prompts.empty())
        throw ConfigError("paths.prompts (or --prompts) must point to the few-shot examples");
    std::ifstream in(cfg.path_prompts);
    if (!in) throw ConfigError("cannot open prompt examples \"" + cfg.path_prompts + "\"");
    std::vector<debias::core::SentencePair> pairs = debias::dataset::load_canonical(in);
    return std::make_shared<const debias::dataset::PromptLibrary>(
        debias::dataset::PromptLibrary::from_pairs(pairs));
}

std::vector<Sentence> read_sentence_lines(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(std::string("cannot open ") + what + " \"" + path + "\"");
    std::vector<Sentence> out;
    std::string line;
    while (std::getline(in, line)) {
        if (debias::core::trim(line).empty()) continue;
        out.emplace_back(line);
    }
    return out;
}

/// Writes to the path, or to stdout when the path is empty.
class OutputTarget {
public:
    explicit OutputTarget(const std::string& path) {
        if (path.empty()) return;
        file_.open(path);
        if (!file_) throw ConfigError("cannot open output file \"" + path + "\"");
    }

    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

// --- ingest ---

struct IngestArgs {
    std::string in_path;
    std::string format = "tsv";
    std::string out_path;
    bool filter_pronouns = false;
};

int cmd_ingest(const IngestArgs& args) {
    std::ifstream in(args.in_path);
    if (!in) throw ConfigError("cannot open input \"" + args.in_path + "\"");
    debias::dataset::PairFormat format = args.format == "tsv"
                                             ? debias::dataset::PairFormat::Tsv
                                             : debias::dataset::PairFormat::Jsonl;
    debias::dataset::LoadResult loaded = debias::dataset::load_pairs(in, format);
    std::size_t read = loaded.pairs.size() + loaded.dropped_identity;

    std::vector<debias::dataset::RawPair> kept =
        args.filter_pronouns ? debias::dataset::filter_gender_pronouns(loaded.pairs)
                             : loaded.pairs;
    std::size_t dropped_no_pronoun = loaded.pairs.size() - kept.size();

    OutputTarget out(args.out_path);
    for (const debias::dataset::RawPair& pair : kept) {
        auto [terms, substitutes] = debias::dataset::extract_term_diff(pair.biased, pair.unbiased);
        debias::core::SentencePair record{pair.biased, pair.unbiased, std::move(terms),
                                          std::move(substitutes), pair.label};
        out.stream() << debias::dataset::to_canonical_json(record) << '\n';
    }

    json counts;
    counts["read"] = read;
    counts["dropped_identity"] = loaded.dropped_identity;
    counts["dropped_no_pronoun"] = dropped_no_pronoun;
    counts["written"] = kept.size();
    std::cout << counts.dump() << '\n';
    return kExitOk;
}

// --- debias ---

struct DebiasArgs {
    std::string arch = "m3";
    std::string in_path;
    std::string out_path;
    bool trace = false;
};

int cmd_debias(const CLI::App* cmd, const CommonFlags& flags, const DebiasArgs& args) {
    CliConfig cfg = resolve_config(cmd, flags);
    debias::pipeline::Architecture arch = debias::pipeline::parse_architecture(args.arch);
    auto backend = build_backend(cfg);
    auto prompts = load_prompt_library(cfg);
    debias::pipeline::PipelineConfig pipeline_cfg =
        debias::config::make_pipeline_config(cfg, arch, backend, prompts);
    pipeline_cfg.validate();

    std::vector<Sentence> inputs = read_sentence_lines(args.in_path, "input");
    std::vector<debias::pipeline::DebiasResult> results =
        debias::pipeline::debias_batch(inputs, pipeline_cfg);

    OutputTarget out(args.out_path);
    bool any_failed = false;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!results[i].ok()) {
            any_failed = true;
            json line;
            line["input"] = inputs[i].text();
            line["error"] = results[i].error;
            out.stream() << line.dump() << '\n';
            continue;
        }
        if (args.trace) {
            out.stream() << debias::pipeline::trace_to_json(*results[i].trace) << '\n';
            continue;
        }
        json line;
        line["input"] = inputs[i].text();
        line["final_text"] = results[i].trace->final_text.text();
        line["terminated_by"] = std::string(
            debias::core::termination_reason_name(results[i].trace->terminated_by));
        out.stream() << line.dump() << '\n';
    }
    return any_failed ? kExitPartial : kExitOk;
}

// --- evaluate / compare ---

struct EvaluateArgs {
    std::vector<std::string> archs;
    std::string test_path;
    std::string report_path;
};

int cmd_evaluate(const CLI::App* cmd, const CommonFlags& flags, const EvaluateArgs& args) {
    CliConfig cfg = resolve_config(cmd, flags);
    auto backend = build_backend(cfg);
    auto prompts = load_prompt_library(cfg);

    std::ifstream test_in(args.test_path);
    if (!test_in) throw ConfigError("cannot open test set \"" + args.test_path + "\"");
    std::vector<debias::core::SentencePair> test = debias::dataset::load_canonical(test_in);

    debias::pipeline::LogicalModel judge{backend, cfg.model_classify};
    std::vector<debias::eval::EvaluationReport> reports;
    bool partial = false;
    for (const std::string& name : args.archs) {
        debias::pipeline::Architecture arch = debias::pipeline::parse_architecture(name);
        debias::pipeline::PipelineConfig pipeline_cfg =
            debias::config::make_pipeline_config(cfg, arch, backend, prompts);
        pipeline_cfg.validate();

        debias::eval::EvaluationReport report;
        report.architecture = arch;
        report.n_items = static_cast<long>(test.size());
        report.debias = debias::eval::eval_debias(test, pipeline_cfg, judge);
        partial = partial || report.debias.item_errors > 0;
        if (arch != debias::pipeline::Architecture::M1) {
            report.classification = debias::eval::eval_classification(test, pipeline_cfg);
            partial = partial || report.classification->backend_errors > 0;
        }
        if (arch == debias::pipeline::Architecture::M3) {
            report.extraction = debias::eval::eval_extraction(test, pipeline_cfg);
            partial = partial || report.extraction->backend_errors > 0;
        }
        reports.push_back(std::move(report));
    }

    std::cout << debias::eval::reports_to_text_table(reports);
    OutputTarget out(args.report_path);
    out.stream() << debias::eval::reports_to_json(reports) << '\n';
    return partial ? kExitPartial : kExitOk;
}

// --- mswn ---

struct MswnArgs {
    std::string before_path;
    std::string after_path;
    std::vector<std::string> extra_vocabs;  // NAME=PATH
    std::string report_path;
};

int cmd_mswn(const CLI::App* cmd, const CommonFlags& flags, const MswnArgs& args) {
    CliConfig cfg = resolve_config(cmd, flags);
    if (cfg.path_embeddings.empty())
        throw ConfigError("paths.embeddings (or --embeddings) must be set");
    std::ifstream emb_in(cfg.path_embeddings);
    if (!emb_in) throw ConfigError("cannot open embeddings \"" + cfg.path_embeddings + "\"");
    debias::embeddings::EmbeddingTable table = debias::embeddings::load_embeddings(emb_in);

    auto load_vocab = [](const std::string& path, const std::string& name) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open vocabulary \"" + path + "\"");
        return std::make_pair(name, debias::embeddings::load_vocabulary(in));
    };
    std::vector<std::pair<std::string, std::vector<std::string>>> vocabularies;
    if (!cfg.path_vocab_professions.empty())
        vocabularies.push_back(load_vocab(cfg.path_vocab_professions, "professions"));
    if (!cfg.path_vocab_descriptions.empty())
        vocabularies.push_back(load_vocab(cfg.path_vocab_descriptions, "descriptions"));
    for (const std::string& entry : args.extra_vocabs) {
        std::size_t eq = entry.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == entry.size())
            throw ConfigError("--vocab expects NAME=PATH, got \"" + entry + "\"");
        vocabularies.push_back(load_vocab(entry.substr(eq + 1), entry.substr(0, eq)));
    }
    if (vocabularies.empty())
        throw ConfigError("no vocabulary lists configured (set paths.vocab_* or pass --vocab)");

    std::vector<Sentence> before = read_sentence_lines(args.before_path, "before corpus");
    std::vector<Sentence> after = read_sentence_lines(args.after_path, "after corpus");
    debias::eval::MswnComparison comparison =
        debias::eval::mswn_comparison(before, after, vocabularies, table);

    std::cout << comparison.to_text_table();
    OutputTarget out(args.report_path);
    out.stream() << comparison.to_json() << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Debiases English sentences with text-completion models and reports "
                 "per-type F1 and embedding-neutrality metrics"};
    app.require_subcommand(1);

    IngestArgs ingest_args;
    CLI::App* ingest = app.add_subcommand(
        "ingest", "Convert raw sentence pairs to the canonical dataset with diffed terms");
    ingest->add_option("--in", ingest_args.in_path, "Input file")->required();
    ingest->add_option("--format", ingest_args.format, "Input format")
        ->check(CLI::IsMember({"tsv", "jsonl"}));
    ingest->add_option("--out", ingest_args.out_path, "Output JSONL (default: stdout)");
    ingest->add_flag("--filter-pronouns", ingest_args.filter_pronouns,
                     "Keep only pairs whose biased sentence has a gender pronoun");

    CommonFlags debias_flags;
    DebiasArgs debias_args;
    CLI::App* debias_cmd =
        app.add_subcommand("debias", "Run sentences through a debiasing architecture");
    add_common_flags(debias_cmd, debias_flags);
    debias_cmd->add_option("--arch", debias_args.arch, "Architecture: m1, m2, or m3");
    debias_cmd->add_option("--in", debias_args.in_path, "Input sentences, one per line")
        ->required();
    debias_cmd->add_option("--out", debias_args.out_path, "Output JSONL (default: stdout)");
    debias_cmd->add_flag("--trace", debias_args.trace, "Emit full iteration traces");

    CommonFlags evaluate_flags;
    EvaluateArgs evaluate_args;
    CLI::App* evaluate =
        app.add_subcommand("evaluate", "Score architectures on a labeled test set");
    add_common_flags(evaluate, evaluate_flags);
    evaluate->add_option("--arch", evaluate_args.archs, "Architectures to score")
        ->delimiter(',');
    evaluate->add_option("--test", evaluate_args.test_path, "Labeled test set (canonical JSONL)")
        ->required();
    evaluate->add_option("--report", evaluate_args.report_path,
                         "JSON report path (default: stdout)");

    CommonFlags compare_flags;
    EvaluateArgs compare_args;
    CLI::App* compare = app.add_subcommand(
        "compare", "Evaluate all architectures side by side (alias of evaluate)");
    add_common_flags(compare, compare_flags);
    compare->add_option("--arch", compare_args.archs, "Architectures to score")->delimiter(',');
    compare->add_option("--test", compare_args.test_path, "Labeled test set (canonical JSONL)")
        ->required();
    compare->add_option("--report", compare_args.report_path, "JSON report path (default: stdout)");

    CommonFlags mswn_flags;
    MswnArgs mswn_args;
    CLI::App* mswn = app.add_subcommand(
        "mswn", "Mean squared word neutrality of corpora against vocabulary lists");
    add_common_flags(mswn, mswn_flags);
    mswn->add_option("--before", mswn_args.before_path, "Corpus before debiasing")->required();
    mswn->add_option("--after", mswn_args.after_path, "Corpus after debiasing")->required();
    mswn->add_option("--vocab", mswn_args.extra_vocabs, "Extra vocabulary list as NAME=PATH");
    mswn->add_option("--report", mswn_args.report_path, "JSON report path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(ingest_args);
        if (debias_cmd->parsed()) return cmd_debias(debias_cmd, debias_flags, debias_args);
        if (evaluate->parsed()) {
            if (evaluate_args.archs.empty()) evaluate_args.archs = {"m3"};
            return cmd_evaluate(evaluate, evaluate_flags, evaluate_args);
        }
        if (compare->parsed()) {
            if (compare_args.archs.empty()) compare_args.archs = {"m1", "m2", "m3"};
            return cmd_evaluate(compare, compare_flags, compare_args);
        }
        if (mswn->parsed()) return cmd_mswn(mswn, mswn_flags, mswn_args);
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

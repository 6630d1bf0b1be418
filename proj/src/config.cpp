#include "debias/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace debias::config {

using core::BiasType;

namespace {

int parse_int(const std::string& key, const std::string& value, int min_value) {
    int out = 0;
    std::string trimmed = core::trim(value);
    auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), out);
    if (ec != std::errc{} || ptr != trimmed.data() + trimmed.size())
        throw ConfigError(key + ": expected an integer, got \"" + value + "\"");
    if (out < min_value)
        throw ConfigError(key + ": must be at least " + std::to_string(min_value));
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    std::string trimmed = core::trim(value);
    try {
        std::size_t used = 0;
        double out = std::stod(trimmed, &used);
        if (used != trimmed.size()) throw std::invalid_argument(trimmed);
        return out;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got \"" + value + "\"");
    }
}

BiasType biased_type_from_key(const std::string& key, const std::string& suffix) {
    BiasType type;
    try {
        type = core::parse_bias_type(suffix);
    } catch (const core::UnknownLabelError&) {
        throw ConfigError(key + ": unknown bias type \"" + suffix + "\"");
    }
    if (type == BiasType::Unbiased)
        throw ConfigError(key + ": per-type models exist only for the three bias types");
    return type;
}

}  // namespace

CliConfig::CliConfig() {
    for (BiasType type : core::kBiasedTypes) {
        model_extract[type] = "davinci";
        model_reformulate[type] = "davinci";
    }
}

void CliConfig::set(const std::string& key, const std::string& value) {
    std::string trimmed = core::trim(value);
    if (key == "backend.kind") {
        if (trimmed != "oracle" && trimmed != "http")
            throw ConfigError("backend.kind: expected \"oracle\" or \"http\", got \"" + trimmed +
                              "\"");
        backend_kind = trimmed;
    } else if (key == "backend.endpoint") {
        endpoint = trimmed;
    } else if (key == "backend.retries") {
        retries = parse_int(key, trimmed, 0);
    } else if (key == "backend.backoff_ms") {
        backoff_ms = parse_int(key, trimmed, 0);
    } else if (key == "backend.timeout_ms") {
        timeout_ms = parse_int(key, trimmed, 1);
    } else if (key == "backend.concurrency") {
        concurrency = parse_int(key, trimmed, 1);
    } else if (key == "model.classify") {
        model_classify = trimmed;
    } else if (key == "model.monolithic") {
        model_monolithic = trimmed;
    } else if (key.rfind("model.extract.", 0) == 0) {
        model_extract[biased_type_from_key(key, key.substr(14))] = trimmed;
    } else if (key.rfind("model.reformulate.", 0) == 0) {
        model_reformulate[biased_type_from_key(key, key.substr(18))] = trimmed;
    } else if (key == "sampling.temperature") {
        sampling.temperature = parse_double(key, trimmed);
        if (sampling.temperature < 0.0) throw ConfigError(key + ": must be non-negative");
    } else if (key == "sampling.top_p") {
        sampling.top_p = parse_double(key, trimmed);
        if (sampling.top_p <= 0.0 || sampling.top_p > 1.0)
            throw ConfigError(key + ": must be in (0, 1]");
    } else if (key == "sampling.best_of") {
        sampling.best_of = parse_int(key, trimmed, 1);
    } else if (key == "sampling.max_tokens") {
        sampling.max_tokens = parse_int(key, trimmed, 1);
    } else if (key == "pipeline.max_iterations") {
        max_iterations = parse_int(key, trimmed, 1);
    } else if (key == "paths.embeddings") {
        path_embeddings = trimmed;
    } else if (key == "paths.vocab_professions") {
        path_vocab_professions = trimmed;
    } else if (key == "paths.vocab_descriptions") {
        path_vocab_descriptions = trimmed;
    } else if (key == "paths.oracle_rules") {
        path_oracle_rules = trimmed;
    } else if (key == "paths.prompts") {
        path_prompts = trimmed;
    } else {
        throw ConfigError("unknown configuration key \"" + key + "\"");
    }
}

CliConfig load_config(std::istream& source) {
    CliConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        std::string stripped = core::trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
        std::string key = core::trim(stripped.substr(0, eq));
        std::string value = stripped.substr(eq + 1);
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        try {
            config.set(key, value);
        } catch (const ConfigError& error) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + error.what());
        }
    }
    return config;
}

CliConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file \"" + path + "\"");
    return load_config(in);
}

std::shared_ptr<backend::CompletionBackend> make_backend(const CliConfig& config,
                                                         const std::string& api_key) {
    if (config.backend_kind == "http") {
        if (api_key.empty())
            throw ConfigError("the http backend needs an API key (set DEBIAS_API_KEY)");
        backend::HttpBackendConfig http;
        http.endpoint = config.endpoint;
        http.api_key = api_key;
        http.max_retries = config.retries;
        http.backoff_base_ms = config.backoff_ms;
        http.timeout_ms = config.timeout_ms;
        http.max_in_flight = config.concurrency;
        return std::make_shared<backend::HttpBackend>(std::move(http));
    }
    backend::OracleRules rules;
    if (!config.path_oracle_rules.empty()) {
        std::ifstream in(config.path_oracle_rules);
        if (!in)
            throw ConfigError("cannot open oracle rules \"" + config.path_oracle_rules + "\"");
        rules = backend::OracleRules::load(in);
    }
    return std::make_shared<backend::OracleBackend>(std::move(rules));
}

pipeline::PipelineConfig make_pipeline_config(
    const CliConfig& config, pipeline::Architecture architecture,
    std::shared_ptr<backend::CompletionBackend> backend,
    std::shared_ptr<const dataset::PromptLibrary> prompts) {
    pipeline::PipelineConfig out;
    out.architecture = architecture;
    out.max_iterations = config.max_iterations;
    out.sampling = config.sampling;
    out.prompts = std::move(prompts);
    out.concurrency = config.concurrency;

    auto bind = [&](const std::string& model_id) {
        return pipeline::LogicalModel{backend, model_id};
    };
    if (architecture == pipeline::Architecture::M1) {
        out.models.monolithic = bind(config.model_monolithic);
        return out;
    }
    out.models.classifier = bind(config.model_classify);
    for (BiasType type : core::kBiasedTypes)
        out.models.reformulators[type] = bind(config.model_reformulate.at(type));
    if (architecture == pipeline::Architecture::M3) {
        for (BiasType type : core::kBiasedTypes)
            out.models.extractors[type] = bind(config.model_extract.at(type));
    }
    return out;
}

}  // namespace debias::config

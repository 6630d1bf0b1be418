#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include "debias/backend.hpp"
#include "debias/core.hpp"
#include "debias/pipeline.hpp"

namespace debias::config {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every tool setting, resolvable from one flat key=value file with
/// section-prefixed keys; any field can be overridden by a flag.
struct CliConfig {
    std::string backend_kind = "oracle";  // "oracle" or "http"
    std::string endpoint = "http://localhost:8000/v1";
    int retries = 3;
    int backoff_ms = 100;
    int timeout_ms = 30000;
    int concurrency = 4;  // HTTP in-flight bound and batch threads

    std::string model_classify = "davinci";
    std::map<core::BiasType, std::string> model_extract;
    std::map<core::BiasType, std::string> model_reformulate;
    std::string model_monolithic = "davinci";

    backend::SamplingParams sampling;
    int max_iterations = 5;

    std::string path_embeddings;
    std::string path_vocab_professions;
    std::string path_vocab_descriptions;
    std::string path_oracle_rules;
    std::string path_prompts;  // few-shot example dataset (canonical JSONL)

    CliConfig();

    /// Applies one key=value setting; throws ConfigError on unknown keys
    /// or unparsable values.
    void set(const std::string& key, const std::string& value);
};

/// Parses the flat key=value format ('#' comments, blank lines allowed;
/// no sections beyond the key prefixes). Errors carry the line number.
CliConfig load_config(std::istream& source);
CliConfig load_config_file(const std::string& path);

/// Builds the configured backend. The HTTP kind requires a non-empty
/// api_key (callers read it from the environment); the oracle kind loads
/// its rule file when one is configured and answers with the documented
/// defaults otherwise.
std::shared_ptr<backend::CompletionBackend> make_backend(const CliConfig& config,
                                                         const std::string& api_key);

/// Assembles the pipeline settings for one architecture, binding every
/// logical model the architecture needs to `backend` under its
/// configured model identifier.
pipeline::PipelineConfig make_pipeline_config(
    const CliConfig& config, pipeline::Architecture architecture,
    std::shared_ptr<backend::CompletionBackend> backend,
    std::shared_ptr<const dataset::PromptLibrary> prompts);

}  // namespace debias::config

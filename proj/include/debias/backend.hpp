#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include "debias/core.hpp"
#include "debias/prompts.hpp"

namespace debias::backend {

/// Completion sampling knobs; the defaults are the settings every model
/// in this project is driven with.
struct SamplingParams {
    double temperature = 0.2;
    double top_p = 1.0;
    int best_of = 1;
    int max_tokens = 256;
};

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TransportError : public BackendError {
public:
    explicit TransportError(const std::string& detail);
};

class TimeoutError : public BackendError {
public:
    TimeoutError();
};

class ApiError : public BackendError {
public:
    ApiError(int status, std::string body);
    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

/// Text-in/text-out completion interface. Implementations must be safe
/// for concurrent complete() calls.
class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;

    /// Returns the completion for a rendered prompt, stripped of any
    /// echoed prompt prefix and surrounding whitespace.
    virtual std::string complete(const std::string& model, const std::string& prompt,
                                 const SamplingParams& params) = 0;
};

/// Splits a completion into a term list (comma-separated contract).
core::TermList parse_terms(std::string_view completion);

/// Exact-match rule tables for the offline oracle backend. Sentences are
/// keyed whitespace-normalized.
struct OracleRules {
    std::map<std::string, core::BiasType> classify;                 // sentence -> label
    std::map<std::string, core::TermList> extract;                  // type+sentence -> terms
    std::map<std::string, std::string> rewrite;                     // type+sentence+terms -> output
    std::map<std::string, std::string> monolithic;                  // sentence -> output

    static std::string sentence_key(std::string_view sentence);
    static std::string extract_key(core::BiasType type, std::string_view sentence);
    static std::string rewrite_key(core::BiasType type, std::string_view sentence,
                                   const core::TermList& terms);

    void add_classify(std::string_view sentence, core::BiasType label);
    void add_extract(core::BiasType type, std::string_view sentence, core::TermList terms);
    void add_rewrite(core::BiasType type, std::string_view sentence, const core::TermList& terms,
                     std::string output);
    void add_monolithic(std::string_view sentence, std::string output);

    /// Loads the JSON rule file (arrays "classify", "extract", "rewrite",
    /// "monolithic" of per-entry objects).
    static OracleRules load(std::istream& source);
};

/// Deterministic test double: parses the query back out of the rendered
/// prompt through the template delimiters and answers from the rule
/// tables. Unknown sentences classify as unbiased and rewrite to
/// themselves.
class OracleBackend : public CompletionBackend {
public:
    explicit OracleBackend(OracleRules rules);

    std::string complete(const std::string& model, const std::string& prompt,
                         const SamplingParams& params) override;

private:
    OracleRules rules_;
};

struct HttpBackendConfig {
    std::string endpoint;       // e.g. "http://localhost:8000/v1"
    std::string api_key;        // bearer token; from DEBIAS_API_KEY
    int max_retries = 3;        // extra attempts after the first
    int backoff_base_ms = 100;  // doubles per retry
    int timeout_ms = 30000;
    int max_in_flight = 4;
};

/// OpenAI-compatible completions client: POST {endpoint}/completions with
/// a JSON body {model, prompt, temperature, top_p, best_of, max_tokens}.
/// Retries transport errors and HTTP 429/5xx with exponential backoff;
/// other 4xx fail immediately. In-flight requests are bounded by
/// max_in_flight.
class HttpBackend : public CompletionBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    ~HttpBackend() override;

    std::string complete(const std::string& model, const std::string& prompt,
                         const SamplingParams& params) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace debias::backend

#include <chrono>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "debias/backend.hpp"

namespace debias::backend {

using nlohmann::json;

namespace {

constexpr std::ptrdiff_t kMaxInFlightCeiling = 256;

struct EndpointParts {
    std::string scheme_host_port;  // "http://host:port"
    std::string path_prefix;       // "/v1" or ""
};

EndpointParts split_endpoint(const std::string& endpoint) {
    std::size_t scheme = endpoint.find("://");
    if (scheme == std::string::npos)
        throw std::invalid_argument("endpoint URL must include a scheme: " + endpoint);
    std::size_t path = endpoint.find('/', scheme + 3);
    if (path == std::string::npos) return {endpoint, ""};
    std::string prefix = endpoint.substr(path);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {endpoint.substr(0, path), prefix};
}

bool is_retryable_status(int status) { return status == 429 || status >= 500; }

std::string strip_echoed_prompt(const std::string& completion, const std::string& prompt) {
    if (completion.rfind(prompt, 0) == 0) return completion.substr(prompt.size());
    return completion;
}

}  // namespace

struct HttpBackend::Impl {
    HttpBackendConfig config;
    EndpointParts endpoint;
    std::counting_semaphore<kMaxInFlightCeiling> in_flight;

    explicit Impl(HttpBackendConfig cfg)
        : config(std::move(cfg)),
          endpoint(split_endpoint(config.endpoint)),
          in_flight(std::min<std::ptrdiff_t>(std::max(config.max_in_flight, 1),
                                             kMaxInFlightCeiling)) {}
};

HttpBackend::HttpBackend(HttpBackendConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::complete(const std::string& model, const std::string& prompt,
                                  const SamplingParams& params) {
    if (prompt.empty()) throw std::invalid_argument("prompt must be non-empty");

    impl_->in_flight.acquire();
    struct Release {
        std::counting_semaphore<kMaxInFlightCeiling>& sem;
        ~Release() { sem.release(); }
    } release{impl_->in_flight};

    json body = {
        {"model", model},
        {"prompt", prompt},
        {"temperature", params.temperature},
        {"top_p", params.top_p},
        {"best_of", params.best_of},
        {"max_tokens", params.max_tokens},
    };
    const std::string payload = body.dump();
    const std::string path = impl_->endpoint.path_prefix + "/completions";

    const int attempts = impl_->config.max_retries + 1;
    std::string last_error;
    bool last_was_timeout = false;
    int last_status = 0;
    std::string last_body;

    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            auto delay = std::chrono::milliseconds(
                static_cast<long>(impl_->config.backoff_base_ms) << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }

        httplib::Client client(impl_->endpoint.scheme_host_port);
        client.set_connection_timeout(std::chrono::milliseconds(impl_->config.timeout_ms));
        client.set_read_timeout(std::chrono::milliseconds(impl_->config.timeout_ms));
        client.set_write_timeout(std::chrono::milliseconds(impl_->config.timeout_ms));
        httplib::Headers headers;
        if (!impl_->config.api_key.empty())
            headers.emplace("Authorization", "Bearer " + impl_->config.api_key);

        httplib::Result result = client.Post(path, headers, payload, "application/json");
        if (!result) {
            last_was_timeout = result.error() == httplib::Error::ConnectionTimeout;
            last_error = httplib::to_string(result.error());
            last_status = 0;
            continue;
        }
        if (result->status != 200) {
            last_status = result->status;
            last_body = result->body;
            if (!is_retryable_status(result->status)) throw ApiError(result->status, result->body);
            continue;
        }

        json response = json::parse(result->body, nullptr, false);
        if (response.is_discarded() || !response.contains("choices") ||
            !response["choices"].is_array() || response["choices"].empty() ||
            !response["choices"][0].contains("text"))
            throw ApiError(result->status, result->body);
        std::string text = response["choices"][0]["text"].get<std::string>();
        return core::trim(strip_echoed_prompt(text, prompt));
    }

    if (last_status != 0) throw ApiError(last_status, last_body);
    if (last_was_timeout) throw TimeoutError();
    throw TransportError(last_error);
}

}  // namespace debias::backend

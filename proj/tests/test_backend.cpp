#include <doctest.h>

#include <atomic>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "debias/backend.hpp"
#include "debias/prompts.hpp"
#include "testutil.hpp"

using namespace debias;
using namespace debias::backend;
using core::BiasType;
using core::Sentence;
using nlohmann::json;

namespace {

std::string render(const dataset::PromptSubtask& subtask, const std::string& sentence,
                   std::optional<core::TermList> terms = std::nullopt) {
    static auto library = testutil::synthetic_library();
    dataset::PromptQuery query{Sentence(sentence), std::move(terms)};
    return dataset::build_prompt(subtask, library->examples_for(subtask), query).render();
}

}  // namespace

TEST_CASE("parse_terms follows the comma contract") {
    CHECK(parse_terms("her") == core::TermList{"her"});
    CHECK(parse_terms(" male , lady doctor ") == core::TermList{"male", "lady doctor"});
    CHECK(parse_terms("") == core::TermList{});
    CHECK(parse_terms("∅") == core::TermList{"∅"});
}

TEST_CASE("oracle answers classify queries from its table") {
    OracleRules rules;
    rules.add_classify("Every nurse loves her job.", BiasType::Generalization);
    OracleBackend oracle(rules);

    std::string prompt = render(dataset::PromptSubtask::classify(), "Every nurse loves her job.");
    CHECK(oracle.complete("m", prompt, {}) == "generalization");

    // Sentence keys are whitespace-normalized.
    std::string spaced =
        render(dataset::PromptSubtask::classify(), "Every  nurse   loves her job.");
    CHECK(oracle.complete("m", spaced, {}) == "generalization");

    std::string unknown = render(dataset::PromptSubtask::classify(), "The sky is blue.");
    CHECK(oracle.complete("m", unknown, {}) == "unbiased");
}

TEST_CASE("oracle answers extract queries and defaults to no terms") {
    OracleRules rules;
    rules.add_extract(BiasType::Explicit, "He is a male nurse.", {"male", "nurse"});
    OracleBackend oracle(rules);

    std::string prompt =
        render(dataset::PromptSubtask::extract(BiasType::Explicit), "He is a male nurse.");
    CHECK(oracle.complete("m", prompt, {}) == "male, nurse");

    // The table is keyed by type; a generalization query misses.
    std::string other_type =
        render(dataset::PromptSubtask::extract(BiasType::Generalization), "He is a male nurse.");
    CHECK(oracle.complete("m", other_type, {}) == "");
}

TEST_CASE("oracle rewrite keys include the term list and fall back to identity") {
    OracleRules rules;
    rules.add_rewrite(BiasType::Generalization, "Every nurse loves her job.", {"her"},
                      "Every nurse loves their job.");
    rules.add_rewrite(BiasType::Generalization, "Every nurse loves her job.", {},
                      "Nurses love their jobs.");
    OracleBackend oracle(rules);

    std::string with_terms =
        render(dataset::PromptSubtask::reformulate(BiasType::Generalization),
               "Every nurse loves her job.", core::TermList{"her"});
    CHECK(oracle.complete("m", with_terms, {}) == "Every nurse loves their job.");

    std::string sentence_only =
        render(dataset::PromptSubtask::reformulate_sentence_only(BiasType::Generalization),
               "Every nurse loves her job.");
    CHECK(oracle.complete("m", sentence_only, {}) == "Nurses love their jobs.");

    std::string wrong_terms =
        render(dataset::PromptSubtask::reformulate(BiasType::Generalization),
               "Every nurse loves her job.", core::TermList{"nurse"});
    CHECK(oracle.complete("m", wrong_terms, {}) == "Every nurse loves her job.");
}

TEST_CASE("oracle monolithic rewrites fall back to identity") {
    OracleRules rules;
    rules.add_monolithic("He is a male nurse.", "He is a nurse.");
    OracleBackend oracle(rules);

    CHECK(oracle.complete("m", render(dataset::PromptSubtask::monolithic(), "He is a male nurse."),
                          {}) == "He is a nurse.");
    CHECK(oracle.complete("m", render(dataset::PromptSubtask::monolithic(), "Dogs bark loudly."),
                          {}) == "Dogs bark loudly.");
}

TEST_CASE("oracle completions are deterministic") {
    OracleRules rules = testutil::load_rules_fixture("oracle_rules_consistent.json");
    OracleBackend oracle(rules);
    std::string prompt = render(dataset::PromptSubtask::classify(), "Every nurse loves her job.");
    std::string first = oracle.complete("a", prompt, {});
    for (int i = 0; i < 5; ++i) CHECK(oracle.complete("b", prompt, {}) == first);
    CHECK(first == "generalization");
}

TEST_CASE("OracleRules::load reads all four rule tables") {
    std::istringstream source(R"({
        "classify": [{"sentence": "A b.", "label": "explicit"}],
        "extract": [{"type": "explicit", "sentence": "A b.", "terms": ["b"]}],
        "rewrite": [{"type": "explicit", "sentence": "A b.", "terms": ["b"], "output": "A."}],
        "monolithic": [{"sentence": "A b.", "output": "A."}]
    })");
    OracleRules rules = OracleRules::load(source);
    CHECK(rules.classify.at(OracleRules::sentence_key("A b.")) == BiasType::Explicit);
    CHECK(rules.extract.at(OracleRules::extract_key(BiasType::Explicit, "A b.")) ==
          core::TermList{"b"});
    CHECK(rules.rewrite.at(OracleRules::rewrite_key(BiasType::Explicit, "A b.", {"b"})) == "A.");
    CHECK(rules.monolithic.at(OracleRules::sentence_key("A b.")) == "A.");

    std::istringstream empty("{}");
    OracleRules none = OracleRules::load(empty);
    CHECK(none.classify.empty());
    CHECK(none.monolithic.empty());
}

namespace {

/// Local completions stub bound to a random loopback port.
class StubServer {
public:
    StubServer() = default;

    void start() {
        port_ = server.bind_to_any_port("127.0.0.1");
        if (port_ <= 0) throw std::runtime_error("could not bind stub server");
        thread_ = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    void shutdown() {
        server.stop();
        if (thread_.joinable()) thread_.join();
    }

    ~StubServer() { shutdown(); }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    int port() const { return port_; }

    httplib::Server server;

private:
    int port_ = 0;
    std::thread thread_;
};

HttpBackendConfig stub_config(const StubServer& stub) {
    HttpBackendConfig config;
    config.endpoint = stub.endpoint();
    config.api_key = "test-key";
    config.max_retries = 2;
    config.backoff_base_ms = 1;
    config.timeout_ms = 5000;
    config.max_in_flight = 4;
    return config;
}

json completion_response(const std::string& text) {
    json choice;
    choice["text"] = text;
    json response;
    response["choices"] = json::array({choice});
    return response;
}

}  // namespace

TEST_CASE("http backend posts the wire-contract body and strips the reply") {
    StubServer stub;
    std::mutex mutex;
    std::vector<std::pair<std::string, httplib::Headers>> seen;  // (body, headers)
    std::string seen_path;
    stub.server.Post("/v1/completions",
                     [&](const httplib::Request& req, httplib::Response& res) {
                         std::lock_guard<std::mutex> lock(mutex);
                         seen.emplace_back(req.body, req.headers);
                         seen_path = req.path;
                         res.set_content(completion_response("  generalization \n").dump(),
                                         "application/json");
                     });
    stub.start();

    HttpBackend backend(stub_config(stub));
    std::string prompt = render(dataset::PromptSubtask::classify(), "Every nurse loves her job.");
    std::string completion = backend.complete("davinci", prompt, SamplingParams{});

    CHECK(completion == "generalization");
    std::lock_guard<std::mutex> lock(mutex);
    REQUIRE(seen.size() == 1);
    CHECK(seen_path == "/v1/completions");

    json body = json::parse(seen[0].first);
    CHECK(body.at("model").get<std::string>() == "davinci");
    CHECK(body.at("prompt").get<std::string>() == prompt);
    CHECK(body.at("temperature").get<double>() == 0.2);
    CHECK(body.at("top_p").get<double>() == 1.0);
    CHECK(body.at("best_of").get<int>() == 1);
    CHECK(body.at("max_tokens").get<int>() == 256);

    auto auth = seen[0].second.find("Authorization");
    REQUIRE(auth != seen[0].second.end());
    CHECK(auth->second == "Bearer test-key");
}

TEST_CASE("http backend strips an echoed prompt prefix") {
    StubServer stub;
    std::string prompt = render(dataset::PromptSubtask::monolithic(), "He is a male nurse.");
    stub.server.Post("/v1/completions", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(completion_response(prompt + " He is a nurse.").dump(),
                        "application/json");
    });
    stub.start();

    HttpBackend backend(stub_config(stub));
    CHECK(backend.complete("davinci", prompt, {}) == "He is a nurse.");
}

TEST_CASE("http backend retries 429 and succeeds") {
    StubServer stub;
    std::atomic<int> hits{0};
    stub.server.Post("/v1/completions", [&](const httplib::Request&, httplib::Response& res) {
        if (hits.fetch_add(1) == 0) {
            res.status = 429;
            res.set_content("slow down", "text/plain");
            return;
        }
        res.set_content(completion_response("ok").dump(), "application/json");
    });
    stub.start();

    HttpBackend backend(stub_config(stub));
    CHECK(backend.complete("davinci", render(dataset::PromptSubtask::classify(), "A cat sat."),
                           {}) == "ok");
    CHECK(hits.load() == 2);
}

TEST_CASE("http backend fails non-retryable statuses immediately") {
    StubServer stub;
    std::atomic<int> hits{0};
    stub.server.Post("/v1/completions", [&](const httplib::Request&, httplib::Response& res) {
        hits.fetch_add(1);
        res.status = 400;
        res.set_content("bad request", "text/plain");
    });
    stub.start();

    HttpBackend backend(stub_config(stub));
    try {
        backend.complete("davinci", render(dataset::PromptSubtask::classify(), "A cat sat."), {});
        FAIL("expected ApiError");
    } catch (const ApiError& error) {
        CHECK(error.status() == 400);
        CHECK(error.body() == "bad request");
    }
    CHECK(hits.load() == 1);
}

TEST_CASE("http backend exhausts retries on persistent 5xx") {
    StubServer stub;
    std::atomic<int> hits{0};
    stub.server.Post("/v1/completions", [&](const httplib::Request&, httplib::Response& res) {
        hits.fetch_add(1);
        res.status = 503;
        res.set_content("overloaded", "text/plain");
    });
    stub.start();

    HttpBackendConfig config = stub_config(stub);
    config.max_retries = 2;
    HttpBackend backend(config);
    try {
        backend.complete("davinci", render(dataset::PromptSubtask::classify(), "A cat sat."), {});
        FAIL("expected ApiError");
    } catch (const ApiError& error) {
        CHECK(error.status() == 503);
    }
    CHECK(hits.load() == 3);
}

TEST_CASE("http backend rejects malformed response bodies") {
    StubServer stub;
    std::atomic<int> variant{0};
    stub.server.Post("/v1/completions", [&](const httplib::Request&, httplib::Response& res) {
        if (variant.load() == 0)
            res.set_content("not json", "text/plain");
        else
            res.set_content("{\"unexpected\": 1}", "application/json");
    });
    stub.start();

    HttpBackend backend(stub_config(stub));
    std::string prompt = render(dataset::PromptSubtask::classify(), "A cat sat.");
    CHECK_THROWS_AS(backend.complete("davinci", prompt, {}), ApiError);
    variant = 1;
    CHECK_THROWS_AS(backend.complete("davinci", prompt, {}), ApiError);
}

TEST_CASE("http backend surfaces connection failures as transport errors") {
    int dead_port;
    {
        StubServer stub;
        stub.start();
        dead_port = stub.port();
        stub.shutdown();
    }

    HttpBackendConfig config;
    config.endpoint = "http://127.0.0.1:" + std::to_string(dead_port) + "/v1";
    config.api_key = "test-key";
    config.max_retries = 0;
    config.backoff_base_ms = 1;
    config.timeout_ms = 1000;
    HttpBackend backend(config);
    CHECK_THROWS_AS(
        backend.complete("davinci", render(dataset::PromptSubtask::classify(), "A cat sat."), {}),
        TransportError);
}

TEST_CASE("http backend rejects empty prompts without a request") {
    StubServer stub;
    std::atomic<int> hits{0};
    stub.server.Post("/v1/completions", [&](const httplib::Request&, httplib::Response& res) {
        hits.fetch_add(1);
        res.set_content(completion_response("x").dump(), "application/json");
    });
    stub.start();

    HttpBackend backend(stub_config(stub));
    CHECK_THROWS_AS(backend.complete("davinci", "", {}), std::invalid_argument);
    CHECK(hits.load() == 0);
}

TEST_CASE("http backend bounds concurrent requests by max_in_flight") {
    StubServer stub;
    std::atomic<int> active{0};
    std::atomic<int> peak{0};
    stub.server.Post("/v1/completions", [&](const httplib::Request&, httplib::Response& res) {
        int now = active.fetch_add(1) + 1;
        int expected = peak.load();
        while (now > expected && !peak.compare_exchange_weak(expected, now)) {}
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        active.fetch_sub(1);
        res.set_content(completion_response("ok").dump(), "application/json");
    });
    stub.start();

    HttpBackendConfig config = stub_config(stub);
    config.max_in_flight = 2;
    HttpBackend backend(config);

    std::string prompt = render(dataset::PromptSubtask::classify(), "A cat sat.");
    std::vector<std::thread> workers;
    for (int i = 0; i < 8; ++i)
        workers.emplace_back([&] { CHECK(backend.complete("davinci", prompt, {}) == "ok"); });
    for (std::thread& worker : workers) worker.join();

    CHECK(peak.load() <= 2);
    CHECK(peak.load() >= 1);
}

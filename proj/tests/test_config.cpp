#include <doctest.h>

#include <sstream>

#include "debias/config.hpp"
#include "testutil.hpp"

using namespace debias;
using namespace debias::config;
using core::BiasType;

TEST_CASE("defaults cover every setting") {
    CliConfig config;
    CHECK(config.backend_kind == "oracle");
    CHECK(config.endpoint == "http://localhost:8000/v1");
    CHECK(config.retries == 3);
    CHECK(config.backoff_ms == 100);
    CHECK(config.timeout_ms == 30000);
    CHECK(config.concurrency == 4);
    CHECK(config.model_classify == "davinci");
    CHECK(config.model_monolithic == "davinci");
    for (BiasType type : core::kBiasedTypes) {
        CHECK(config.model_extract.at(type) == "davinci");
        CHECK(config.model_reformulate.at(type) == "davinci");
    }
    CHECK(config.sampling.temperature == 0.2);
    CHECK(config.sampling.top_p == 1.0);
    CHECK(config.sampling.best_of == 1);
    CHECK(config.sampling.max_tokens == 256);
    CHECK(config.max_iterations == 5);
    CHECK(config.path_embeddings.empty());
    CHECK(config.path_oracle_rules.empty());
    CHECK(config.path_prompts.empty());
}

TEST_CASE("a full settings file parses") {
    std::istringstream source(R"(# backend section
backend.kind = http
backend.endpoint = http://example.test:9000/v2
backend.retries = 5
backend.backoff_ms = 250
backend.timeout_ms = 1000
backend.concurrency = 8

model.classify = clf-large
model.monolithic = mono-large
model.extract.generalization = ext-g
model.extract.explicit = ext-e
model.extract.benevolent = ext-b
model.reformulate.generalization = ref-g
model.reformulate.explicit = ref-e
model.reformulate.benevolent = ref-b

sampling.temperature = 0.7
sampling.top_p = 0.9
sampling.best_of = 2
sampling.max_tokens = 64
pipeline.max_iterations = 9

paths.embeddings = /data/vectors.txt
paths.vocab_professions = /data/professions.txt
paths.vocab_descriptions = /data/descriptions.txt
paths.oracle_rules = /data/rules.json
paths.prompts = /data/prompts.jsonl
)");
    CliConfig config = load_config(source);
    CHECK(config.backend_kind == "http");
    CHECK(config.endpoint == "http://example.test:9000/v2");
    CHECK(config.retries == 5);
    CHECK(config.backoff_ms == 250);
    CHECK(config.timeout_ms == 1000);
    CHECK(config.concurrency == 8);
    CHECK(config.model_classify == "clf-large");
    CHECK(config.model_monolithic == "mono-large");
    CHECK(config.model_extract.at(BiasType::Generalization) == "ext-g");
    CHECK(config.model_extract.at(BiasType::Explicit) == "ext-e");
    CHECK(config.model_extract.at(BiasType::Benevolent) == "ext-b");
    CHECK(config.model_reformulate.at(BiasType::Generalization) == "ref-g");
    CHECK(config.model_reformulate.at(BiasType::Explicit) == "ref-e");
    CHECK(config.model_reformulate.at(BiasType::Benevolent) == "ref-b");
    CHECK(config.sampling.temperature == 0.7);
    CHECK(config.sampling.top_p == 0.9);
    CHECK(config.sampling.best_of == 2);
    CHECK(config.sampling.max_tokens == 64);
    CHECK(config.max_iterations == 9);
    CHECK(config.path_embeddings == "/data/vectors.txt");
    CHECK(config.path_vocab_professions == "/data/professions.txt");
    CHECK(config.path_vocab_descriptions == "/data/descriptions.txt");
    CHECK(config.path_oracle_rules == "/data/rules.json");
    CHECK(config.path_prompts == "/data/prompts.jsonl");
}

TEST_CASE("comments and blank lines are skipped") {
    std::istringstream source("\n# only a comment\n\n   \nbackend.retries = 1\n");
    CHECK(load_config(source).retries == 1);
}

TEST_CASE("errors carry the offending line number") {
    std::istringstream unknown("backend.retries = 1\nnot.a.key = 2\n");
    try {
        load_config(unknown);
        FAIL("expected ConfigError");
    } catch (const ConfigError& error) {
        CHECK(std::string(error.what()).find("line 2") != std::string::npos);
        CHECK(std::string(error.what()).find("not.a.key") != std::string::npos);
    }

    std::istringstream no_equals("just words\n");
    CHECK_THROWS_AS(load_config(no_equals), ConfigError);
    std::istringstream empty_key(" = value\n");
    CHECK_THROWS_AS(load_config(empty_key), ConfigError);
}

TEST_CASE("set validates values") {
    CliConfig config;
    CHECK_THROWS_AS(config.set("backend.kind", "grpc"), ConfigError);
    CHECK_THROWS_AS(config.set("backend.retries", "three"), ConfigError);
    CHECK_THROWS_AS(config.set("backend.retries", "-1"), ConfigError);
    CHECK_THROWS_AS(config.set("backend.retries", "2.5"), ConfigError);
    CHECK_THROWS_AS(config.set("backend.timeout_ms", "0"), ConfigError);
    CHECK_THROWS_AS(config.set("backend.concurrency", "0"), ConfigError);
    CHECK_THROWS_AS(config.set("sampling.temperature", "-0.1"), ConfigError);
    CHECK_THROWS_AS(config.set("sampling.temperature", "warm"), ConfigError);
    CHECK_THROWS_AS(config.set("sampling.top_p", "0"), ConfigError);
    CHECK_THROWS_AS(config.set("sampling.top_p", "1.5"), ConfigError);
    CHECK_THROWS_AS(config.set("sampling.best_of", "0"), ConfigError);
    CHECK_THROWS_AS(config.set("pipeline.max_iterations", "0"), ConfigError);
    CHECK_THROWS_AS(config.set("model.extract.unbiased", "m"), ConfigError);
    CHECK_THROWS_AS(config.set("model.reformulate.unbiased", "m"), ConfigError);
    CHECK_THROWS_AS(config.set("model.extract.mystery", "m"), ConfigError);
    CHECK_THROWS_AS(config.set("", "x"), ConfigError);

    CHECK_NOTHROW(config.set("backend.retries", "0"));
    CHECK(config.retries == 0);
    CHECK_NOTHROW(config.set("sampling.temperature", "0"));
    CHECK(config.sampling.temperature == 0.0);
    config.set("model.extract.explicit", "  padded  ");
    CHECK(config.model_extract.at(BiasType::Explicit) == "padded");
}

TEST_CASE("load_config_file reports missing files") {
    CHECK_THROWS_AS(load_config_file("/nonexistent/debias.conf"), ConfigError);
}

TEST_CASE("make_backend builds the oracle with or without a rule file") {
    CliConfig config;
    auto empty_rules = make_backend(config, "");
    REQUIRE(empty_rules);
    // With no rules every classification defaults to unbiased.
    auto library = testutil::synthetic_library();
    dataset::PromptSubtask classify = dataset::PromptSubtask::classify();
    std::string prompt =
        dataset::build_prompt(classify, library->examples_for(classify),
                              dataset::PromptQuery{core::Sentence("Any text."), std::nullopt})
            .render();
    CHECK(empty_rules->complete("m", prompt, {}) == "unbiased");

    config.path_oracle_rules = testutil::fixture_path("oracle_rules_consistent.json");
    auto ruled = make_backend(config, "");
    std::string g1 = dataset::build_prompt(
                         classify, library->examples_for(classify),
                         dataset::PromptQuery{core::Sentence("Every nurse loves her job."),
                                              std::nullopt})
                         .render();
    CHECK(ruled->complete("m", g1, {}) == "generalization");

    config.path_oracle_rules = "/nonexistent/rules.json";
    CHECK_THROWS_AS(make_backend(config, ""), ConfigError);
}

TEST_CASE("make_backend requires an API key for the http kind") {
    CliConfig config;
    config.backend_kind = "http";
    try {
        make_backend(config, "");
        FAIL("expected ConfigError");
    } catch (const ConfigError& error) {
        CHECK(std::string(error.what()).find("DEBIAS_API_KEY") != std::string::npos);
    }
    CHECK_NOTHROW(make_backend(config, "sk-test"));
}

TEST_CASE("make_pipeline_config binds exactly what each architecture needs") {
    CliConfig config;
    config.model_classify = "clf";
    config.model_monolithic = "mono";
    config.model_extract[BiasType::Generalization] = "ext-g";
    config.model_reformulate[BiasType::Benevolent] = "ref-b";
    config.max_iterations = 7;
    config.concurrency = 3;
    config.sampling.temperature = 0.5;

    auto backend = make_backend(CliConfig{}, "");
    auto prompts = testutil::synthetic_library();

    pipeline::PipelineConfig m1 =
        make_pipeline_config(config, pipeline::Architecture::M1, backend, prompts);
    CHECK_NOTHROW(m1.validate());
    REQUIRE(m1.models.monolithic.has_value());
    CHECK(m1.models.monolithic->model_id == "mono");
    CHECK(!m1.models.classifier.has_value());
    CHECK(m1.models.extractors.empty());
    CHECK(m1.models.reformulators.empty());
    CHECK(m1.max_iterations == 7);
    CHECK(m1.concurrency == 3);
    CHECK(m1.sampling.temperature == 0.5);

    pipeline::PipelineConfig m2 =
        make_pipeline_config(config, pipeline::Architecture::M2, backend, prompts);
    CHECK_NOTHROW(m2.validate());
    REQUIRE(m2.models.classifier.has_value());
    CHECK(m2.models.classifier->model_id == "clf");
    CHECK(m2.models.extractors.empty());
    CHECK(m2.models.reformulators.at(BiasType::Benevolent).model_id == "ref-b");
    CHECK(m2.models.reformulators.at(BiasType::Explicit).model_id == "davinci");
    CHECK(!m2.models.monolithic.has_value());

    pipeline::PipelineConfig m3 =
        make_pipeline_config(config, pipeline::Architecture::M3, backend, prompts);
    CHECK_NOTHROW(m3.validate());
    CHECK(m3.models.extractors.at(BiasType::Generalization).model_id == "ext-g");
    CHECK(m3.models.extractors.at(BiasType::Explicit).model_id == "davinci");
    CHECK(m3.models.reformulators.at(BiasType::Benevolent).model_id == "ref-b");
    CHECK(m3.prompts == prompts);
}

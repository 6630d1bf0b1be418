#include <doctest.h>

#include <json.hpp>

#include "debias/pipeline.hpp"
#include "testutil.hpp"

using namespace debias;
using namespace debias::pipeline;
using core::BiasType;
using core::Sentence;
using core::TerminationReason;
using nlohmann::json;

namespace {

const std::string kG1 = "Every nurse loves her job.";
const std::string kG1Gold = "Every nurse loves their job.";

std::shared_ptr<backend::CompletionBackend> consistent_oracle() {
    return std::make_shared<backend::OracleBackend>(
        testutil::load_rules_fixture("oracle_rules_consistent.json"));
}

PipelineConfig make_config(Architecture arch,
                           std::shared_ptr<backend::CompletionBackend> backend) {
    PipelineConfig config;
    config.architecture = arch;
    config.prompts = testutil::synthetic_library();
    config.models.classifier = LogicalModel{backend, "clf"};
    config.models.monolithic = LogicalModel{backend, "mono"};
    for (BiasType type : core::kBiasedTypes) {
        std::string label(core::canonical_label(type));
        config.models.extractors[type] = LogicalModel{backend, "ext-" + label};
        config.models.reformulators[type] = LogicalModel{backend, "ref-" + label};
    }
    return config;
}

/// Replies with the same string regardless of the prompt.
class FixedBackend : public backend::CompletionBackend {
public:
    explicit FixedBackend(std::string reply) : reply_(std::move(reply)) {}
    std::string complete(const std::string&, const std::string&,
                         const backend::SamplingParams&) override {
        return reply_;
    }

private:
    std::string reply_;
};

}  // namespace

TEST_CASE("architecture names round-trip") {
    CHECK(architecture_name(Architecture::M1) == "m1");
    CHECK(architecture_display(Architecture::M3) == "M-3");
    CHECK(parse_architecture("m2") == Architecture::M2);
    CHECK(parse_architecture(" M-3 ") == Architecture::M3);
    CHECK_THROWS_AS(parse_architecture("m4"), std::invalid_argument);
}

TEST_CASE("three-stage run classifies, extracts, rewrites, then stops on unbiased") {
    PipelineConfig config = make_config(Architecture::M3, consistent_oracle());
    core::DebiasTrace trace = pipeline::debias(Sentence(kG1), config);

    CHECK(trace.final_text.text() == kG1Gold);
    CHECK(trace.terminated_by == TerminationReason::ClassifiedUnbiased);
    REQUIRE(trace.iterations.size() == 2);

    const core::IterationRecord& first = trace.iterations[0];
    CHECK(first.input_text.text() == kG1);
    CHECK(first.predicted_type == BiasType::Generalization);
    CHECK(first.extracted_terms == core::TermList{"her"});
    CHECK(first.output_text.text() == kG1Gold);

    const core::IterationRecord& second = trace.iterations[1];
    CHECK(second.input_text.text() == kG1Gold);
    CHECK(second.predicted_type == BiasType::Unbiased);
    CHECK(second.extracted_terms.empty());
    CHECK(second.output_text.text() == kG1Gold);
}

TEST_CASE("two-stage run rewrites from the sentence alone") {
    PipelineConfig config = make_config(Architecture::M2, consistent_oracle());
    core::DebiasTrace trace = pipeline::debias(Sentence(kG1), config);

    CHECK(trace.final_text.text() == kG1Gold);
    CHECK(trace.terminated_by == TerminationReason::ClassifiedUnbiased);
    REQUIRE(trace.iterations.size() == 2);
    CHECK(trace.iterations[0].predicted_type == BiasType::Generalization);
    // No extractor in this architecture.
    CHECK(trace.iterations[0].extracted_terms.empty());
}

TEST_CASE("monolithic run is a single rewrite without classification") {
    PipelineConfig config = make_config(Architecture::M1, consistent_oracle());
    core::DebiasTrace trace = pipeline::debias(Sentence("He is a male nurse."), config);

    CHECK(trace.final_text.text() == "He is a nurse.");
    CHECK(trace.terminated_by == TerminationReason::MaxIterations);
    REQUIRE(trace.iterations.size() == 1);
    CHECK(!trace.iterations[0].predicted_type.has_value());
    CHECK(trace.iterations[0].extracted_terms.empty());
}

TEST_CASE("a sentence classified unbiased up front passes through unchanged") {
    PipelineConfig config = make_config(Architecture::M3, consistent_oracle());
    core::DebiasTrace trace = pipeline::debias(Sentence("The sky is blue."), config);

    CHECK(trace.final_text.text() == "The sky is blue.");
    CHECK(trace.terminated_by == TerminationReason::ClassifiedUnbiased);
    REQUIRE(trace.iterations.size() == 1);
    CHECK(trace.iterations[0].predicted_type == BiasType::Unbiased);
    CHECK(trace.iterations[0].output_text == trace.iterations[0].input_text);
}

TEST_CASE("an unchanged rewrite of a still-biased sentence halts the loop") {
    backend::OracleRules rules;
    rules.add_classify("Stubborn case here.", BiasType::Generalization);
    // No rewrite rule: the oracle echoes the input.
    PipelineConfig config =
        make_config(Architecture::M3, std::make_shared<backend::OracleBackend>(rules));

    core::DebiasTrace trace = pipeline::debias(Sentence("Stubborn case here."), config);
    CHECK(trace.terminated_by == TerminationReason::NoChange);
    REQUIRE(trace.iterations.size() == 1);
    CHECK(trace.iterations[0].predicted_type == BiasType::Generalization);
    CHECK(trace.final_text.text() == "Stubborn case here.");
}

TEST_CASE("a rewrite cycle is stopped by the iteration cap") {
    const std::string s1 = "Alpha case one.";
    const std::string s2 = "Alpha case two.";
    backend::OracleRules rules;
    rules.add_classify(s1, BiasType::Generalization);
    rules.add_classify(s2, BiasType::Generalization);
    rules.add_extract(BiasType::Generalization, s1, {"one"});
    rules.add_extract(BiasType::Generalization, s2, {"two"});
    rules.add_rewrite(BiasType::Generalization, s1, {"one"}, s2);
    rules.add_rewrite(BiasType::Generalization, s2, {"two"}, s1);

    PipelineConfig config =
        make_config(Architecture::M3, std::make_shared<backend::OracleBackend>(rules));
    config.max_iterations = 4;

    core::DebiasTrace trace = pipeline::debias(Sentence(s1), config);
    CHECK(trace.terminated_by == TerminationReason::MaxIterations);
    REQUIRE(trace.iterations.size() == 4);
    CHECK(trace.iterations[0].output_text.text() == s2);
    CHECK(trace.iterations[1].output_text.text() == s1);
    CHECK(trace.iterations[2].output_text.text() == s2);
    CHECK(trace.iterations[3].output_text.text() == s1);
    CHECK(trace.final_text.text() == s1);
}

TEST_CASE("requests are routed to the per-type logical models") {
    auto counting = std::make_shared<testutil::CountingBackend>(consistent_oracle());
    PipelineConfig config = make_config(Architecture::M3, counting);

    pipeline::debias(Sentence(kG1), config);

    CHECK(counting->calls("clf") == 2);
    CHECK(counting->calls("ext-generalization") == 1);
    CHECK(counting->calls("ref-generalization") == 1);
    CHECK(counting->calls("ext-explicit") == 0);
    CHECK(counting->calls("ext-benevolent") == 0);
    CHECK(counting->calls("ref-explicit") == 0);
    CHECK(counting->calls("mono") == 0);
    CHECK(counting->total_calls() == 4);

    // Benevolent item exercises a different extractor/reformulator pair.
    pipeline::debias(Sentence("She is remarkably good at poetry."), config);
    CHECK(counting->calls("ext-benevolent") == 1);
    CHECK(counting->calls("ref-benevolent") == 1);
    CHECK(counting->calls("ext-generalization") == 1);
}

TEST_CASE("an unparsable classifier label fails the run") {
    auto fixed = std::make_shared<FixedBackend>("maybe");
    PipelineConfig config = make_config(Architecture::M2, fixed);
    CHECK_THROWS_AS(pipeline::debias(Sentence("Anything."), config), PipelineError);
}

TEST_CASE("an empty rewrite fails the run and keeps finished iterations") {
    const std::string s1 = "Beta case one.";
    const std::string s2 = "Beta case two.";
    backend::OracleRules rules;
    rules.add_classify(s1, BiasType::Explicit);
    rules.add_classify(s2, BiasType::Explicit);
    rules.add_extract(BiasType::Explicit, s1, {"one"});
    rules.add_extract(BiasType::Explicit, s2, {"two"});
    rules.add_rewrite(BiasType::Explicit, s1, {"one"}, s2);
    rules.add_rewrite(BiasType::Explicit, s2, {"two"}, "");

    PipelineConfig config =
        make_config(Architecture::M3, std::make_shared<backend::OracleBackend>(rules));
    try {
        pipeline::debias(Sentence(s1), config);
        FAIL("expected PipelineError");
    } catch (const PipelineError& error) {
        CHECK(std::string(error.what()).find("reformulation failed") != std::string::npos);
        REQUIRE(error.partial_iterations().size() == 1);
        CHECK(error.partial_iterations()[0].output_text.text() == s2);
    }
}

TEST_CASE("validate rejects incomplete bindings") {
    auto oracle = consistent_oracle();

    PipelineConfig m1 = make_config(Architecture::M1, oracle);
    m1.models.monolithic.reset();
    CHECK_THROWS_AS(m1.validate(), std::invalid_argument);

    PipelineConfig m2 = make_config(Architecture::M2, oracle);
    m2.models.classifier.reset();
    CHECK_THROWS_AS(m2.validate(), std::invalid_argument);

    PipelineConfig m2b = make_config(Architecture::M2, oracle);
    m2b.models.reformulators.erase(BiasType::Benevolent);
    CHECK_THROWS_AS(m2b.validate(), std::invalid_argument);
    // The extractor set is not required by the two-stage pipeline.
    PipelineConfig m2c = make_config(Architecture::M2, oracle);
    m2c.models.extractors.clear();
    CHECK_NOTHROW(m2c.validate());

    PipelineConfig m3 = make_config(Architecture::M3, oracle);
    m3.models.extractors.erase(BiasType::Explicit);
    CHECK_THROWS_AS(m3.validate(), std::invalid_argument);

    PipelineConfig no_prompts = make_config(Architecture::M3, oracle);
    no_prompts.prompts.reset();
    CHECK_THROWS_AS(no_prompts.validate(), std::invalid_argument);

    PipelineConfig bad_iters = make_config(Architecture::M3, oracle);
    bad_iters.max_iterations = 0;
    CHECK_THROWS_AS(bad_iters.validate(), std::invalid_argument);

    // pipeline::debias() validates before any model call.
    PipelineConfig broken = make_config(Architecture::M1, oracle);
    broken.models.monolithic.reset();
    CHECK_THROWS_AS(pipeline::debias(Sentence("x."), broken), std::invalid_argument);
}

TEST_CASE("batch runs preserve order and isolate failures") {
    auto failing = std::make_shared<testutil::SelectiveFailBackend>(
        consistent_oracle(), "She works as a lady doctor.");
    PipelineConfig config = make_config(Architecture::M3, failing);

    std::vector<Sentence> texts{
        Sentence(kG1),
        Sentence("She works as a lady doctor."),
        Sentence("He is a male nurse."),
    };
    std::vector<DebiasResult> results = debias_batch(texts, config);

    REQUIRE(results.size() == 3);
    REQUIRE(results[0].ok());
    CHECK(results[0].trace->final_text.text() == kG1Gold);
    CHECK(!results[1].ok());
    CHECK(results[1].error.find("injected failure") != std::string::npos);
    CHECK(!results[1].trace.has_value());
    REQUIRE(results[2].ok());
    CHECK(results[2].trace->final_text.text() == "He is a nurse.");
}

TEST_CASE("batch results do not depend on concurrency") {
    std::vector<Sentence> texts;
    for (const core::SentencePair& pair :
         testutil::load_canonical_fixture("eval_6.jsonl"))
        texts.push_back(pair.biased);
    texts.push_back(Sentence("The sky is blue."));
    texts.push_back(Sentence("Clouds drift by."));
    // Three copies so the schedule has real interleaving to get wrong.
    std::vector<Sentence> batch;
    for (int copy = 0; copy < 3; ++copy) batch.insert(batch.end(), texts.begin(), texts.end());

    PipelineConfig serial = make_config(Architecture::M3, consistent_oracle());
    serial.concurrency = 1;
    PipelineConfig parallel = make_config(Architecture::M3, consistent_oracle());
    parallel.concurrency = 8;

    std::vector<DebiasResult> a = debias_batch(batch, serial);
    std::vector<DebiasResult> b = debias_batch(batch, parallel);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].ok());
        REQUIRE(b[i].ok());
        CHECK(trace_to_json(*a[i].trace) == trace_to_json(*b[i].trace));
    }
}

TEST_CASE("an unbiased prediction always leaves the text unchanged") {
    std::vector<Sentence> texts;
    for (const core::SentencePair& pair :
         testutil::load_canonical_fixture("eval_6.jsonl"))
        texts.push_back(pair.biased);
    texts.push_back(Sentence("The sky is blue."));

    for (Architecture arch : {Architecture::M2, Architecture::M3}) {
        PipelineConfig config = make_config(arch, consistent_oracle());
        for (const DebiasResult& result : debias_batch(texts, config)) {
            REQUIRE(result.ok());
            for (const core::IterationRecord& record : result.trace->iterations) {
                if (record.predicted_type == BiasType::Unbiased)
                    CHECK(record.output_text == record.input_text);
            }
        }
    }
}

TEST_CASE("trace JSON carries the full iteration history") {
    PipelineConfig config = make_config(Architecture::M3, consistent_oracle());
    core::DebiasTrace trace = pipeline::debias(Sentence(kG1), config);

    json doc = json::parse(trace_to_json(trace));
    CHECK(doc.at("input").get<std::string>() == kG1);
    CHECK(doc.at("final_text").get<std::string>() == kG1Gold);
    CHECK(doc.at("terminated_by").get<std::string>() == "classified_unbiased");
    REQUIRE(doc.at("iterations").size() == 2);
    CHECK(doc["iterations"][0].at("predicted_type").get<std::string>() == "generalization");
    CHECK(doc["iterations"][0].at("extracted_terms") == json::array({"her"}));
    CHECK(doc["iterations"][1].at("predicted_type").get<std::string>() == "unbiased");

    PipelineConfig mono = make_config(Architecture::M1, consistent_oracle());
    json mono_doc = json::parse(trace_to_json(pipeline::debias(Sentence(kG1), mono)));
    REQUIRE(mono_doc.at("iterations").size() == 1);
    CHECK(mono_doc["iterations"][0].at("predicted_type").is_null());
    CHECK(mono_doc.at("terminated_by").get<std::string>() == "max_iterations");
}

#include "debias/pipeline.hpp"

#include <omp.h>

#include <algorithm>

#include <json.hpp>

namespace debias::pipeline {

using core::BiasType;
using core::DebiasTrace;
using core::IterationRecord;
using core::Sentence;
using core::TerminationReason;
using nlohmann::json;

std::string_view architecture_name(Architecture arch) {
    switch (arch) {
    case Architecture::M1: return "m1";
    case Architecture::M2: return "m2";
    case Architecture::M3: return "m3";
    }
    throw std::logic_error("invalid Architecture value");
}

std::string_view architecture_display(Architecture arch) {
    switch (arch) {
    case Architecture::M1: return "M-1";
    case Architecture::M2: return "M-2";
    case Architecture::M3: return "M-3";
    }
    throw std::logic_error("invalid Architecture value");
}

Architecture parse_architecture(std::string_view name) {
    std::string key = core::to_lower(core::trim(name));
    if (key == "m1" || key == "m-1") return Architecture::M1;
    if (key == "m2" || key == "m-2") return Architecture::M2;
    if (key == "m3" || key == "m-3") return Architecture::M3;
    throw std::invalid_argument("unknown architecture: " + std::string(name));
}

void PipelineConfig::validate() const {
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be positive");
    if (!prompts) throw std::invalid_argument("prompt library is not bound");
    auto require = [](bool bound, const char* what) {
        if (!bound) throw std::invalid_argument(std::string("logical model not bound: ") + what);
    };
    switch (architecture) {
    case Architecture::M1:
        require(models.monolithic.has_value(), "monolithic");
        break;
    case Architecture::M2:
        require(models.classifier.has_value(), "classifier");
        for (BiasType type : core::kBiasedTypes)
            require(models.reformulators.count(type) > 0,
                    ("reformulator/" + std::string(core::canonical_label(type))).c_str());
        break;
    case Architecture::M3:
        require(models.classifier.has_value(), "classifier");
        for (BiasType type : core::kBiasedTypes) {
            require(models.extractors.count(type) > 0,
                    ("extractor/" + std::string(core::canonical_label(type))).c_str());
            require(models.reformulators.count(type) > 0,
                    ("reformulator/" + std::string(core::canonical_label(type))).c_str());
        }
        break;
    }
}

PipelineError::PipelineError(std::string detail, std::vector<IterationRecord> partial)
    : std::runtime_error(std::move(detail)), partial_(std::move(partial)) {}

namespace {

std::string run_model(const LogicalModel& model, const dataset::FewShotPrompt& prompt,
                      const backend::SamplingParams& sampling) {
    return model.backend->complete(model.model_id, prompt.render(), sampling);
}

BiasType classify_step(const Sentence& text, const PipelineConfig& config) {
    dataset::PromptSubtask subtask = dataset::PromptSubtask::classify();
    dataset::FewShotPrompt prompt = dataset::build_prompt(
        subtask, config.prompts->examples_for(subtask), dataset::PromptQuery{text, std::nullopt});
    std::string completion = run_model(*config.models.classifier, prompt, config.sampling);
    return core::parse_bias_type(completion);
}

core::TermList extract_step(const Sentence& text, BiasType type, const PipelineConfig& config) {
    dataset::PromptSubtask subtask = dataset::PromptSubtask::extract(type);
    dataset::FewShotPrompt prompt = dataset::build_prompt(
        subtask, config.prompts->examples_for(subtask), dataset::PromptQuery{text, std::nullopt});
    std::string completion = run_model(config.models.extractors.at(type), prompt, config.sampling);
    return backend::parse_terms(completion);
}

Sentence rewrite_step(const Sentence& text, BiasType type,
                      const std::optional<core::TermList>& terms, const PipelineConfig& config) {
    dataset::PromptSubtask subtask = terms ? dataset::PromptSubtask::reformulate(type)
                                           : dataset::PromptSubtask::reformulate_sentence_only(type);
    dataset::FewShotPrompt prompt = dataset::build_prompt(
        subtask, config.prompts->examples_for(subtask), dataset::PromptQuery{text, terms});
    std::string completion = run_model(config.models.reformulators.at(type), prompt, config.sampling);
    if (core::trim(completion).empty())
        throw backend::BackendError("reformulator returned an empty completion");
    return Sentence(completion);
}

DebiasTrace debias_monolithic(const Sentence& text, const PipelineConfig& config) {
    dataset::PromptSubtask subtask = dataset::PromptSubtask::monolithic();
    dataset::FewShotPrompt prompt =
        dataset::build_prompt(subtask, config.prompts->examples_for(subtask),
                              dataset::PromptQuery{text, std::nullopt},
                              config.prompts->monolithic_count);
    std::string completion = run_model(*config.models.monolithic, prompt, config.sampling);
    if (core::trim(completion).empty())
        throw backend::BackendError("monolithic model returned an empty completion");
    Sentence output(completion);
    DebiasTrace trace{{IterationRecord{text, std::nullopt, {}, output}},
                      output,
                      TerminationReason::MaxIterations};
    return trace;
}

DebiasTrace debias_iterative(const Sentence& text, const PipelineConfig& config) {
    const bool use_extractor = config.architecture == Architecture::M3;
    std::vector<IterationRecord> iterations;
    Sentence current = text;

    for (int iteration = 0; iteration < config.max_iterations; ++iteration) {
        BiasType predicted;
        try {
            predicted = classify_step(current, config);
        } catch (const std::exception& e) {
            throw PipelineError(std::string("classification failed: ") + e.what(),
                                std::move(iterations));
        }

        if (predicted == BiasType::Unbiased) {
            iterations.push_back(IterationRecord{current, predicted, {}, current});
            return DebiasTrace{std::move(iterations), current,
                               TerminationReason::ClassifiedUnbiased};
        }

        std::optional<core::TermList> terms;
        if (use_extractor) {
            try {
                terms = extract_step(current, predicted, config);
            } catch (const std::exception& e) {
                throw PipelineError(std::string("extraction failed: ") + e.what(),
                                    std::move(iterations));
            }
        }

        Sentence output = current;
        try {
            output = rewrite_step(current, predicted, terms, config);
        } catch (const std::exception& e) {
            throw PipelineError(std::string("reformulation failed: ") + e.what(),
                                std::move(iterations));
        }

        iterations.push_back(
            IterationRecord{current, predicted, terms.value_or(core::TermList{}), output});

        if (output == current)
            return DebiasTrace{std::move(iterations), output, TerminationReason::NoChange};
        current = output;
    }
    return DebiasTrace{std::move(iterations), current, TerminationReason::MaxIterations};
}

}  // namespace

DebiasTrace debias(const Sentence& text, const PipelineConfig& config) {
    config.validate();
    if (config.architecture == Architecture::M1) {
        try {
            return debias_monolithic(text, config);
        } catch (const PipelineError&) {
            throw;
        } catch (const std::exception& e) {
            throw PipelineError(e.what(), {});
        }
    }
    return debias_iterative(text, config);
}

std::vector<DebiasResult> debias_batch(const std::vector<Sentence>& texts,
                                       const PipelineConfig& config) {
    config.validate();
    std::vector<DebiasResult> results(texts.size());
    const int threads = std::clamp(config.concurrency, 1,
                                   static_cast<int>(std::max<std::size_t>(texts.size(), 1)));

#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::size_t i = 0; i < texts.size(); ++i) {
        try {
            results[i].trace = debias(texts[i], config);
        } catch (const PipelineError& e) {
            results[i].error = e.what();
            results[i].partial = e.partial_iterations();
        } catch (const std::exception& e) {
            results[i].error = e.what();
        }
    }
    return results;
}

std::string trace_to_json(const DebiasTrace& trace) {
    json iterations = json::array();
    for (const IterationRecord& record : trace.iterations) {
        json item;
        item["input_text"] = record.input_text.text();
        if (record.predicted_type)
            item["predicted_type"] = std::string(core::canonical_label(*record.predicted_type));
        else
            item["predicted_type"] = nullptr;
        item["extracted_terms"] = record.extracted_terms;
        item["output_text"] = record.output_text.text();
        iterations.push_back(std::move(item));
    }
    json doc;
    doc["input"] = trace.iterations.front().input_text.text();
    doc["final_text"] = trace.final_text.text();
    doc["terminated_by"] = std::string(core::termination_reason_name(trace.terminated_by));
    doc["iterations"] = std::move(iterations);
    return doc.dump();
}

}  // namespace debias::pipeline

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "debias/backend.hpp"
#include "debias/core.hpp"
#include "debias/prompts.hpp"

namespace debias::pipeline {

enum class Architecture { M1, M2, M3 };

std::string_view architecture_name(Architecture arch);      // "m1" / "m2" / "m3"
std::string_view architecture_display(Architecture arch);   // "M-1" / "M-2" / "M-3"
Architecture parse_architecture(std::string_view name);

/// One logical model: a backend plus the model identifier sent with each
/// request. The prompt template is supplied by the caller per subtask.
struct LogicalModel {
    std::shared_ptr<backend::CompletionBackend> backend;
    std::string model_id;
};

/// The logical models an architecture may need. Which ones must be bound
/// depends on the architecture; validate() enforces that.
struct ModelBindings {
    std::optional<LogicalModel> classifier;
    std::map<core::BiasType, LogicalModel> extractors;
    std::map<core::BiasType, LogicalModel> reformulators;
    std::optional<LogicalModel> monolithic;
};

struct PipelineConfig {
    Architecture architecture = Architecture::M3;
    int max_iterations = 5;
    ModelBindings models;
    backend::SamplingParams sampling;
    std::shared_ptr<const dataset::PromptLibrary> prompts;
    int concurrency = 4;  // batch-level parallelism

    /// Throws std::invalid_argument unless every logical model the
    /// architecture needs is bound and a prompt library is present.
    void validate() const;
};

/// Raised when a run fails mid-way; carries whatever trace had been
/// accumulated. The trace may be empty if the very first step failed.
class PipelineError : public std::runtime_error {
public:
    PipelineError(std::string detail, std::vector<core::IterationRecord> partial);
    const std::vector<core::IterationRecord>& partial_iterations() const noexcept {
        return partial_;
    }

private:
    std::vector<core::IterationRecord> partial_;
};

/// Runs one sentence through the configured architecture:
///   M-3: classify -> (extract, reformulate) per iteration until the
///        classifier reports unbiased;
///   M-2: classify -> reformulate (sentence only) per iteration;
///   M-1: one monolithic rewrite, single iteration.
/// Stops early when an iteration leaves the text unchanged while still
/// classified biased (NoChange) or when max_iterations is exhausted.
core::DebiasTrace debias(const core::Sentence& text, const PipelineConfig& config);

/// A batch slot: either a completed trace or the error that stopped the
/// run, with any iterations finished before the failure preserved.
struct DebiasResult {
    std::optional<core::DebiasTrace> trace;
    std::vector<core::IterationRecord> partial;
    std::string error;

    bool ok() const noexcept { return error.empty(); }
};

/// Runs debias over every text; output order matches input order and
/// per-item failures are recorded in place.
std::vector<DebiasResult> debias_batch(const std::vector<core::Sentence>& texts,
                                       const PipelineConfig& config);

/// DebiasTrace as JSON: {input, final_text, terminated_by, iterations}.
std::string trace_to_json(const core::DebiasTrace& trace);

}  // namespace debias::pipeline

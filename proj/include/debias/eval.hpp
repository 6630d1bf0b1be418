#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "debias/core.hpp"
#include "debias/embeddings.hpp"
#include "debias/pipeline.hpp"

namespace debias::eval {

struct ClassCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

/// Per-class true/false positive and false negative tallies over the
/// four-way taxonomy.
struct ConfusionCounts {
    std::array<ClassCounts, 4> by_type{};

    ClassCounts& at(core::BiasType type) { return by_type[static_cast<std::size_t>(type)]; }
    const ClassCounts& at(core::BiasType type) const {
        return by_type[static_cast<std::size_t>(type)];
    }
};

struct F1Scores {
    std::map<core::BiasType, double> per_type;
    double micro = 0.0;
};

/// Precision/recall/F1 per class with the 0/0 -> 0 convention; micro F1
/// from counts summed over the classes listed in `micro_over`.
F1Scores f1_scores(const ConfusionCounts& counts,
                   std::span<const core::BiasType> micro_over = core::kAllBiasTypes);

/// One classifier call per test item; four-class confusion. Backend
/// failures count as a missed gold class and are tallied separately.
struct ClassificationEval {
    F1Scores scores;
    ConfusionCounts counts;
    long backend_errors = 0;
};
ClassificationEval eval_classification(const std::vector<core::SentencePair>& test,
                                       const pipeline::PipelineConfig& config);

/// Routes each item to the extractor of its gold type and scores the
/// predicted terms against the gold terms as lowercased sets (the "∅"
/// marker is ignored). Term instances accumulate as tp/fp/fn per type.
struct ExtractionEval {
    F1Scores scores;  // micro over the three bias classes
    ConfusionCounts counts;
    long backend_errors = 0;
};
ExtractionEval eval_extraction(const std::vector<core::SentencePair>& test,
                               const pipeline::PipelineConfig& config);

/// End-to-end debiasing F1. An item of gold type t counts tp_t when the
/// run removed the bias (final text equals the gold rewrite,
/// whitespace-normalized, or the judge classifies it unbiased) AND the
/// first iteration predicted t; fn_t otherwise; fp on the first
/// iteration's type when it differs from gold. M-1 has no classifier, so
/// its per-type scores group by gold type with tp = success and fp = 0.
struct DebiasEval {
    F1Scores scores;  // micro over the three bias classes
    ConfusionCounts counts;
    long item_errors = 0;
    long n_items = 0;
};
DebiasEval eval_debias(const std::vector<core::SentencePair>& test,
                       const pipeline::PipelineConfig& config,
                       const std::optional<pipeline::LogicalModel>& judge = std::nullopt);

/// MSWN per (corpus, vocabulary list): null cells where every entry was
/// out of corpus or vocabulary.
struct MswnComparison {
    std::vector<std::string> vocab_names;
    std::vector<std::optional<embeddings::MswnReport>> before;  // one per vocab list
    std::vector<std::optional<embeddings::MswnReport>> after;
    long warnings = 0;

    std::string to_json() const;
    std::string to_text_table() const;
};
MswnComparison mswn_comparison(const std::vector<core::Sentence>& before,
                               const std::vector<core::Sentence>& after,
                               const std::vector<std::pair<std::string, std::vector<std::string>>>& vocabularies,
                               const embeddings::EmbeddingTable& table);

/// Everything the evaluate command reports for one architecture.
struct EvaluationReport {
    pipeline::Architecture architecture = pipeline::Architecture::M3;
    long n_items = 0;
    DebiasEval debias;
    std::optional<ClassificationEval> classification;  // absent for M-1
    std::optional<ExtractionEval> extraction;          // M-3 only
    std::optional<embeddings::MswnReport> mswn_before;
    std::optional<embeddings::MswnReport> mswn_after;
};

/// Serializes reports (values rounded to 6 decimal places) and renders
/// the side-by-side text table: one row per bias type plus the micro
/// average, one column per architecture.
std::string reports_to_json(const std::vector<EvaluationReport>& reports);
std::string reports_to_text_table(const std::vector<EvaluationReport>& reports);

/// Metric serialization convention: 6 decimal places.
double round6(double value);

}  // namespace debias::eval

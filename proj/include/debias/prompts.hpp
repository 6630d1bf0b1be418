#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "debias/core.hpp"

namespace debias::dataset {

enum class SubtaskKind { Classify, Extract, Reformulate, MonolithicDebias };

/// Identifies one logical few-shot task. Reformulate comes in two
/// flavours: with the extracted terms in the input (the three-stage
/// pipeline) or sentence-only (the classify-then-rewrite pipeline).
struct PromptSubtask {
    SubtaskKind kind = SubtaskKind::Classify;
    std::optional<core::BiasType> bias_type;
    bool with_terms = true;

    static PromptSubtask classify();
    static PromptSubtask extract(core::BiasType type);
    static PromptSubtask reformulate(core::BiasType type);
    static PromptSubtask reformulate_sentence_only(core::BiasType type);
    static PromptSubtask monolithic();

    bool operator==(const PromptSubtask&) const = default;
};

class WrongExampleCountError : public std::runtime_error {
public:
    WrongExampleCountError(std::size_t expected, std::size_t actual);
};

class MixedBiasTypesError : public std::runtime_error {
public:
    explicit MixedBiasTypesError(std::string detail);
};

/// The input side of a prompt query; terms are present only for the
/// terms-carrying Reformulate flavour.
struct PromptQuery {
    core::Sentence sentence;
    std::optional<core::TermList> terms;
};

/// A deterministic few-shot prompt: fixed header, rendered example
/// blocks in given order, and a query block ending with the bare answer
/// field. render() is byte-stable for identical inputs.
struct FewShotPrompt {
    PromptSubtask subtask;
    std::string header;
    std::vector<std::pair<std::string, std::string>> examples;  // (input block, output block)
    std::string query;

    std::string render() const;
};

/// Fixed per-subtask header line; part of the wire contract.
std::string subtask_header(const PromptSubtask& subtask);

/// Expected example count per subtask (classify 40, extract/reformulate
/// 10, monolithic as configured).
std::size_t expected_example_count(const PromptSubtask& subtask, std::size_t monolithic_count);

/// Renders the prompt for `subtask` over `examples`. Counts are enforced
/// (WrongExampleCountError) and Extract/Reformulate examples must all
/// carry the subtask's bias type (MixedBiasTypesError).
FewShotPrompt build_prompt(const PromptSubtask& subtask,
                           const std::vector<core::SentencePair>& examples,
                           const PromptQuery& query, std::size_t monolithic_count = 10);

/// Comma-separated term list: split on commas, trim, drop empties; the
/// "∅" marker passes through.
core::TermList parse_term_list(std::string_view text);

/// A rendered prompt's query block, recovered through the template
/// delimiters. Throws std::invalid_argument when the text does not match
/// the template.
struct ParsedQuery {
    PromptSubtask subtask;
    std::string sentence;
    std::optional<core::TermList> terms;
};

ParsedQuery parse_rendered_prompt(std::string_view rendered);

/// Few-shot example sets for every subtask, partitioned from one labeled
/// dataset: 10 pairs per bias type plus 10 unbiased for the classifier.
struct PromptLibrary {
    std::vector<core::SentencePair> classify_examples;
    std::map<core::BiasType, std::vector<core::SentencePair>> extract_examples;
    std::map<core::BiasType, std::vector<core::SentencePair>> reformulate_examples;
    std::vector<core::SentencePair> monolithic_examples;
    std::size_t monolithic_count = 10;

    static PromptLibrary from_pairs(const std::vector<core::SentencePair>& pairs,
                                    std::size_t monolithic_count = 10);

    const std::vector<core::SentencePair>& examples_for(const PromptSubtask& subtask) const;
};

}  // namespace debias::dataset

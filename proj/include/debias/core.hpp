#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace debias::core {

/// The four-way bias taxonomy every classifier output maps onto.
enum class BiasType {
    Generalization,
    Explicit,
    Benevolent,
    Unbiased,
};

inline constexpr BiasType kAllBiasTypes[] = {
    BiasType::Generalization,
    BiasType::Explicit,
    BiasType::Benevolent,
    BiasType::Unbiased,
};

/// The three positive (bias-carrying) classes, in report order.
inline constexpr BiasType kBiasedTypes[] = {
    BiasType::Generalization,
    BiasType::Explicit,
    BiasType::Benevolent,
};

/// Canonical wire string for a label ("generalization", "explicit", ...).
std::string_view canonical_label(BiasType type);

/// Human-readable table heading ("Gender generalization", ...).
std::string_view display_label(BiasType type);

class UnknownLabelError : public std::runtime_error {
public:
    explicit UnknownLabelError(std::string label);
    const std::string& label() const noexcept { return label_; }

private:
    std::string label_;
};

/// Case-insensitive, whitespace-trimmed parse of a model label string.
/// Accepts the canonical strings plus declared aliases; throws
/// UnknownLabelError for anything else.
BiasType parse_bias_type(std::string_view label_text);

/// A single English sentence; non-empty after whitespace trimming.
class Sentence {
public:
    explicit Sentence(std::string text);

    const std::string& text() const noexcept { return text_; }

    bool operator==(const Sentence& other) const noexcept = default;

private:
    std::string text_;
};

/// Ordered bias-inducing terms or their substitutes. The marker "∅"
/// (kEmptyMarker) stands for a deleted or inserted span.
using TermList = std::vector<std::string>;

inline constexpr std::string_view kEmptyMarker = "∅";

/// A biased/unbiased sentence pair with its aligned edit terms and label.
struct SentencePair {
    Sentence biased;
    Sentence unbiased;
    TermList bias_terms;
    TermList substitutes;
    std::optional<BiasType> label;
};

enum class TerminationReason {
    ClassifiedUnbiased,
    MaxIterations,
    NoChange,
};

std::string_view termination_reason_name(TerminationReason reason);

/// One classify/extract/reformulate step of a debiasing run.
/// predicted_type is empty for the monolithic architecture, which never
/// classifies; extracted_terms is empty unless an extractor ran.
struct IterationRecord {
    Sentence input_text;
    std::optional<BiasType> predicted_type;
    TermList extracted_terms;
    Sentence output_text;
};

/// Full record of a debiasing run; iterations is never empty.
struct DebiasTrace {
    std::vector<IterationRecord> iterations;
    Sentence final_text;
    TerminationReason terminated_by;
};

// --- shared text helpers ---

/// Trim ASCII whitespace from both ends.
std::string trim(std::string_view text);

/// Collapse whitespace runs to single spaces and trim.
std::string whitespace_normalize(std::string_view text);

/// ASCII-lowercase copy; bytes outside ASCII are left untouched.
std::string to_lower(std::string_view text);

/// Lowercased alphabetic tokens (non-alphabetic characters split tokens;
/// bytes >= 0x80 count as letters so UTF-8 words survive).
std::vector<std::string> alpha_tokens(std::string_view text);

}  // namespace debias::core

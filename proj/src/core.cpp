#include "debias/core.hpp"

#include <cctype>
#include <unordered_map>

namespace debias::core {

std::string_view canonical_label(BiasType type) {
    switch (type) {
    case BiasType::Generalization: return "generalization";
    case BiasType::Explicit: return "explicit";
    case BiasType::Benevolent: return "benevolent";
    case BiasType::Unbiased: return "unbiased";
    }
    throw std::logic_error("invalid BiasType value");
}

std::string_view display_label(BiasType type) {
    switch (type) {
    case BiasType::Generalization: return "Gender generalization";
    case BiasType::Explicit: return "Explicit gender bias";
    case BiasType::Benevolent: return "Benevolent sexism";
    case BiasType::Unbiased: return "Unbiased";
    }
    throw std::logic_error("invalid BiasType value");
}

UnknownLabelError::UnknownLabelError(std::string label)
    : std::runtime_error("unknown bias label: \"" + label + "\""), label_(std::move(label)) {}

BiasType parse_bias_type(std::string_view label_text) {
    static const std::unordered_map<std::string, BiasType> aliases = {
        {"generalization", BiasType::Generalization},
        {"generalisation", BiasType::Generalization},
        {"gender generalization", BiasType::Generalization},
        {"gender generalisation", BiasType::Generalization},
        {"explicit", BiasType::Explicit},
        {"explicit gender bias", BiasType::Explicit},
        {"benevolent", BiasType::Benevolent},
        {"benevolent sexism", BiasType::Benevolent},
        {"unbiased", BiasType::Unbiased},
        {"no bias", BiasType::Unbiased},
        {"none", BiasType::Unbiased},
    };
    std::string key = to_lower(whitespace_normalize(label_text));
    auto it = aliases.find(key);
    if (it == aliases.end()) throw UnknownLabelError(std::string(label_text));
    return it->second;
}

Sentence::Sentence(std::string text) : text_(std::move(text)) {
    if (trim(text_).empty()) throw std::invalid_argument("sentence is empty after trimming");
}

std::string_view termination_reason_name(TerminationReason reason) {
    switch (reason) {
    case TerminationReason::ClassifiedUnbiased: return "classified_unbiased";
    case TerminationReason::MaxIterations: return "max_iterations";
    case TerminationReason::NoChange: return "no_change";
    }
    throw std::logic_error("invalid TerminationReason value");
}

std::string trim(std::string_view text) {
    size_t begin = 0;
    size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return std::string(text.substr(begin, end - begin));
}

std::string whitespace_normalize(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_space = true;  // swallow leading whitespace
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
        } else {
            if (in_space && !out.empty()) out.push_back(' ');
            in_space = false;
            out.push_back(c);
        }
    }
    return out;
}

std::string to_lower(std::string_view text) {
    std::string out(text);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> alpha_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        unsigned char uc = static_cast<unsigned char>(c);
        bool word_char = std::isalpha(uc) != 0 || uc >= 0x80;
        if (word_char) {
            current.push_back(static_cast<char>(std::tolower(uc)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

}  // namespace debias::core

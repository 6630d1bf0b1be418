#include "debias/prompts.hpp"

#include <algorithm>
#include <array>

namespace debias::dataset {

using core::BiasType;

PromptSubtask PromptSubtask::classify() { return {SubtaskKind::Classify, std::nullopt, true}; }
PromptSubtask PromptSubtask::extract(BiasType type) {
    return {SubtaskKind::Extract, type, true};
}
PromptSubtask PromptSubtask::reformulate(BiasType type) {
    return {SubtaskKind::Reformulate, type, true};
}
PromptSubtask PromptSubtask::reformulate_sentence_only(BiasType type) {
    return {SubtaskKind::Reformulate, type, false};
}
PromptSubtask PromptSubtask::monolithic() {
    return {SubtaskKind::MonolithicDebias, std::nullopt, false};
}

WrongExampleCountError::WrongExampleCountError(std::size_t expected, std::size_t actual)
    : std::runtime_error("expected " + std::to_string(expected) + " prompt examples, got " +
                         std::to_string(actual)) {}

MixedBiasTypesError::MixedBiasTypesError(std::string detail)
    : std::runtime_error("mixed bias types in prompt examples: " + std::move(detail)) {}

namespace {

constexpr std::string_view kSentenceField = "Sentence: ";
constexpr std::string_view kLabelField = "Label:";
constexpr std::string_view kTermsField = "Terms:";
constexpr std::string_view kRewriteField = "Rewrite:";

// Sentences are rendered on one template line; any stray newline in the
// text would break the block structure.
std::string one_line(const std::string& text) {
    std::string out = text;
    std::replace(out.begin(), out.end(), '\n', ' ');
    std::replace(out.begin(), out.end(), '\r', ' ');
    return out;
}

std::string join_terms(const core::TermList& terms) {
    std::string out;
    for (const std::string& term : terms) {
        if (!out.empty()) out += ", ";
        out += term;
    }
    return out;
}

std::string terms_line(const core::TermList& terms) {
    std::string joined = join_terms(terms);
    if (joined.empty()) return std::string(kTermsField);
    return std::string(kTermsField) + " " + joined;
}

std::string sentence_line(const core::Sentence& sentence) {
    return std::string(kSentenceField) + one_line(sentence.text());
}

BiasType require_label(const core::SentencePair& pair) {
    if (!pair.label) throw MixedBiasTypesError("example without a label");
    return *pair.label;
}

}  // namespace

std::string subtask_header(const PromptSubtask& subtask) {
    switch (subtask.kind) {
    case SubtaskKind::Classify:
        return "Classify the gender bias in the sentence as generalization, explicit, "
               "benevolent, or unbiased.";
    case SubtaskKind::Extract:
        return "List the terms that carry " + std::string(core::canonical_label(*subtask.bias_type)) +
               " bias in the sentence, separated by commas.";
    case SubtaskKind::Reformulate:
        return "Rewrite the sentence to remove " +
               std::string(core::canonical_label(*subtask.bias_type)) + " bias.";
    case SubtaskKind::MonolithicDebias:
        return "Rewrite the sentence to remove gender bias.";
    }
    throw std::logic_error("invalid SubtaskKind value");
}

std::size_t expected_example_count(const PromptSubtask& subtask, std::size_t monolithic_count) {
    switch (subtask.kind) {
    case SubtaskKind::Classify: return 40;
    case SubtaskKind::Extract:
    case SubtaskKind::Reformulate: return 10;
    case SubtaskKind::MonolithicDebias: return monolithic_count;
    }
    throw std::logic_error("invalid SubtaskKind value");
}

std::string FewShotPrompt::render() const {
    std::string out = header;
    for (const auto& [input, output] : examples) {
        out += "\n\n";
        out += input;
        out += '\n';
        out += output;
    }
    out += "\n\n";
    out += query;
    return out;
}

FewShotPrompt build_prompt(const PromptSubtask& subtask,
                           const std::vector<core::SentencePair>& examples,
                           const PromptQuery& query, std::size_t monolithic_count) {
    const std::size_t expected = expected_example_count(subtask, monolithic_count);
    if (examples.size() != expected) throw WrongExampleCountError(expected, examples.size());

    FewShotPrompt prompt;
    prompt.subtask = subtask;
    prompt.header = subtask_header(subtask);

    switch (subtask.kind) {
    case SubtaskKind::Classify: {
        std::map<BiasType, std::size_t> per_type;
        for (const core::SentencePair& pair : examples) ++per_type[require_label(pair)];
        for (BiasType type : core::kAllBiasTypes) {
            if (per_type[type] != 10) throw WrongExampleCountError(10, per_type[type]);
        }
        for (const core::SentencePair& pair : examples) {
            prompt.examples.emplace_back(
                sentence_line(pair.biased),
                std::string(kLabelField) + " " + std::string(core::canonical_label(*pair.label)));
        }
        prompt.query = sentence_line(query.sentence) + "\n" + std::string(kLabelField);
        break;
    }
    case SubtaskKind::Extract: {
        for (const core::SentencePair& pair : examples) {
            if (require_label(pair) != *subtask.bias_type)
                throw MixedBiasTypesError("extract example labeled " +
                                          std::string(core::canonical_label(*pair.label)));
            prompt.examples.emplace_back(sentence_line(pair.biased), terms_line(pair.bias_terms));
        }
        prompt.query = sentence_line(query.sentence) + "\n" + std::string(kTermsField);
        break;
    }
    case SubtaskKind::Reformulate: {
        for (const core::SentencePair& pair : examples) {
            if (require_label(pair) != *subtask.bias_type)
                throw MixedBiasTypesError("reformulate example labeled " +
                                          std::string(core::canonical_label(*pair.label)));
            std::string input = sentence_line(pair.biased);
            if (subtask.with_terms) input += "\n" + terms_line(pair.bias_terms);
            prompt.examples.emplace_back(std::move(input),
                                         std::string(kRewriteField) + " " + one_line(pair.unbiased.text()));
        }
        prompt.query = sentence_line(query.sentence);
        if (subtask.with_terms) {
            if (!query.terms)
                throw std::invalid_argument("reformulate query requires a term list");
            prompt.query += "\n" + terms_line(*query.terms);
        }
        prompt.query += "\n" + std::string(kRewriteField);
        break;
    }
    case SubtaskKind::MonolithicDebias: {
        for (const core::SentencePair& pair : examples) {
            prompt.examples.emplace_back(sentence_line(pair.biased),
                                         std::string(kRewriteField) + " " + one_line(pair.unbiased.text()));
        }
        prompt.query = sentence_line(query.sentence) + "\n" + std::string(kRewriteField);
        break;
    }
    }
    return prompt;
}

core::TermList parse_term_list(std::string_view text) {
    core::TermList terms;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        std::string_view piece =
            comma == std::string_view::npos ? text.substr(start) : text.substr(start, comma - start);
        std::string term = core::trim(piece);
        if (!term.empty()) terms.push_back(std::move(term));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return terms;
}

ParsedQuery parse_rendered_prompt(std::string_view rendered) {
    std::size_t header_end = rendered.find("\n\n");
    if (header_end == std::string_view::npos)
        throw std::invalid_argument("prompt has no header/body separator");
    std::string header(rendered.substr(0, header_end));

    // Reverse the header table. The two Reformulate flavours share a
    // header and are told apart by the query's Terms line below.
    std::optional<PromptSubtask> subtask;
    if (header == subtask_header(PromptSubtask::classify())) {
        subtask = PromptSubtask::classify();
    } else if (header == subtask_header(PromptSubtask::monolithic())) {
        subtask = PromptSubtask::monolithic();
    } else {
        for (BiasType type : core::kBiasedTypes) {
            if (header == subtask_header(PromptSubtask::extract(type)))
                subtask = PromptSubtask::extract(type);
            else if (header == subtask_header(PromptSubtask::reformulate(type)))
                subtask = PromptSubtask::reformulate(type);
        }
    }
    if (!subtask) throw std::invalid_argument("unrecognized prompt header: " + header);

    std::size_t query_begin = rendered.rfind("\n\n");
    std::string_view query = rendered.substr(query_begin + 2);

    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= query.size()) {
        std::size_t nl = query.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back(query.substr(pos));
            break;
        }
        lines.push_back(query.substr(pos, nl - pos));
        pos = nl + 1;
    }
    if (lines.empty() || lines[0].substr(0, kSentenceField.size()) != kSentenceField)
        throw std::invalid_argument("query block lacks a Sentence line");

    ParsedQuery parsed;
    parsed.subtask = *subtask;
    parsed.sentence = std::string(lines[0].substr(kSentenceField.size()));

    auto expect_bare = [&](std::size_t index, std::string_view field) {
        if (index >= lines.size() || lines[index] != field)
            throw std::invalid_argument("query block does not end with the answer field");
    };

    switch (subtask->kind) {
    case SubtaskKind::Classify:
        expect_bare(1, kLabelField);
        break;
    case SubtaskKind::Extract:
        expect_bare(1, kTermsField);
        break;
    case SubtaskKind::Reformulate: {
        if (lines.size() >= 3 && lines[1].substr(0, kTermsField.size()) == kTermsField) {
            std::string_view rest = lines[1].substr(kTermsField.size());
            parsed.terms = parse_term_list(rest);
            expect_bare(2, kRewriteField);
        } else {
            parsed.subtask.with_terms = false;
            expect_bare(1, kRewriteField);
        }
        break;
    }
    case SubtaskKind::MonolithicDebias:
        expect_bare(1, kRewriteField);
        break;
    }
    return parsed;
}

PromptLibrary PromptLibrary::from_pairs(const std::vector<core::SentencePair>& pairs,
                                        std::size_t monolithic_count) {
    PromptLibrary library;
    library.monolithic_count = monolithic_count;
    std::map<BiasType, std::size_t> per_type;
    for (const core::SentencePair& pair : pairs) {
        BiasType type = require_label(pair);
        ++per_type[type];
        library.classify_examples.push_back(pair);
        if (type != BiasType::Unbiased) {
            library.extract_examples[type].push_back(pair);
            library.reformulate_examples[type].push_back(pair);
            if (library.monolithic_examples.size() < monolithic_count)
                library.monolithic_examples.push_back(pair);
        }
    }
    for (BiasType type : core::kAllBiasTypes) {
        if (per_type[type] != 10) throw WrongExampleCountError(10, per_type[type]);
    }
    if (library.monolithic_examples.size() != monolithic_count)
        throw WrongExampleCountError(monolithic_count, library.monolithic_examples.size());
    return library;
}

const std::vector<core::SentencePair>& PromptLibrary::examples_for(
    const PromptSubtask& subtask) const {
    switch (subtask.kind) {
    case SubtaskKind::Classify: return classify_examples;
    case SubtaskKind::Extract: return extract_examples.at(*subtask.bias_type);
    case SubtaskKind::Reformulate: return reformulate_examples.at(*subtask.bias_type);
    case SubtaskKind::MonolithicDebias: return monolithic_examples;
    }
    throw std::logic_error("invalid SubtaskKind value");
}

}  // namespace debias::dataset

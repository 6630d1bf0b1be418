#include <istream>

#include <json.hpp>

#include "debias/backend.hpp"

namespace debias::backend {

using core::BiasType;
using nlohmann::json;

TransportError::TransportError(const std::string& detail)
    : BackendError("transport error: " + detail) {}

TimeoutError::TimeoutError() : BackendError("request timed out") {}

ApiError::ApiError(int status, std::string body)
    : BackendError("API error " + std::to_string(status) + ": " + body),
      status_(status),
      body_(std::move(body)) {}

core::TermList parse_terms(std::string_view completion) {
    return dataset::parse_term_list(completion);
}

namespace {
constexpr char kSep = '\x1f';

std::string joined_terms_key(const core::TermList& terms) {
    std::string out;
    for (const std::string& term : terms) {
        out += term;
        out += kSep;
    }
    return out;
}
}  // namespace

std::string OracleRules::sentence_key(std::string_view sentence) {
    return core::whitespace_normalize(sentence);
}

std::string OracleRules::extract_key(BiasType type, std::string_view sentence) {
    return std::string(core::canonical_label(type)) + kSep + sentence_key(sentence);
}

std::string OracleRules::rewrite_key(BiasType type, std::string_view sentence,
                                     const core::TermList& terms) {
    return extract_key(type, sentence) + kSep + joined_terms_key(terms);
}

void OracleRules::add_classify(std::string_view sentence, BiasType label) {
    classify[sentence_key(sentence)] = label;
}

void OracleRules::add_extract(BiasType type, std::string_view sentence, core::TermList terms) {
    extract[extract_key(type, sentence)] = std::move(terms);
}

void OracleRules::add_rewrite(BiasType type, std::string_view sentence,
                              const core::TermList& terms, std::string output) {
    rewrite[rewrite_key(type, sentence, terms)] = std::move(output);
}

void OracleRules::add_monolithic(std::string_view sentence, std::string output) {
    monolithic[sentence_key(sentence)] = std::move(output);
}

OracleRules OracleRules::load(std::istream& source) {
    json doc = json::parse(source);
    OracleRules rules;
    for (const json& entry : doc.value("classify", json::array())) {
        rules.add_classify(entry.at("sentence").get<std::string>(),
                           core::parse_bias_type(entry.at("label").get<std::string>()));
    }
    for (const json& entry : doc.value("extract", json::array())) {
        rules.add_extract(core::parse_bias_type(entry.at("type").get<std::string>()),
                          entry.at("sentence").get<std::string>(),
                          entry.at("terms").get<core::TermList>());
    }
    for (const json& entry : doc.value("rewrite", json::array())) {
        rules.add_rewrite(core::parse_bias_type(entry.at("type").get<std::string>()),
                          entry.at("sentence").get<std::string>(),
                          entry.at("terms").get<core::TermList>(),
                          entry.at("output").get<std::string>());
    }
    for (const json& entry : doc.value("monolithic", json::array())) {
        rules.add_monolithic(entry.at("sentence").get<std::string>(),
                             entry.at("output").get<std::string>());
    }
    return rules;
}

OracleBackend::OracleBackend(OracleRules rules) : rules_(std::move(rules)) {}

std::string OracleBackend::complete(const std::string& /*model*/, const std::string& prompt,
                                    const SamplingParams& /*params*/) {
    dataset::ParsedQuery query = dataset::parse_rendered_prompt(prompt);
    switch (query.subtask.kind) {
    case dataset::SubtaskKind::Classify: {
        auto it = rules_.classify.find(OracleRules::sentence_key(query.sentence));
        BiasType label = it == rules_.classify.end() ? BiasType::Unbiased : it->second;
        return std::string(core::canonical_label(label));
    }
    case dataset::SubtaskKind::Extract: {
        auto it = rules_.extract.find(
            OracleRules::extract_key(*query.subtask.bias_type, query.sentence));
        if (it == rules_.extract.end()) return "";
        std::string out;
        for (const std::string& term : it->second) {
            if (!out.empty()) out += ", ";
            out += term;
        }
        return out;
    }
    case dataset::SubtaskKind::Reformulate: {
        core::TermList terms = query.terms.value_or(core::TermList{});
        auto it = rules_.rewrite.find(
            OracleRules::rewrite_key(*query.subtask.bias_type, query.sentence, terms));
        if (it == rules_.rewrite.end()) return query.sentence;  // identity fallback
        return it->second;
    }
    case dataset::SubtaskKind::MonolithicDebias: {
        auto it = rules_.monolithic.find(OracleRules::sentence_key(query.sentence));
        if (it == rules_.monolithic.end()) return query.sentence;
        return it->second;
    }
    }
    throw std::logic_error("invalid SubtaskKind value");
}

}  // namespace debias::backend

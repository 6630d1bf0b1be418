#include "debias/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <istream>
#include <unordered_set>

#include <json.hpp>

namespace debias::dataset {

using nlohmann::json;

MalformedRecordError::MalformedRecordError(std::size_t line_no, std::string detail)
    : std::runtime_error("malformed record at line " + std::to_string(line_no) + ": " + detail),
      line_no_(line_no) {}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

std::optional<RawPair> parse_tsv_record(const std::string& line, std::size_t line_no,
                                        std::size_t& dropped_identity) {
    std::vector<std::string> fields = split_tabs(line);
    if (fields.size() < 2 || fields.size() > 3)
        throw MalformedRecordError(line_no, "expected 2 or 3 tab-separated fields");
    if (core::trim(fields[0]).empty() || core::trim(fields[1]).empty())
        throw MalformedRecordError(line_no, "empty sentence field");
    if (fields[0] == fields[1]) {
        ++dropped_identity;
        return std::nullopt;
    }
    std::optional<core::BiasType> label;
    if (fields.size() == 3 && !core::trim(fields[2]).empty())
        label = core::parse_bias_type(fields[2]);
    return RawPair{core::Sentence(fields[0]), core::Sentence(fields[1]), label};
}

std::optional<RawPair> parse_jsonl_record(const std::string& line, std::size_t line_no,
                                          std::size_t& dropped_identity) {
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object())
        throw MalformedRecordError(line_no, "not a JSON object");
    if (!record.contains("biased") || !record.contains("unbiased"))
        throw MalformedRecordError(line_no, "missing biased/unbiased key");
    if (!record["biased"].is_string() || !record["unbiased"].is_string())
        throw MalformedRecordError(line_no, "biased/unbiased must be strings");
    std::string biased = record["biased"].get<std::string>();
    std::string unbiased = record["unbiased"].get<std::string>();
    if (core::trim(biased).empty() || core::trim(unbiased).empty())
        throw MalformedRecordError(line_no, "empty sentence field");
    if (biased == unbiased) {
        ++dropped_identity;
        return std::nullopt;
    }
    std::optional<core::BiasType> label;
    if (record.contains("label") && !record["label"].is_null()) {
        if (!record["label"].is_string())
            throw MalformedRecordError(line_no, "label must be a string");
        label = core::parse_bias_type(record["label"].get<std::string>());
    }
    return RawPair{core::Sentence(biased), core::Sentence(unbiased), label};
}

const std::unordered_set<std::string>& pronoun_set() {
    static const std::unordered_set<std::string> pronouns = {
        "he", "she", "him", "her", "his", "hers", "himself", "herself",
    };
    return pronouns;
}

bool is_ascii_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

}  // namespace

LoadResult load_pairs(std::istream& source, PairFormat format) {
    LoadResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        if (core::trim(line).empty()) continue;
        std::optional<RawPair> pair = format == PairFormat::Tsv
                                          ? parse_tsv_record(line, line_no, result.dropped_identity)
                                          : parse_jsonl_record(line, line_no, result.dropped_identity);
        if (pair) result.pairs.push_back(std::move(*pair));
    }
    return result;
}

std::vector<RawPair> filter_gender_pronouns(const std::vector<RawPair>& pairs) {
    std::vector<RawPair> kept;
    kept.reserve(pairs.size());
    for (const RawPair& pair : pairs) {
        std::vector<std::string> tokens = core::alpha_tokens(pair.biased.text());
        bool has_pronoun = std::any_of(tokens.begin(), tokens.end(), [](const std::string& t) {
            return pronoun_set().count(t) > 0;
        });
        if (has_pronoun) kept.push_back(pair);
    }
    return kept;
}

std::vector<std::string> diff_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t begin = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (begin == i) break;
        std::string_view word = text.substr(begin, i - begin);
        // Peel leading punctuation characters into their own tokens.
        std::size_t lead = 0;
        while (lead < word.size() && is_ascii_punct(word[lead])) ++lead;
        if (lead == word.size()) {
            // All punctuation: emit each character separately.
            for (char c : word) tokens.emplace_back(1, c);
            continue;
        }
        std::size_t tail = word.size();
        while (tail > lead && is_ascii_punct(word[tail - 1])) --tail;
        for (std::size_t k = 0; k < lead; ++k) tokens.emplace_back(1, word[k]);
        tokens.emplace_back(word.substr(lead, tail - lead));
        for (std::size_t k = tail; k < word.size(); ++k) tokens.emplace_back(1, word[k]);
    }
    return tokens;
}

std::vector<DiffRegion> diff_alignment(const core::Sentence& biased,
                                       const core::Sentence& unbiased) {
    const std::vector<std::string> a = diff_tokens(biased.text());
    const std::vector<std::string> b = diff_tokens(unbiased.text());
    const std::size_t n = a.size();
    const std::size_t m = b.size();

    // dp[i][j] = LCS length of a[i..] vs b[j..].
    std::vector<std::vector<std::size_t>> dp(n + 1, std::vector<std::size_t>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = m; j-- > 0;) {
            if (a[i] == b[j])
                dp[i][j] = dp[i + 1][j + 1] + 1;
            else
                dp[i][j] = std::max(dp[i + 1][j], dp[i][j + 1]);
        }
    }

    // Walk the table front to back. When a match is optimal, take it; on
    // ties between advancing sides, drop the unbiased token first so the
    // earliest biased tokens stay matchable.
    std::vector<std::pair<std::size_t, std::size_t>> matches;
    std::size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (a[i] == b[j] && dp[i][j] == dp[i + 1][j + 1] + 1) {
            matches.emplace_back(i, j);
            ++i;
            ++j;
        } else if (dp[i][j + 1] >= dp[i + 1][j]) {
            ++j;
        } else {
            ++i;
        }
    }

    std::vector<DiffRegion> regions;
    std::size_t prev_i = 0, prev_j = 0;
    auto flush_region = [&](std::size_t next_i, std::size_t next_j) {
        if (next_i > prev_i || next_j > prev_j)
            regions.push_back(DiffRegion{prev_i, next_i, prev_j, next_j});
    };
    for (const auto& [mi, mj] : matches) {
        flush_region(mi, mj);
        prev_i = mi + 1;
        prev_j = mj + 1;
    }
    flush_region(n, m);
    return regions;
}

std::pair<core::TermList, core::TermList> extract_term_diff(const core::Sentence& biased,
                                                            const core::Sentence& unbiased) {
    const std::vector<std::string> a = diff_tokens(biased.text());
    const std::vector<std::string> b = diff_tokens(unbiased.text());
    auto join = [](const std::vector<std::string>& tokens, std::size_t begin, std::size_t end) {
        std::string out;
        for (std::size_t k = begin; k < end; ++k) {
            if (!out.empty()) out.push_back(' ');
            out += tokens[k];
        }
        return out;
    };

    core::TermList terms;
    core::TermList substitutes;
    for (const DiffRegion& region : diff_alignment(biased, unbiased)) {
        std::string biased_span = join(a, region.biased_begin, region.biased_end);
        std::string unbiased_span = join(b, region.unbiased_begin, region.unbiased_end);
        terms.push_back(biased_span.empty() ? std::string(core::kEmptyMarker) : biased_span);
        substitutes.push_back(unbiased_span.empty() ? std::string(core::kEmptyMarker)
                                                    : unbiased_span);
    }
    return {terms, substitutes};
}

std::string to_canonical_json(const core::SentencePair& pair) {
    json record;
    record["biased"] = pair.biased.text();
    record["unbiased"] = pair.unbiased.text();
    record["bias_terms"] = pair.bias_terms;
    record["substitutes"] = pair.substitutes;
    if (pair.label)
        record["label"] = std::string(core::canonical_label(*pair.label));
    else
        record["label"] = nullptr;
    return record.dump();
}

std::vector<core::SentencePair> load_canonical(std::istream& source) {
    std::vector<core::SentencePair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        if (core::trim(line).empty()) continue;
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object())
            throw MalformedRecordError(line_no, "not a JSON object");
        for (const char* key : {"biased", "unbiased", "bias_terms", "substitutes"}) {
            if (!record.contains(key)) throw MalformedRecordError(line_no, std::string("missing key ") + key);
        }
        try {
            std::optional<core::BiasType> label;
            if (record.contains("label") && !record["label"].is_null())
                label = core::parse_bias_type(record["label"].get<std::string>());
            pairs.push_back(core::SentencePair{
                core::Sentence(record["biased"].get<std::string>()),
                core::Sentence(record["unbiased"].get<std::string>()),
                record["bias_terms"].get<core::TermList>(),
                record["substitutes"].get<core::TermList>(),
                label,
            });
        } catch (const core::UnknownLabelError&) {
            throw;
        } catch (const json::exception& e) {
            throw MalformedRecordError(line_no, e.what());
        } catch (const std::invalid_argument& e) {
            throw MalformedRecordError(line_no, e.what());
        }
    }
    return pairs;
}

}  // namespace debias::dataset

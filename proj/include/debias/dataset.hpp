#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "debias/core.hpp"

namespace debias::dataset {

class MalformedRecordError : public std::runtime_error {
public:
    MalformedRecordError(std::size_t line_no, std::string detail);
    std::size_t line_no() const noexcept { return line_no_; }

private:
    std::size_t line_no_;
};

/// An ingested biased/unbiased sentence pair, label optional until the
/// record has been manually annotated.
struct RawPair {
    core::Sentence biased;
    core::Sentence unbiased;
    std::optional<core::BiasType> label;
};

enum class PairFormat { Tsv, Jsonl };

struct LoadResult {
    std::vector<RawPair> pairs;
    std::size_t dropped_identity = 0;  // records where biased == unbiased
};

/// Reads `biased<TAB>unbiased[<TAB>label]` lines or JSONL objects with
/// keys {biased, unbiased, label?}. Identity records are dropped and
/// counted; malformed records throw with their 1-based line number.
LoadResult load_pairs(std::istream& source, PairFormat format);

/// Keeps pairs whose biased sentence contains a third-person gender
/// pronoun on a token boundary (he, she, him, her, his, hers, himself,
/// herself; case-insensitive).
std::vector<RawPair> filter_gender_pronouns(const std::vector<RawPair>& pairs);

/// Whitespace-split tokens with leading/trailing ASCII punctuation split
/// off as separate tokens ("her," -> "her", ",").
std::vector<std::string> diff_tokens(std::string_view text);

/// One maximal non-matching region of the token alignment, as half-open
/// token ranges into the biased and unbiased token sequences.
struct DiffRegion {
    std::size_t biased_begin = 0;
    std::size_t biased_end = 0;
    std::size_t unbiased_begin = 0;
    std::size_t unbiased_end = 0;
};

/// Longest-common-subsequence alignment over diff_tokens() of the two
/// sentences; ties prefer matches that start earlier on the biased side.
std::vector<DiffRegion> diff_alignment(const core::Sentence& biased,
                                       const core::Sentence& unbiased);

/// The bias-inducing terms and their substitutes: each alignment region
/// joined with single spaces, deletions/insertions marked with "∅" so the
/// two lists stay length-aligned.
std::pair<core::TermList, core::TermList> extract_term_diff(const core::Sentence& biased,
                                                            const core::Sentence& unbiased);

/// Canonical dataset record {biased, unbiased, bias_terms, substitutes,
/// label} serialized as one JSON object per line.
std::string to_canonical_json(const core::SentencePair& pair);

/// Parses canonical dataset JSONL; throws MalformedRecordError /
/// UnknownLabelError with the offending line number.
std::vector<core::SentencePair> load_canonical(std::istream& source);

}  // namespace debias::dataset

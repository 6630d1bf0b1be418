#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "debias/core.hpp"

namespace debias::embeddings {

class DimensionMismatchError : public std::runtime_error {
public:
    explicit DimensionMismatchError(std::size_t line_no);
    std::size_t line_no() const noexcept { return line_no_; }

private:
    std::size_t line_no_;
};

class MalformedLineError : public std::runtime_error {
public:
    explicit MalformedLineError(std::size_t line_no);
    std::size_t line_no() const noexcept { return line_no_; }

private:
    std::size_t line_no_;
};

class ZeroVectorError : public std::runtime_error {
public:
    ZeroVectorError();
};

class OutOfVocabularyError : public std::runtime_error {
public:
    explicit OutOfVocabularyError(std::string word);
    const std::string& word() const noexcept { return word_; }

private:
    std::string word_;
};

class EmptyVocabularyError : public std::runtime_error {
public:
    EmptyVocabularyError();
};

/// Immutable word -> vector map; every vector has exactly dim finite
/// components and words are stored lowercased.
struct EmbeddingTable {
    std::size_t dim = 0;
    std::unordered_map<std::string, std::vector<double>> vectors;

    const std::vector<double>* find(std::string_view word) const;
};

/// The she/he contrast pair used to score a word's gender lean.
struct GenderAnchors {
    std::vector<double> she_vec;
    std::vector<double> he_vec;

    /// Fetches "she" and "he" from the table; throws OutOfVocabularyError
    /// if either is missing, ZeroVectorError if either has zero norm.
    static GenderAnchors from_table(const EmbeddingTable& table);
};

/// Per-call result of mswn(): the metric value, how many words were used,
/// and which were skipped as out-of-vocabulary.
struct MswnReport {
    double value = 0.0;
    std::size_t n_used = 0;
    std::vector<std::string> skipped;
};

/// Parses a GloVe-format text stream: one `word c1 c2 ... cd` per line,
/// a fixed d across lines. Later duplicate words overwrite earlier ones.
/// Lines are parsed in parallel; error reporting picks the earliest
/// offending line.
EmbeddingTable load_embeddings(std::istream& source);

/// cos(a, b), clamped to [-1, 1] against rounding. Throws ZeroVectorError
/// if either norm is zero and std::invalid_argument on dimension mismatch.
double cosine(std::span<const double> a, std::span<const double> b);

/// cos(w, she) - cos(w, he); neutral words tend towards zero.
double word_neutrality(std::string_view word, const EmbeddingTable& table,
                       const GenderAnchors& anchors);

/// Mean of squared word neutralities over the in-vocabulary subset of
/// `words`. Out-of-vocabulary words are skipped and reported; throws
/// EmptyVocabularyError when nothing is left.
MswnReport mswn(const std::vector<std::string>& words, const EmbeddingTable& table,
                const GenderAnchors& anchors);

/// Which vocabulary entries occur in the corpus at least once, each
/// reported once (set semantics). Matching is lowercase and token-exact;
/// multi-word entries match contiguous token runs.
std::vector<std::string> vocabulary_occurrences(const std::vector<core::Sentence>& corpus,
                                                const std::vector<std::string>& vocab);

/// One vocabulary entry per line, '#'-prefixed comment lines ignored.
std::vector<std::string> load_vocabulary(std::istream& source);

namespace reference {

// Serial counterparts of the parallel kernels above, kept for tests and
// the benchmark target. Semantics are identical, including error line
// numbers and duplicate handling.

EmbeddingTable load_embeddings(std::istream& source);

MswnReport mswn(const std::vector<std::string>& words, const EmbeddingTable& table,
                const GenderAnchors& anchors);

std::vector<std::string> vocabulary_occurrences(const std::vector<core::Sentence>& corpus,
                                                const std::vector<std::string>& vocab);

}  // namespace reference

}  // namespace debias::embeddings

#include "debias/embeddings.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <unordered_set>
#include <utility>

namespace debias::embeddings {

DimensionMismatchError::DimensionMismatchError(std::size_t line_no)
    : std::runtime_error("embedding dimension mismatch at line " + std::to_string(line_no)),
      line_no_(line_no) {}

MalformedLineError::MalformedLineError(std::size_t line_no)
    : std::runtime_error("malformed embedding line " + std::to_string(line_no)),
      line_no_(line_no) {}

ZeroVectorError::ZeroVectorError() : std::runtime_error("cosine of a zero vector") {}

OutOfVocabularyError::OutOfVocabularyError(std::string word)
    : std::runtime_error("word not in embedding table: \"" + word + "\""), word_(std::move(word)) {}

EmptyVocabularyError::EmptyVocabularyError()
    : std::runtime_error("every word was out of vocabulary") {}

const std::vector<double>* EmbeddingTable::find(std::string_view word) const {
    auto it = vectors.find(core::to_lower(word));
    return it == vectors.end() ? nullptr : &it->second;
}

GenderAnchors GenderAnchors::from_table(const EmbeddingTable& table) {
    const std::vector<double>* she = table.find("she");
    if (she == nullptr) throw OutOfVocabularyError("she");
    const std::vector<double>* he = table.find("he");
    if (he == nullptr) throw OutOfVocabularyError("he");
    auto norm_sq = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return s;
    };
    if (norm_sq(*she) == 0.0 || norm_sq(*he) == 0.0) throw ZeroVectorError();
    return GenderAnchors{*she, *he};
}

namespace {

struct ParsedLine {
    std::string word;
    std::vector<double> components;
};

// Parses one `word c1 ... cd` line; throws MalformedLineError on anything
// non-numeric or non-finite. Dimension agreement is checked by callers.
ParsedLine parse_embedding_line(const std::string& line, std::size_t line_no) {
    ParsedLine out;
    const char* p = line.data();
    const char* end = p + line.size();
    auto skip_space = [&] {
        while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    };
    skip_space();
    const char* word_begin = p;
    while (p < end && *p != ' ' && *p != '\t' && *p != '\r') ++p;
    if (p == word_begin) throw MalformedLineError(line_no);
    out.word = core::to_lower(std::string_view(word_begin, static_cast<std::size_t>(p - word_begin)));
    skip_space();
    while (p < end) {
        double value = 0.0;
        auto [next, ec] = std::from_chars(p, end, value);
        if (ec != std::errc() || !std::isfinite(value)) throw MalformedLineError(line_no);
        out.components.push_back(value);
        p = next;
        if (p < end && *p != ' ' && *p != '\t' && *p != '\r') throw MalformedLineError(line_no);
        skip_space();
    }
    if (out.components.empty()) throw MalformedLineError(line_no);
    return out;
}

struct NumberedLine {
    std::string text;
    std::size_t line_no;
};

std::vector<NumberedLine> read_nonempty_lines(std::istream& source) {
    std::vector<NumberedLine> lines;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        if (core::trim(line).empty()) continue;
        lines.push_back(NumberedLine{line, line_no});
    }
    return lines;
}

double neutrality_of(const std::vector<double>& vec, const GenderAnchors& anchors) {
    return cosine(vec, anchors.she_vec) - cosine(vec, anchors.he_vec);
}

// Filters `words` down to the in-table subset, collecting each skipped
// word once in first-seen order. Shared by the parallel and serial mswn.
std::vector<const std::vector<double>*> select_used(const std::vector<std::string>& words,
                                                    const EmbeddingTable& table,
                                                    std::vector<std::string>& skipped) {
    std::vector<const std::vector<double>*> used;
    used.reserve(words.size());
    std::unordered_set<std::string> skipped_seen;
    for (const std::string& word : words) {
        if (const std::vector<double>* vec = table.find(word)) {
            used.push_back(vec);
        } else if (skipped_seen.insert(core::to_lower(word)).second) {
            skipped.push_back(word);
        }
    }
    return used;
}

std::vector<std::vector<std::string>> tokenize_vocab(const std::vector<std::string>& vocab,
                                                     std::vector<std::size_t>& kept_indices) {
    std::vector<std::vector<std::string>> entry_tokens;
    std::unordered_set<std::string> seen;
    for (std::size_t j = 0; j < vocab.size(); ++j) {
        auto tokens = core::alpha_tokens(vocab[j]);
        if (tokens.empty()) continue;
        std::string key;
        for (const auto& t : tokens) {
            key += t;
            key += '\x1f';
        }
        if (!seen.insert(key).second) continue;  // duplicate vocabulary entry
        kept_indices.push_back(j);
        entry_tokens.push_back(std::move(tokens));
    }
    return entry_tokens;
}

bool contains_run(const std::vector<std::string>& tokens, const std::vector<std::string>& run) {
    if (run.size() > tokens.size()) return false;
    for (std::size_t i = 0; i + run.size() <= tokens.size(); ++i) {
        bool match = true;
        for (std::size_t k = 0; k < run.size(); ++k) {
            if (tokens[i + k] != run[k]) {
                match = false;
                break;
            }
        }
        if (match) return true;
    }
    return false;
}

}  // namespace

EmbeddingTable load_embeddings(std::istream& source) {
    std::vector<NumberedLine> lines = read_nonempty_lines(source);
    EmbeddingTable table;
    if (lines.empty()) return table;

    std::vector<ParsedLine> parsed(lines.size());
    // Earliest failing line wins, matching the serial reference.
    std::size_t error_line = 0;
    bool error_is_dimension = false;

    ParsedLine first = parse_embedding_line(lines[0].text, lines[0].line_no);
    const std::size_t dim = first.components.size();
    parsed[0] = std::move(first);

#pragma omp parallel for schedule(static)
    for (std::size_t i = 1; i < lines.size(); ++i) {
        try {
            ParsedLine entry = parse_embedding_line(lines[i].text, lines[i].line_no);
            bool dimension_ok = entry.components.size() == dim;
            parsed[i] = std::move(entry);
            if (!dimension_ok) {
#pragma omp critical(load_embeddings_error)
                {
                    if (error_line == 0 || lines[i].line_no < error_line) {
                        error_line = lines[i].line_no;
                        error_is_dimension = true;
                    }
                }
            }
        } catch (const MalformedLineError&) {
#pragma omp critical(load_embeddings_error)
            {
                if (error_line == 0 || lines[i].line_no < error_line) {
                    error_line = lines[i].line_no;
                    error_is_dimension = false;
                }
            }
        }
    }
    if (error_line != 0) {
        if (error_is_dimension) throw DimensionMismatchError(error_line);
        throw MalformedLineError(error_line);
    }

    table.dim = dim;
    table.vectors.reserve(parsed.size());
    for (ParsedLine& entry : parsed) {
        table.vectors[std::move(entry.word)] = std::move(entry.components);
    }
    return table;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
    double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    if (norm_a == 0.0 || norm_b == 0.0) throw ZeroVectorError();
    double value = dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
    return std::clamp(value, -1.0, 1.0);
}

double word_neutrality(std::string_view word, const EmbeddingTable& table,
                       const GenderAnchors& anchors) {
    const std::vector<double>* vec = table.find(word);
    if (vec == nullptr) throw OutOfVocabularyError(std::string(word));
    return neutrality_of(*vec, anchors);
}

MswnReport mswn(const std::vector<std::string>& words, const EmbeddingTable& table,
                const GenderAnchors& anchors) {
    MswnReport report;
    std::vector<const std::vector<double>*> used = select_used(words, table, report.skipped);
    if (used.empty()) throw EmptyVocabularyError();

    std::vector<double> squared(used.size());
    bool zero_vector = false;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < used.size(); ++i) {
        try {
            double n = neutrality_of(*used[i], anchors);
            squared[i] = n * n;
        } catch (const ZeroVectorError&) {
#pragma omp atomic write
            zero_vector = true;
        }
    }
    if (zero_vector) throw ZeroVectorError();
    // Summed serially in index order so the result is independent of the
    // thread count and bit-identical to the serial reference.
    double sum = 0.0;
    for (double s : squared) sum += s;

    report.value = sum / static_cast<double>(used.size());
    report.n_used = used.size();
    return report;
}

std::vector<std::string> vocabulary_occurrences(const std::vector<core::Sentence>& corpus,
                                                const std::vector<std::string>& vocab) {
    std::vector<std::size_t> kept;
    std::vector<std::vector<std::string>> entry_tokens = tokenize_vocab(vocab, kept);
    std::vector<char> found(entry_tokens.size(), 0);

#pragma omp parallel
    {
        std::vector<char> local(entry_tokens.size(), 0);
#pragma omp for schedule(dynamic, 64) nowait
        for (std::size_t s = 0; s < corpus.size(); ++s) {
            std::vector<std::string> tokens = core::alpha_tokens(corpus[s].text());
            for (std::size_t j = 0; j < entry_tokens.size(); ++j) {
                if (!local[j] && contains_run(tokens, entry_tokens[j])) local[j] = 1;
            }
        }
#pragma omp critical(vocab_occurrences_merge)
        for (std::size_t j = 0; j < found.size(); ++j) {
            if (local[j]) found[j] = 1;
        }
    }

    std::vector<std::string> result;
    for (std::size_t j = 0; j < found.size(); ++j) {
        if (found[j]) result.push_back(vocab[kept[j]]);
    }
    return result;
}

std::vector<std::string> load_vocabulary(std::istream& source) {
    std::vector<std::string> entries;
    std::string line;
    while (std::getline(source, line)) {
        std::string entry = core::trim(line);
        if (entry.empty() || entry.front() == '#') continue;
        entries.push_back(std::move(entry));
    }
    return entries;
}

namespace reference {

EmbeddingTable load_embeddings(std::istream& source) {
    std::vector<NumberedLine> lines = read_nonempty_lines(source);
    EmbeddingTable table;
    if (lines.empty()) return table;
    std::size_t dim = 0;
    for (const NumberedLine& line : lines) {
        ParsedLine entry = parse_embedding_line(line.text, line.line_no);
        if (dim == 0) {
            dim = entry.components.size();
        } else if (entry.components.size() != dim) {
            throw DimensionMismatchError(line.line_no);
        }
        table.vectors[std::move(entry.word)] = std::move(entry.components);
    }
    table.dim = dim;
    return table;
}

MswnReport mswn(const std::vector<std::string>& words, const EmbeddingTable& table,
                const GenderAnchors& anchors) {
    MswnReport report;
    std::vector<const std::vector<double>*> used = select_used(words, table, report.skipped);
    if (used.empty()) throw EmptyVocabularyError();
    double sum = 0.0;
    for (const std::vector<double>* vec : used) {
        double n = neutrality_of(*vec, anchors);
        sum += n * n;
    }
    report.value = sum / static_cast<double>(used.size());
    report.n_used = used.size();
    return report;
}

std::vector<std::string> vocabulary_occurrences(const std::vector<core::Sentence>& corpus,
                                                const std::vector<std::string>& vocab) {
    std::vector<std::size_t> kept;
    std::vector<std::vector<std::string>> entry_tokens = tokenize_vocab(vocab, kept);
    std::vector<char> found(entry_tokens.size(), 0);
    for (const core::Sentence& sentence : corpus) {
        std::vector<std::string> tokens = core::alpha_tokens(sentence.text());
        for (std::size_t j = 0; j < entry_tokens.size(); ++j) {
            if (!found[j] && contains_run(tokens, entry_tokens[j])) found[j] = 1;
        }
    }
    std::vector<std::string> result;
    for (std::size_t j = 0; j < found.size(); ++j) {
        if (found[j]) result.push_back(vocab[kept[j]]);
    }
    return result;
}

}  // namespace reference

}  // namespace debias::embeddings

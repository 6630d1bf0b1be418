// Parallel kernels against their serial reference twins on synthetic
// data. Build with -DCMAKE_BUILD_TYPE=Release for meaningful numbers.

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "debias/core.hpp"
#include "debias/embeddings.hpp"

namespace {

namespace emb = debias::embeddings;

std::string synthetic_embeddings_text(std::size_t words, std::size_t dim) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> component(-1.0, 1.0);
    std::ostringstream out;
    out.precision(6);
    out << "she";
    for (std::size_t d = 0; d < dim; ++d) out << ' ' << component(rng);
    out << "\nhe";
    for (std::size_t d = 0; d < dim; ++d) out << ' ' << component(rng);
    out << '\n';
    for (std::size_t w = 0; w < words; ++w) {
        out << 'w' << w;
        for (std::size_t d = 0; d < dim; ++d) out << ' ' << component(rng);
        out << '\n';
    }
    return out.str();
}

const std::string& embeddings_text() {
    static const std::string text = synthetic_embeddings_text(20000, 50);
    return text;
}

const emb::EmbeddingTable& embeddings_table() {
    static const emb::EmbeddingTable table = [] {
        std::istringstream in(embeddings_text());
        return emb::load_embeddings(in);
    }();
    return table;
}

const std::vector<std::string>& full_vocabulary() {
    static const std::vector<std::string> words = [] {
        std::vector<std::string> out;
        for (std::size_t w = 0; w < 20000; ++w) out.push_back("w" + std::to_string(w));
        return out;
    }();
    return words;
}

const std::vector<debias::core::Sentence>& synthetic_corpus() {
    static const std::vector<debias::core::Sentence> corpus = [] {
        std::mt19937_64 rng(11);
        std::uniform_int_distribution<std::size_t> word_pick(0, 19999);
        std::vector<debias::core::Sentence> out;
        for (std::size_t s = 0; s < 5000; ++s) {
            std::string text;
            for (int t = 0; t < 12; ++t) {
                if (t > 0) text += ' ';
                text += "w" + std::to_string(word_pick(rng));
            }
            out.emplace_back(std::move(text));
        }
        return out;
    }();
    return corpus;
}

const std::vector<std::string>& scan_vocabulary() {
    static const std::vector<std::string> words = [] {
        std::vector<std::string> out;
        for (std::size_t w = 0; w < 200; ++w) out.push_back("w" + std::to_string(w * 97));
        return out;
    }();
    return words;
}

void bm_load_embeddings_parallel(benchmark::State& state) {
    for (auto _ : state) {
        std::istringstream in(embeddings_text());
        benchmark::DoNotOptimize(emb::load_embeddings(in));
    }
}

void bm_load_embeddings_serial(benchmark::State& state) {
    for (auto _ : state) {
        std::istringstream in(embeddings_text());
        benchmark::DoNotOptimize(emb::reference::load_embeddings(in));
    }
}

void bm_mswn_parallel(benchmark::State& state) {
    const emb::EmbeddingTable& table = embeddings_table();
    emb::GenderAnchors anchors = emb::GenderAnchors::from_table(table);
    for (auto _ : state)
        benchmark::DoNotOptimize(emb::mswn(full_vocabulary(), table, anchors));
}

void bm_mswn_serial(benchmark::State& state) {
    const emb::EmbeddingTable& table = embeddings_table();
    emb::GenderAnchors anchors = emb::GenderAnchors::from_table(table);
    for (auto _ : state)
        benchmark::DoNotOptimize(emb::reference::mswn(full_vocabulary(), table, anchors));
}

void bm_occurrences_parallel(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(
            emb::vocabulary_occurrences(synthetic_corpus(), scan_vocabulary()));
}

void bm_occurrences_serial(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(
            emb::reference::vocabulary_occurrences(synthetic_corpus(), scan_vocabulary()));
}

BENCHMARK(bm_load_embeddings_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_load_embeddings_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_mswn_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_mswn_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_occurrences_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_occurrences_serial)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

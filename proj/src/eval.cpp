#include "debias/eval.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace debias::eval {

using core::BiasType;
using core::SentencePair;
using nlohmann::json;

double round6(double value) { return std::round(value * 1e6) / 1e6; }

namespace {

double f1_of(long tp, long fp, long fn) {
    double precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    double recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

BiasType require_gold(const SentencePair& item) {
    if (!item.label) throw std::invalid_argument("test item is missing its gold label");
    return *item.label;
}

BiasType require_biased_gold(const SentencePair& item) {
    BiasType gold = require_gold(item);
    if (gold == BiasType::Unbiased)
        throw std::invalid_argument("test item must carry one of the three bias types");
    return gold;
}

// Lowercased term set with the "∅" marker dropped.
std::set<std::string> term_set(const core::TermList& terms) {
    std::set<std::string> out;
    for (const std::string& term : terms) {
        if (term == core::kEmptyMarker) continue;
        out.insert(core::to_lower(core::whitespace_normalize(term)));
    }
    return out;
}

BiasType judge_classify(const core::Sentence& text, const pipeline::LogicalModel& judge,
                        const pipeline::PipelineConfig& config) {
    dataset::PromptSubtask subtask = dataset::PromptSubtask::classify();
    dataset::FewShotPrompt prompt = dataset::build_prompt(
        subtask, config.prompts->examples_for(subtask), dataset::PromptQuery{text, std::nullopt});
    std::string completion = judge.backend->complete(judge.model_id, prompt.render(), config.sampling);
    return core::parse_bias_type(completion);
}

int batch_threads(const pipeline::PipelineConfig& config, std::size_t n) {
    return std::clamp(config.concurrency, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
}

json mswn_report_json(const embeddings::MswnReport& report) {
    json out;
    out["value"] = round6(report.value);
    out["n_used"] = report.n_used;
    out["skipped"] = report.skipped;
    return out;
}

json f1_scores_json(const F1Scores& scores, std::span<const BiasType> classes) {
    json per_type = json::object();
    for (BiasType type : classes) {
        auto it = scores.per_type.find(type);
        per_type[std::string(core::canonical_label(type))] =
            round6(it == scores.per_type.end() ? 0.0 : it->second);
    }
    json out;
    out["per_type"] = std::move(per_type);
    out["micro"] = round6(scores.micro);
    return out;
}

}  // namespace

F1Scores f1_scores(const ConfusionCounts& counts, std::span<const BiasType> micro_over) {
    F1Scores scores;
    for (BiasType type : core::kAllBiasTypes) {
        const ClassCounts& c = counts.at(type);
        scores.per_type[type] = f1_of(c.tp, c.fp, c.fn);
    }
    long tp = 0, fp = 0, fn = 0;
    for (BiasType type : micro_over) {
        const ClassCounts& c = counts.at(type);
        tp += c.tp;
        fp += c.fp;
        fn += c.fn;
    }
    scores.micro = f1_of(tp, fp, fn);
    return scores;
}

ClassificationEval eval_classification(const std::vector<SentencePair>& test,
                                       const pipeline::PipelineConfig& config) {
    if (!config.models.classifier) throw std::invalid_argument("classifier model is not bound");
    if (!config.prompts) throw std::invalid_argument("prompt library is not bound");
    for (const SentencePair& item : test) require_gold(item);

    std::vector<std::optional<BiasType>> predicted(test.size());
#pragma omp parallel for schedule(dynamic) num_threads(batch_threads(config, test.size()))
    for (std::size_t i = 0; i < test.size(); ++i) {
        try {
            predicted[i] = judge_classify(test[i].biased, *config.models.classifier, config);
        } catch (const std::exception&) {
            predicted[i] = std::nullopt;
        }
    }

    ClassificationEval result;
    for (std::size_t i = 0; i < test.size(); ++i) {
        BiasType gold = *test[i].label;
        if (!predicted[i]) {
            ++result.backend_errors;
            ++result.counts.at(gold).fn;
            continue;
        }
        if (*predicted[i] == gold) {
            ++result.counts.at(gold).tp;
        } else {
            ++result.counts.at(gold).fn;
            ++result.counts.at(*predicted[i]).fp;
        }
    }
    result.scores = f1_scores(result.counts, core::kAllBiasTypes);
    return result;
}

ExtractionEval eval_extraction(const std::vector<SentencePair>& test,
                               const pipeline::PipelineConfig& config) {
    if (!config.prompts) throw std::invalid_argument("prompt library is not bound");
    for (const SentencePair& item : test) {
        BiasType gold = require_biased_gold(item);
        if (config.models.extractors.count(gold) == 0)
            throw std::invalid_argument("extractor model is not bound for " +
                                        std::string(core::canonical_label(gold)));
    }

    std::vector<std::optional<core::TermList>> predicted(test.size());
#pragma omp parallel for schedule(dynamic) num_threads(batch_threads(config, test.size()))
    for (std::size_t i = 0; i < test.size(); ++i) {
        try {
            dataset::PromptSubtask subtask = dataset::PromptSubtask::extract(*test[i].label);
            dataset::FewShotPrompt prompt =
                dataset::build_prompt(subtask, config.prompts->examples_for(subtask),
                                      dataset::PromptQuery{test[i].biased, std::nullopt});
            const pipeline::LogicalModel& model = config.models.extractors.at(*test[i].label);
            predicted[i] =
                backend::parse_terms(model.backend->complete(model.model_id, prompt.render(),
                                                             config.sampling));
        } catch (const std::exception&) {
            predicted[i] = std::nullopt;
        }
    }

    ExtractionEval result;
    for (std::size_t i = 0; i < test.size(); ++i) {
        BiasType gold = *test[i].label;
        std::set<std::string> gold_terms = term_set(test[i].bias_terms);
        if (!predicted[i]) {
            ++result.backend_errors;
            result.counts.at(gold).fn += static_cast<long>(gold_terms.size());
            continue;
        }
        std::set<std::string> predicted_terms = term_set(*predicted[i]);
        for (const std::string& term : predicted_terms) {
            if (gold_terms.count(term))
                ++result.counts.at(gold).tp;
            else
                ++result.counts.at(gold).fp;
        }
        for (const std::string& term : gold_terms) {
            if (!predicted_terms.count(term)) ++result.counts.at(gold).fn;
        }
    }
    result.scores = f1_scores(result.counts, core::kBiasedTypes);
    return result;
}

DebiasEval eval_debias(const std::vector<SentencePair>& test,
                       const pipeline::PipelineConfig& config,
                       const std::optional<pipeline::LogicalModel>& judge) {
    config.validate();
    for (const SentencePair& item : test) require_biased_gold(item);

    std::optional<pipeline::LogicalModel> judge_model = judge;
    if (!judge_model && config.models.classifier) judge_model = config.models.classifier;

    std::vector<core::Sentence> inputs;
    inputs.reserve(test.size());
    for (const SentencePair& item : test) inputs.push_back(item.biased);
    std::vector<pipeline::DebiasResult> runs = pipeline::debias_batch(inputs, config);

    // The judge only runs where the exact-match shortcut failed.
    std::vector<int> removed(test.size(), 0);  // 1 = bias removed, 0 = not, -1 = judge error
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (!runs[i].ok() || !runs[i].trace) {
            removed[i] = 0;
            continue;
        }
        removed[i] = core::whitespace_normalize(runs[i].trace->final_text.text()) ==
                             core::whitespace_normalize(test[i].unbiased.text())
                         ? 1
                         : 0;
    }
#pragma omp parallel for schedule(dynamic) num_threads(batch_threads(config, test.size()))
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (removed[i] == 1 || !runs[i].ok() || !runs[i].trace || !judge_model) continue;
        try {
            if (judge_classify(runs[i].trace->final_text, *judge_model, config) ==
                BiasType::Unbiased)
                removed[i] = 1;
        } catch (const std::exception&) {
            removed[i] = -1;
        }
    }

    DebiasEval result;
    result.n_items = static_cast<long>(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        BiasType gold = *test[i].label;
        if (!runs[i].ok() || removed[i] == -1) {
            ++result.item_errors;
            ++result.counts.at(gold).fn;
            continue;
        }
        bool success = removed[i] == 1;
        if (config.architecture == pipeline::Architecture::M1) {
            if (success)
                ++result.counts.at(gold).tp;
            else
                ++result.counts.at(gold).fn;
            continue;
        }
        std::optional<BiasType> first = runs[i].trace->iterations.front().predicted_type;
        if (success && first && *first == gold) {
            ++result.counts.at(gold).tp;
        } else {
            ++result.counts.at(gold).fn;
            if (first && *first != gold) ++result.counts.at(*first).fp;
        }
    }
    result.scores = f1_scores(result.counts, core::kBiasedTypes);
    return result;
}

MswnComparison mswn_comparison(
    const std::vector<core::Sentence>& before, const std::vector<core::Sentence>& after,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& vocabularies,
    const embeddings::EmbeddingTable& table) {
    if (before.size() != after.size())
        throw std::invalid_argument("before/after corpora must be aligned (same length)");

    embeddings::GenderAnchors anchors = embeddings::GenderAnchors::from_table(table);
    MswnComparison comparison;
    auto cell = [&](const std::vector<core::Sentence>& corpus,
                    const std::vector<std::string>& vocab) -> std::optional<embeddings::MswnReport> {
        try {
            std::vector<std::string> found = embeddings::vocabulary_occurrences(corpus, vocab);
            return embeddings::mswn(found, table, anchors);
        } catch (const embeddings::EmptyVocabularyError&) {
            ++comparison.warnings;
            return std::nullopt;
        }
    };
    for (const auto& [name, vocab] : vocabularies) {
        comparison.vocab_names.push_back(name);
        comparison.before.push_back(cell(before, vocab));
        comparison.after.push_back(cell(after, vocab));
    }
    return comparison;
}

std::string MswnComparison::to_json() const {
    json cells_before = json::array();
    json cells_after = json::array();
    for (std::size_t i = 0; i < vocab_names.size(); ++i) {
        cells_before.push_back(before[i] ? mswn_report_json(*before[i]) : json(nullptr));
        cells_after.push_back(after[i] ? mswn_report_json(*after[i]) : json(nullptr));
    }
    json doc;
    doc["vocabularies"] = vocab_names;
    doc["before"] = std::move(cells_before);
    doc["after"] = std::move(cells_after);
    doc["warnings"] = warnings;
    return doc.dump();
}

std::string MswnComparison::to_text_table() const {
    std::ostringstream out;
    std::size_t label_width = std::string("Dataset").size();
    for (const std::string& label : {std::string("before"), std::string("after")})
        label_width = std::max(label_width, label.size());

    out << "Dataset";
    for (std::size_t pad = label_width - 7; pad > 0; --pad) out << ' ';
    for (const std::string& name : vocab_names) out << "  " << name;
    out << '\n';

    auto row = [&](const std::string& label,
                   const std::vector<std::optional<embeddings::MswnReport>>& cells) {
        out << label;
        for (std::size_t pad = label_width - label.size(); pad > 0; --pad) out << ' ';
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out << "  ";
            std::string text = cells[i]
                                   ? [&] {
                                         std::ostringstream v;
                                         v.setf(std::ios::fixed);
                                         v.precision(6);
                                         v << cells[i]->value;
                                         return v.str();
                                     }()
                                   : std::string("n/a");
            std::size_t width = std::max<std::size_t>(vocab_names[i].size(), text.size());
            for (std::size_t pad = width - text.size(); pad > 0; --pad) out << ' ';
            out << text;
        }
        out << '\n';
    };
    row("before", before);
    row("after", after);
    return out.str();
}

std::string reports_to_json(const std::vector<EvaluationReport>& reports) {
    json doc = json::array();
    for (const EvaluationReport& report : reports) {
        json item;
        item["architecture"] = std::string(pipeline::architecture_name(report.architecture));
        item["n_items"] = report.n_items;
        json debias_json = f1_scores_json(report.debias.scores, core::kBiasedTypes);
        debias_json["errors"] = report.debias.item_errors;
        item["debias"] = std::move(debias_json);
        if (report.classification) {
            json c = f1_scores_json(report.classification->scores, core::kAllBiasTypes);
            c["errors"] = report.classification->backend_errors;
            item["classification"] = std::move(c);
        } else {
            item["classification"] = nullptr;
        }
        if (report.extraction) {
            json e = f1_scores_json(report.extraction->scores, core::kBiasedTypes);
            e["errors"] = report.extraction->backend_errors;
            item["extraction"] = std::move(e);
        } else {
            item["extraction"] = nullptr;
        }
        item["mswn_before"] =
            report.mswn_before ? mswn_report_json(*report.mswn_before) : json(nullptr);
        item["mswn_after"] = report.mswn_after ? mswn_report_json(*report.mswn_after) : json(nullptr);
        doc.push_back(std::move(item));
    }
    return doc.dump(2);
}

std::string reports_to_text_table(const std::vector<EvaluationReport>& reports) {
    // Rows follow the comparison-table layout: one bias type per row plus
    // the micro average; one column per architecture.
    constexpr BiasType kRowOrder[] = {BiasType::Benevolent, BiasType::Explicit,
                                      BiasType::Generalization};
    std::size_t label_width = std::string("Micro average").size();
    for (BiasType type : kRowOrder)
        label_width = std::max(label_width, std::string(core::display_label(type)).size());

    std::ostringstream out;
    out << "Gender Bias Type";
    for (std::size_t pad = label_width - 16; pad > 0; --pad) out << ' ';
    for (const EvaluationReport& report : reports)
        out << "    " << pipeline::architecture_display(report.architecture);
    out << '\n';

    auto row = [&](const std::string& label, auto value_of) {
        out << label;
        for (std::size_t pad = label_width - label.size(); pad > 0; --pad) out << ' ';
        for (const EvaluationReport& report : reports) {
            std::ostringstream v;
            v.setf(std::ios::fixed);
            v.precision(3);
            v << value_of(report);
            out << "  " << v.str();
        }
        out << '\n';
    };
    for (BiasType type : kRowOrder) {
        row(std::string(core::display_label(type)), [type](const EvaluationReport& report) {
            auto it = report.debias.scores.per_type.find(type);
            return it == report.debias.scores.per_type.end() ? 0.0 : it->second;
        });
    }
    row("Micro average",
        [](const EvaluationReport& report) { return report.debias.scores.micro; });
    return out.str();
}

}  // namespace debias::eval

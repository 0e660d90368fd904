#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "litmeta/common.hpp"
#include "litmeta/corpus.hpp"
#include "litmeta/llm.hpp"

namespace litmeta::screening {

enum class Relevance { Relevant, NotRelevant, Unparseable };

inline std::string to_string(Relevance r) {
    switch (r) {
        case Relevance::Relevant: return "Relevant";
        case Relevance::NotRelevant: return "NotRelevant";
        case Relevance::Unparseable: return "Unparseable";
    }
    return "Unparseable";
}

inline Relevance relevance_from_string(const std::string& s) {
    if (s == "Relevant") return Relevance::Relevant;
    if (s == "NotRelevant") return Relevance::NotRelevant;
    return Relevance::Unparseable;
}

struct RelevanceVerdict {
    std::string record_id;
    Relevance verdict = Relevance::Unparseable;
    std::string raw_response;

    nlohmann::json to_json() const {
        return {{"record_id", record_id},
                {"verdict", to_string(verdict)},
                {"raw_response", raw_response}};
    }

    static RelevanceVerdict from_json(const nlohmann::json& j) {
        return {j.at("record_id").get<std::string>(),
                relevance_from_string(j.at("verdict").get<std::string>()),
                j.value("raw_response", "")};
    }
};

inline const std::vector<std::string>& coupled_model_keywords() {
    static const std::vector<std::string> keywords = {"wrf-chem", "wrf-cmaq", "wrf-hydro"};
    return keywords;
}

struct PrefilterResult {
    std::vector<corpus::BibRecord> kept;
    std::vector<std::pair<corpus::BibRecord, std::string>> dropped;  // record, keyword
};

// Drop records whose title or abstract mentions a coupled model
// (WRF-Chem / WRF-CMAQ / WRF-Hydro), case-insensitively.
inline PrefilterResult coupled_model_prefilter(const std::vector<corpus::BibRecord>& records) {
    PrefilterResult result;
    for (const auto& rec : records) {
        std::string text = to_lower(rec.title + " " + rec.abstract);
        const std::string* hit = nullptr;
        for (const auto& keyword : coupled_model_keywords()) {
            if (text.find(keyword) != std::string::npos) {
                hit = &keyword;
                break;
            }
        }
        if (hit) result.dropped.emplace_back(rec, *hit);
        else result.kept.push_back(rec);
    }
    return result;
}

// Yes/no gate on the model's reply. Lenient mode also accepts replies whose
// first word is yes/no ("Yes, the study..."); strict mode requires the
// whole reply to be the bare token.
inline Relevance parse_yes_no(const std::string& response, bool strict = false) {
    std::string stripped;
    for (char c : response) {
        if (is_word_char(c) || is_ascii_space(c)) stripped.push_back(c);
    }
    stripped = to_lower(collapse_whitespace(stripped));
    if (stripped == "yes") return Relevance::Relevant;
    if (stripped == "no") return Relevance::NotRelevant;
    if (strict) return Relevance::Unparseable;

    size_t space = stripped.find(' ');
    std::string first = space == std::string::npos ? stripped : stripped.substr(0, space);
    if (first == "yes") return Relevance::Relevant;
    if (first == "no") return Relevance::NotRelevant;
    return Relevance::Unparseable;
}

struct ScreenOptions {
    bool strict_parse = false;
    int workers = 1;  // per-record calls may run in parallel up to the gateway bound
};

struct ScreenResult {
    std::vector<RelevanceVerdict> verdicts;                    // sorted by record_id
    std::vector<std::pair<std::string, std::string>> errors;   // record_id, message
};

// Ask the relevance question for each record's abstract. Unparseable
// replies are retried once (bypassing the cache so a live backend can
// re-sample); gateway errors are recorded per record and processing
// continues. Output order is independent of completion order.
inline ScreenResult screen(const std::vector<corpus::BibRecord>& records, llm::Gateway& gateway,
                           const ScreenOptions& options = {}) {
    std::vector<std::optional<RelevanceVerdict>> verdict_slots(records.size());
    std::vector<std::optional<std::pair<std::string, std::string>>> error_slots(records.size());

    parallel_for(records.size(), options.workers, [&](size_t i) {
        const auto& rec = records[i];
        try {
            std::string response =
                gateway.complete(rec.record_id, llm::PromptId::Relevance, "relevance",
                                 fnv1a64(rec.abstract), rec.abstract, llm::relevance_prompt());
            Relevance verdict = parse_yes_no(response, options.strict_parse);
            if (verdict == Relevance::Unparseable) {
                response = gateway.complete(rec.record_id, llm::PromptId::Relevance, "relevance",
                                            fnv1a64(rec.abstract), rec.abstract,
                                            llm::relevance_prompt(), /*bypass_cache=*/true);
                verdict = parse_yes_no(response, options.strict_parse);
            }
            verdict_slots[i] = RelevanceVerdict{rec.record_id, verdict, response};
        } catch (const Error& e) {
            error_slots[i] = std::make_pair(rec.record_id, std::string(e.what()));
        }
    });

    ScreenResult result;
    for (size_t i = 0; i < records.size(); ++i) {
        if (verdict_slots[i]) result.verdicts.push_back(std::move(*verdict_slots[i]));
        if (error_slots[i]) result.errors.push_back(std::move(*error_slots[i]));
    }
    std::sort(result.verdicts.begin(), result.verdicts.end(),
              [](const RelevanceVerdict& a, const RelevanceVerdict& b) {
                  return a.record_id < b.record_id;
              });
    std::sort(result.errors.begin(), result.errors.end());
    return result;
}

struct AccuracyReport {
    long matches = 0;
    long total = 0;
    double accuracy = 0;  // matches/total rounded to 3 decimals
    long gold_relevant = 0;
    long predicted_relevant = 0;
    double gold_relevant_rate = 0;
    double predicted_relevant_rate = 0;

    nlohmann::json to_json() const {
        return {{"matches", matches},
                {"total", total},
                {"accuracy", accuracy},
                {"gold_relevant", gold_relevant},
                {"predicted_relevant", predicted_relevant},
                {"gold_relevant_rate", gold_relevant_rate},
                {"predicted_relevant_rate", predicted_relevant_rate}};
    }
};

inline double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

// Score predictions against manual labels. Unparseable predictions never
// match. Also reports the relevance rates of both sides over the gold set.
inline AccuracyReport screening_accuracy(const std::vector<RelevanceVerdict>& predicted,
                                         const std::map<std::string, bool>& gold) {
    if (gold.empty()) throw Error("EmptyGoldSet", "no gold labels provided");
    std::map<std::string, Relevance> by_id;
    for (const auto& v : predicted) by_id[v.record_id] = v.verdict;

    AccuracyReport report;
    for (const auto& [record_id, relevant] : gold) {
        auto it = by_id.find(record_id);
        if (it == by_id.end()) {
            throw Error("MissingRecord", "gold label for unknown record " + record_id);
        }
        ++report.total;
        if (relevant) ++report.gold_relevant;
        if (it->second == Relevance::Relevant) ++report.predicted_relevant;
        bool match = (relevant && it->second == Relevance::Relevant) ||
                     (!relevant && it->second == Relevance::NotRelevant);
        if (match) ++report.matches;
    }
    report.accuracy = round3(static_cast<double>(report.matches) / report.total);
    report.gold_relevant_rate = round3(static_cast<double>(report.gold_relevant) / report.total);
    report.predicted_relevant_rate =
        round3(static_cast<double>(report.predicted_relevant) / report.total);
    return report;
}

// Gold labels CSV: record_id, relevant in {yes, no}.
inline std::map<std::string, bool> gold_labels_from_csv(std::string_view text) {
    auto rows = csv::parse(text);
    std::map<std::string, bool> gold;
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() < 2) continue;
        std::string id = trim(rows[i][0]);
        std::string label = to_lower(trim(rows[i][1]));
        if (i == 0 && (to_lower(id) == "record_id" || label == "relevant")) continue;
        if (id.empty()) continue;
        gold[id] = label == "yes" || label == "true" || label == "1";
    }
    return gold;
}

inline std::string verdicts_to_jsonl(const std::vector<RelevanceVerdict>& verdicts) {
    std::string out;
    for (const auto& v : verdicts) {
        out += v.to_json().dump();
        out.push_back('\n');
    }
    return out;
}

inline std::vector<RelevanceVerdict> verdicts_from_jsonl(std::string_view text) {
    std::vector<RelevanceVerdict> out;
    for (const auto& line : split(text, '\n')) {
        std::string t = trim(line);
        if (t.empty()) continue;
        out.push_back(RelevanceVerdict::from_json(nlohmann::json::parse(t)));
    }
    return out;
}

}  // namespace litmeta::screening

#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <string>
#include <vector>

#include "litmeta/common.hpp"
#include "litmeta/csv.hpp"
#include "litmeta/extraction.hpp"

namespace litmeta::validation {

// The twelve report rows: question 1 splits into the five parameterization
// slots, then questions 2-8.
struct QuestionDef {
    const char* id;
    const char* name;
};

inline const std::vector<QuestionDef>& question_defs() {
    static const std::vector<QuestionDef> defs = {
        {"q1_microphysics", "Microphysics parameterization"},
        {"q1_radiation", "Radiative parameterization"},
        {"q1_cumulus", "Cumulus parameterization"},
        {"q1_pbl", "Planetary boundary layer parameterization"},
        {"q1_surface", "Surface layer parameterization"},
        {"q2", "Location of simulated domain"},
        {"q3", "Variable associated with precipitation"},
        {"q4", "Performance"},
        {"q5", "Overestimated region"},
        {"q6", "Underestimated region"},
        {"q7", "RMSE"},
        {"q8", "CC"},
    };
    return defs;
}

// Hand-authored gold values for one record, mirroring ExtractionRecord
// fields. Only the questions whose fields appear in the gold file are
// judged for that record.
struct GoldAnnotation {
    std::string record_id;
    extraction::ExtractionRecord values;
    std::set<std::string> judged;
};

inline GoldAnnotation gold_from_json(const nlohmann::json& j) {
    GoldAnnotation gold;
    gold.values = extraction::extraction_from_json(j);
    gold.record_id = gold.values.record_id;
    if (j.contains("configs")) {
        for (const char* q : {"q1_microphysics", "q1_radiation", "q1_cumulus", "q1_pbl",
                              "q1_surface"}) {
            gold.judged.insert(q);
        }
    }
    if (j.contains("domain_name")) gold.judged.insert("q2");
    if (j.contains("variable")) gold.judged.insert("q3");
    if (j.contains("verdicts")) gold.judged.insert("q4");
    if (j.contains("over_regions")) gold.judged.insert("q5");
    if (j.contains("under_regions")) gold.judged.insert("q6");
    if (j.contains("metrics")) {
        gold.judged.insert("q7");
        gold.judged.insert("q8");
    }
    return gold;
}

inline std::vector<GoldAnnotation> gold_from_jsonl(std::string_view text) {
    std::vector<GoldAnnotation> out;
    for (const auto& line : split(text, '\n')) {
        std::string t = trim(line);
        if (t.empty()) continue;
        out.push_back(gold_from_json(nlohmann::json::parse(t)));
    }
    return out;
}

// A question's answer reduced to comparable elements: either a string set
// or a numeric multiset (metric lists, compared within 1e-9).
struct AnswerRepr {
    std::vector<std::string> items;    // sorted
    std::vector<double> numbers;       // sorted
    bool numeric = false;

    bool empty() const { return numeric ? numbers.empty() : items.empty(); }
};

inline constexpr double kMetricTolerance = 1e-9;

namespace detail {

inline std::string norm(const std::string& s) { return to_lower(collapse_whitespace(s)); }

inline AnswerRepr string_set(std::vector<std::string> items) {
    AnswerRepr r;
    for (auto& s : items) {
        std::string n = norm(s);
        if (!n.empty()) r.items.push_back(std::move(n));
    }
    std::sort(r.items.begin(), r.items.end());
    r.items.erase(std::unique(r.items.begin(), r.items.end()), r.items.end());
    return r;
}

inline AnswerRepr number_multiset(std::vector<double> values) {
    AnswerRepr r;
    r.numeric = true;
    r.numbers = std::move(values);
    std::sort(r.numbers.begin(), r.numbers.end());
    return r;
}

inline bool numbers_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i] - b[i]) > kMetricTolerance) return false;
    }
    return true;
}

// Multiset inclusion with tolerance: every element of `a` consumes one
// unused element of `b`.
inline bool numbers_subset(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<bool> used(b.size(), false);
    for (double x : a) {
        bool found = false;
        for (size_t i = 0; i < b.size(); ++i) {
            if (!used[i] && std::abs(b[i] - x) <= kMetricTolerance) {
                used[i] = true;
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

}  // namespace detail

inline AnswerRepr answer_repr(const extraction::ExtractionRecord& rec, const std::string& question) {
    using extraction::MetricKind;
    if (question == "q1_microphysics" || question == "q1_radiation" || question == "q1_cumulus" ||
        question == "q1_pbl" || question == "q1_surface") {
        std::vector<std::string> items;
        for (const auto& c : rec.configs) {
            if (question == "q1_microphysics") {
                if (c.microphysics.value != extraction::Scheme::None) {
                    items.push_back(to_string(c.microphysics));
                }
            } else {
                const extraction::SlotValue& v = question == "q1_radiation" ? c.radiation
                                               : question == "q1_cumulus"   ? c.cumulus
                                               : question == "q1_pbl"       ? c.pbl
                                                                            : c.land_surface;
                if (!v.is_none()) items.push_back(v.display());
            }
        }
        return detail::string_set(std::move(items));
    }
    if (question == "q2") {
        std::vector<std::string> items;
        if (!rec.domain_name.empty()) items.push_back(rec.domain_name);
        return detail::string_set(std::move(items));
    }
    if (question == "q3") {
        std::string item = to_string(rec.variable.kind);
        if (rec.variable.accumulation_hours) {
            item += "@" + format_trimmed(*rec.variable.accumulation_hours, 3) + "h";
        }
        std::vector<std::string> items;
        if (rec.variable.kind != extraction::PrecipKind::Unstated) items.push_back(item);
        return detail::string_set(std::move(items));
    }
    if (question == "q4") {
        std::vector<std::string> items;
        for (const auto& [scheme, verdict] : rec.verdicts) {
            if (verdict == extraction::BiasVerdict::NoAnswer) continue;
            items.push_back(to_string(scheme) + "=" + to_string(verdict));
        }
        return detail::string_set(std::move(items));
    }
    if (question == "q5") return detail::string_set(rec.over_regions);
    if (question == "q6") return detail::string_set(rec.under_regions);
    if (question == "q7" || question == "q8") {
        MetricKind kind = question == "q7" ? MetricKind::RMSE : MetricKind::CC;
        std::vector<double> values;
        for (const auto& m : rec.metrics) {
            if (m.kind == kind) values.push_back(m.value);
        }
        return detail::number_multiset(std::move(values));
    }
    throw Error("BadQuestion", "unknown question id " + question);
}

inline bool answers_match(const AnswerRepr& predicted, const AnswerRepr& gold) {
    if (predicted.numeric != gold.numeric) return false;
    if (predicted.numeric) return detail::numbers_equal(predicted.numbers, gold.numbers);
    return predicted.items == gold.items;
}

struct AccuracyRow {
    std::string question_id;
    std::string name;
    long matches = 0;
    long total = 0;

    double accuracy() const { return total > 0 ? static_cast<double>(matches) / total : 0.0; }
};

struct Disagreement {
    std::string record_id;
    std::string question_id;
    AnswerRepr predicted;
    AnswerRepr gold;
};

struct CompareResult {
    std::vector<AccuracyRow> rows;  // fixed 12-row order
    std::vector<Disagreement> disagreements;

    double average_accuracy() const {
        double sum = 0;
        int n = 0;
        for (const auto& row : rows) {
            if (row.total > 0) {
                sum += row.accuracy();
                ++n;
            }
        }
        return n > 0 ? sum / n : 0.0;
    }
};

// Per-question accuracy of pipeline answers against gold annotations.
// Throws MissingRecord if a gold record has no extraction, EmptyGoldSet on
// an empty gold list.
inline CompareResult compare(const std::vector<extraction::ExtractionRecord>& extractions,
                             const std::vector<GoldAnnotation>& gold) {
    if (gold.empty()) throw Error("EmptyGoldSet", "no gold annotations provided");
    std::map<std::string, const extraction::ExtractionRecord*> by_id;
    for (const auto& rec : extractions) by_id[rec.record_id] = &rec;

    CompareResult result;
    for (const auto& def : question_defs()) result.rows.push_back({def.id, def.name, 0, 0});

    for (const auto& g : gold) {
        auto it = by_id.find(g.record_id);
        if (it == by_id.end()) {
            throw Error("MissingRecord", "no extraction for gold record " + g.record_id);
        }
        for (auto& row : result.rows) {
            if (!g.judged.count(row.question_id)) continue;
            AnswerRepr predicted = answer_repr(*it->second, row.question_id);
            AnswerRepr expected = answer_repr(g.values, row.question_id);
            ++row.total;
            if (answers_match(predicted, expected)) {
                ++row.matches;
            } else {
                result.disagreements.push_back({g.record_id, row.question_id, predicted, expected});
            }
        }
    }
    return result;
}

enum class ErrorKind { IrrelevantOrMissing, Incomplete };

inline std::string to_string(ErrorKind k) {
    return k == ErrorKind::IrrelevantOrMissing ? "IrrelevantOrMissing" : "Incomplete";
}

struct ErrorTag {
    std::string record_id;
    std::string question_id;
    ErrorKind kind = ErrorKind::IrrelevantOrMissing;
};

// Two-way wrong-answer taxonomy. Empty or disjoint predictions
// are IrrelevantOrMissing; a proper subset of gold is Incomplete. Anything
// else (extra elements alongside shared ones) is hallucinated content and
// falls under IrrelevantOrMissing, so every disagreement gets exactly one
// tag.
inline std::vector<ErrorTag> tag_errors(const std::vector<Disagreement>& disagreements) {
    std::vector<ErrorTag> tags;
    for (const auto& d : disagreements) {
        ErrorKind kind = ErrorKind::IrrelevantOrMissing;
        if (!d.predicted.empty()) {
            bool subset;
            bool smaller;
            if (d.predicted.numeric) {
                subset = detail::numbers_subset(d.predicted.numbers, d.gold.numbers);
                smaller = d.predicted.numbers.size() < d.gold.numbers.size();
            } else {
                subset = std::includes(d.gold.items.begin(), d.gold.items.end(),
                                       d.predicted.items.begin(), d.predicted.items.end());
                smaller = d.predicted.items.size() < d.gold.items.size();
            }
            if (subset && smaller) kind = ErrorKind::Incomplete;
        }
        tags.push_back({d.record_id, d.question_id, kind});
    }
    return tags;
}

// Accuracy report CSV: one row per question plus an average row.
inline std::string report_csv(const CompareResult& result) {
    std::string out = "question_id,name,matches,total,accuracy\n";
    for (const auto& row : result.rows) {
        out += csv::write_row({row.question_id, row.name, std::to_string(row.matches),
                               std::to_string(row.total), format_fixed(row.accuracy(), 3)});
    }
    out += csv::write_row({"average", "Average accuracy", "", "",
                           format_fixed(result.average_accuracy(), 3)});
    return out;
}

inline std::string tags_csv(const std::vector<ErrorTag>& tags) {
    std::string out = "record_id,question_id,error_kind\n";
    for (const auto& t : tags) {
        out += csv::write_row({t.record_id, t.question_id, to_string(t.kind)});
    }
    return out;
}

}  // namespace litmeta::validation

#pragma once

#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "litmeta/common.hpp"
#include "litmeta/csv.hpp"

namespace litmeta::corpus {

enum class SourceEngine { WebOfScience, Scopus };

enum class DocType { JournalArticle, BookChapter, ConferenceAbstract, ReviewArticle, Other };

inline std::string to_string(SourceEngine e) {
    return e == SourceEngine::WebOfScience ? "WebOfScience" : "Scopus";
}

inline SourceEngine engine_from_string(const std::string& s) {
    if (s == "WebOfScience") return SourceEngine::WebOfScience;
    if (s == "Scopus") return SourceEngine::Scopus;
    throw Error("BadEnum", "unknown source_engine '" + s + "'");
}

inline std::string to_string(DocType t) {
    switch (t) {
        case DocType::JournalArticle: return "JournalArticle";
        case DocType::BookChapter: return "BookChapter";
        case DocType::ConferenceAbstract: return "ConferenceAbstract";
        case DocType::ReviewArticle: return "ReviewArticle";
        case DocType::Other: return "Other";
    }
    return "Other";
}

inline DocType doc_type_from_string(const std::string& s) {
    if (s == "JournalArticle") return DocType::JournalArticle;
    if (s == "BookChapter") return DocType::BookChapter;
    if (s == "ConferenceAbstract") return DocType::ConferenceAbstract;
    if (s == "ReviewArticle") return DocType::ReviewArticle;
    return DocType::Other;
}

// Maps the free-text "type" cell of an export to a DocType.
inline DocType classify_doc_type(const std::string& raw) {
    std::string t = collapse_whitespace(to_lower(raw));
    if (t.empty()) return DocType::Other;
    if (t == "article" || t == "journal article" || t == "research article" ||
        t == "article; early access" || t == "original article") {
        return DocType::JournalArticle;
    }
    if (t.find("book chapter") != std::string::npos || t == "chapter") return DocType::BookChapter;
    if (t.find("conference") != std::string::npos || t.find("proceedings") != std::string::npos ||
        t.find("meeting abstract") != std::string::npos) {
        return DocType::ConferenceAbstract;
    }
    if (t.find("review") != std::string::npos) return DocType::ReviewArticle;
    return DocType::Other;
}

struct PubDate {
    int year = 0;
    std::optional<int> month;
    std::optional<int> day;

    bool operator==(const PubDate&) const = default;

    std::string to_iso() const {
        char buf[16];
        if (day && month) {
            std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, *month, *day);
        } else if (month) {
            std::snprintf(buf, sizeof(buf), "%04d-%02d", year, *month);
        } else {
            std::snprintf(buf, sizeof(buf), "%04d", year);
        }
        return buf;
    }
};

struct BibRecord {
    std::string record_id;
    SourceEngine source_engine = SourceEngine::WebOfScience;
    std::string title;
    std::vector<std::string> authors;
    PubDate pub_date;
    std::string abstract;
    std::optional<std::string> doi;  // normalized: lowercase, no URL scheme prefix
    std::string language;
    DocType doc_type = DocType::Other;
    std::string journal;
    std::optional<long> citation_count;
    std::optional<std::vector<std::string>> author_countries;
    std::optional<std::vector<std::string>> author_institutions;
    bool needs_review = false;  // set when kept without a DOI during dedup
};

struct RowError {
    size_t row;  // 1-based data row number
    std::string message;
};

struct ParseResult {
    std::vector<BibRecord> records;
    std::vector<RowError> errors;
};

inline constexpr int kMinYear = 1900;

// normalize_doi: trim, strip URL/doi prefixes case-insensitively, lowercase.
inline std::string normalize_doi(const std::string& raw) {
    std::string s = trim(raw);
    std::string lower = to_lower(s);
    for (std::string_view prefix :
         {"https://doi.org/", "http://doi.org/", "https://dx.doi.org/", "http://dx.doi.org/",
          "doi.org/", "dx.doi.org/", "doi:"}) {
        if (lower.size() >= prefix.size() && lower.compare(0, prefix.size(), prefix) == 0) {
            s = s.substr(prefix.size());
            lower = lower.substr(prefix.size());
            break;
        }
    }
    std::string out = to_lower(trim(s));
    if (out.empty()) throw Error("EmptyDoi", "DOI is empty after normalization");
    return out;
}

namespace detail {

inline const std::map<std::string, int>& month_names() {
    static const std::map<std::string, int> table = {
        {"jan", 1}, {"feb", 2}, {"mar", 3}, {"apr", 4},  {"may", 5},  {"jun", 6},
        {"jul", 7}, {"aug", 8}, {"sep", 9}, {"oct", 10}, {"nov", 11}, {"dec", 12}};
    return table;
}

inline std::optional<int> parse_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    size_t pos = 0;
    try {
        int v = std::stoi(s, &pos);
        if (pos != s.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

}  // namespace detail

// Accepts ISO dates (2021, 2021-06, 2021-06-15), slashed dates with a
// trailing 4-digit year, and Web of Science style month names
// ("JUN 2023", "JUN 15 2023", "15 JUN 2023").
inline std::optional<PubDate> parse_pub_date(const std::string& raw) {
    std::string s = collapse_whitespace(raw);
    if (s.empty()) return std::nullopt;

    auto valid = [](PubDate d) -> std::optional<PubDate> {
        if (d.month && (*d.month < 1 || *d.month > 12)) return std::nullopt;
        if (d.day && (*d.day < 1 || *d.day > 31)) return std::nullopt;
        return d;
    };

    // ISO: YYYY[-MM[-DD]] (also with '/' separators)
    {
        std::string t = s;
        std::replace(t.begin(), t.end(), '/', '-');
        auto parts = split(t, '-');
        if (!parts.empty() && parts[0].size() == 4) {
            auto year = detail::parse_int(parts[0]);
            if (year) {
                PubDate d{*year, std::nullopt, std::nullopt};
                if (parts.size() >= 2) {
                    auto m = detail::parse_int(parts[1]);
                    if (!m) return std::nullopt;
                    d.month = m;
                }
                if (parts.size() >= 3) {
                    auto day = detail::parse_int(parts[2]);
                    if (!day) return std::nullopt;
                    d.day = day;
                }
                if (parts.size() <= 3) return valid(d);
            }
        }
    }

    // Month-name forms. Collect tokens, find a 4-digit year, a month name,
    // and optionally a day.
    {
        std::string t = s;
        std::replace(t.begin(), t.end(), ',', ' ');
        auto tokens = split_trimmed(t, ' ');
        std::optional<int> year, month, day;
        bool unknown_token = false;
        for (const auto& tok : tokens) {
            auto num = detail::parse_int(tok);
            if (num) {
                if (tok.size() == 4 && !year) year = num;
                else if (!day) day = num;
                else unknown_token = true;
                continue;
            }
            std::string low = to_lower(tok).substr(0, 3);
            auto it = detail::month_names().find(low);
            if (it != detail::month_names().end() && !month) month = it->second;
            else unknown_token = true;
        }
        if (year && !unknown_token) return valid(PubDate{*year, month, day});
    }
    return std::nullopt;
}

// parse_export: delimited-text ingestion for one engine's export.
//
// Required columns (case-insensitive header match): title, authors, date,
// abstract, doi, language, type, journal. Optional: citations, countries,
// institutions. Authors/countries/institutions are semicolon-delimited.
// Rows that cannot be decoded are skipped and collected as RowErrors.
inline ParseResult parse_export(std::string_view raw_bytes, SourceEngine engine, int current_year = 2026) {
    auto rows = csv::parse(raw_bytes);
    if (rows.empty()) throw Error("MalformedHeader", "export has no header row");

    std::unordered_map<std::string, size_t> col;
    for (size_t i = 0; i < rows[0].size(); ++i) {
        col[to_lower(trim(rows[0][i]))] = i;
    }
    for (const char* required :
         {"title", "authors", "date", "abstract", "doi", "language", "type", "journal"}) {
        if (!col.count(required)) {
            throw Error("MalformedHeader", std::string("missing required column '") + required + "'");
        }
    }

    auto cell = [&](const std::vector<std::string>& row, const char* name) -> std::string {
        auto it = col.find(name);
        if (it == col.end() || it->second >= row.size()) return {};
        return trim(row[it->second]);
    };

    std::string prefix = engine == SourceEngine::WebOfScience ? "wos" : "scopus";
    ParseResult result;
    for (size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        size_t data_row = r;  // 1-based data row number
        BibRecord rec;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "%s-%04zu", prefix.c_str(), data_row);
        rec.record_id = idbuf;
        rec.source_engine = engine;
        rec.title = cell(row, "title");
        rec.authors = split_trimmed(cell(row, "authors"), ';');
        rec.abstract = cell(row, "abstract");
        rec.language = cell(row, "language");
        rec.doc_type = classify_doc_type(cell(row, "type"));
        rec.journal = cell(row, "journal");

        std::string date_raw = cell(row, "date");
        auto date = parse_pub_date(date_raw);
        if (!date) {
            result.errors.push_back({data_row, "unparseable date '" + date_raw + "'"});
            continue;
        }
        if (date->year < kMinYear || date->year > current_year + 1) {
            result.errors.push_back({data_row, "year out of range: " + std::to_string(date->year)});
            continue;
        }
        rec.pub_date = *date;

        std::string doi_raw = cell(row, "doi");
        if (!doi_raw.empty()) {
            try {
                rec.doi = normalize_doi(doi_raw);
            } catch (const Error&) {
                // whitespace-only cell: treat as absent
            }
        }

        if (col.count("citations")) {
            auto c = detail::parse_int(cell(row, "citations"));
            if (c && *c >= 0) rec.citation_count = *c;
        }
        if (col.count("countries")) {
            std::string v = cell(row, "countries");
            if (!v.empty()) rec.author_countries = split_trimmed(v, ';');
        }
        if (col.count("institutions")) {
            std::string v = cell(row, "institutions");
            if (!v.empty()) rec.author_institutions = split_trimmed(v, ';');
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

struct DedupResult {
    std::vector<BibRecord> kept;
    std::vector<BibRecord> removed;
};

// Cross-engine duplicates (same DOI) keep the Web of Science copy and drop
// the Scopus one. Within-engine duplicates keep the first by record_id.
// Records without a DOI are always kept, flagged needs_review. Output order
// is sorted by record_id.
inline DedupResult dedup(const std::vector<BibRecord>& records) {
    std::map<std::string, std::vector<const BibRecord*>> by_doi;
    DedupResult result;

    for (const auto& rec : records) {
        if (!rec.doi) {
            BibRecord kept = rec;
            kept.needs_review = true;
            result.kept.push_back(std::move(kept));
        } else {
            by_doi[*rec.doi].push_back(&rec);
        }
    }

    for (auto& [doi, group] : by_doi) {
        std::sort(group.begin(), group.end(),
                  [](const BibRecord* a, const BibRecord* b) { return a->record_id < b->record_id; });
        const BibRecord* winner = nullptr;
        for (const BibRecord* rec : group) {
            if (rec->source_engine == SourceEngine::WebOfScience) {
                winner = rec;
                break;
            }
        }
        if (!winner) winner = group.front();
        for (const BibRecord* rec : group) {
            if (rec == winner) result.kept.push_back(*rec);
            else result.removed.push_back(*rec);
        }
    }

    auto by_id = [](const BibRecord& a, const BibRecord& b) { return a.record_id < b.record_id; };
    std::sort(result.kept.begin(), result.kept.end(), by_id);
    std::sort(result.removed.begin(), result.removed.end(), by_id);
    return result;
}

enum class RuleKind { DocType, Language, KeywordOnAbstractOrTitle };

struct ExclusionRule {
    RuleKind kind = RuleKind::KeywordOnAbstractOrTitle;
    std::string pattern;      // DocType name, allowed language, or keyword
    std::string reason_code;
};

// A Language rule excludes records whose language is non-empty and differs
// from the pattern; the other kinds exclude on a match.
inline bool rule_matches(const ExclusionRule& rule, const BibRecord& rec) {
    switch (rule.kind) {
        case RuleKind::DocType:
            return to_lower(to_string(rec.doc_type)) == to_lower(rule.pattern);
        case RuleKind::Language:
            return !rec.language.empty() && to_lower(rec.language) != to_lower(rule.pattern);
        case RuleKind::KeywordOnAbstractOrTitle: {
            std::string text = to_lower(rec.title + " " + rec.abstract);
            return text.find(to_lower(rule.pattern)) != std::string::npos;
        }
    }
    return false;
}

struct ExclusionResult {
    std::vector<BibRecord> kept;
    std::vector<std::pair<BibRecord, std::string>> excluded;  // record, reason_code
};

// First matching rule wins; rules evaluated in list order.
inline ExclusionResult apply_exclusions(const std::vector<BibRecord>& records,
                                        const std::vector<ExclusionRule>& rules) {
    ExclusionResult result;
    for (const auto& rec : records) {
        const ExclusionRule* hit = nullptr;
        for (const auto& rule : rules) {
            if (rule_matches(rule, rec)) {
                hit = &rule;
                break;
            }
        }
        if (hit) result.excluded.emplace_back(rec, hit->reason_code);
        else result.kept.push_back(rec);
    }
    return result;
}

// Collection-time exclusions: unwanted document types and non-English
// records. Coupled-model keywords are handled later by the screening
// prefilter, not here.
inline std::vector<ExclusionRule> default_exclusion_rules() {
    return {
        {RuleKind::DocType, "BookChapter", "doc_type"},
        {RuleKind::DocType, "ConferenceAbstract", "doc_type"},
        {RuleKind::DocType, "ReviewArticle", "doc_type"},
        {RuleKind::Language, "English", "language"},
    };
}

inline nlohmann::json to_json(const BibRecord& rec) {
    nlohmann::json j;
    j["record_id"] = rec.record_id;
    j["source_engine"] = to_string(rec.source_engine);
    j["title"] = rec.title;
    j["authors"] = rec.authors;
    j["pub_date"] = rec.pub_date.to_iso();
    j["abstract"] = rec.abstract;
    if (rec.doi) j["doi"] = *rec.doi;
    j["language"] = rec.language;
    j["doc_type"] = to_string(rec.doc_type);
    j["journal"] = rec.journal;
    if (rec.citation_count) j["citation_count"] = *rec.citation_count;
    if (rec.author_countries) j["author_countries"] = *rec.author_countries;
    if (rec.author_institutions) j["author_institutions"] = *rec.author_institutions;
    j["needs_review"] = rec.needs_review;
    return j;
}

inline BibRecord record_from_json(const nlohmann::json& j) {
    BibRecord rec;
    rec.record_id = j.at("record_id").get<std::string>();
    rec.source_engine = engine_from_string(j.at("source_engine").get<std::string>());
    rec.title = j.value("title", "");
    rec.authors = j.value("authors", std::vector<std::string>{});
    auto date = parse_pub_date(j.value("pub_date", ""));
    if (!date) throw Error("BadRecord", "bad pub_date in " + rec.record_id);
    rec.pub_date = *date;
    rec.abstract = j.value("abstract", "");
    if (j.contains("doi")) rec.doi = j.at("doi").get<std::string>();
    rec.language = j.value("language", "");
    rec.doc_type = doc_type_from_string(j.value("doc_type", "Other"));
    rec.journal = j.value("journal", "");
    if (j.contains("citation_count")) rec.citation_count = j.at("citation_count").get<long>();
    if (j.contains("author_countries"))
        rec.author_countries = j.at("author_countries").get<std::vector<std::string>>();
    if (j.contains("author_institutions"))
        rec.author_institutions = j.at("author_institutions").get<std::vector<std::string>>();
    rec.needs_review = j.value("needs_review", false);
    return rec;
}

inline std::string to_jsonl(const std::vector<BibRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        out += to_json(rec).dump();
        out.push_back('\n');
    }
    return out;
}

inline std::vector<BibRecord> records_from_jsonl(std::string_view text) {
    std::vector<BibRecord> out;
    for (const auto& line : split(text, '\n')) {
        std::string t = trim(line);
        if (t.empty()) continue;
        out.push_back(record_from_json(nlohmann::json::parse(t)));
    }
    return out;
}

}  // namespace litmeta::corpus
